#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "fewshot/common.hpp"

namespace fewshot {

// Dense row-major double tensor. Small on purpose: shape bookkeeping plus
// flat storage; all heavy math lives in the kernels.
struct Tensor {
    std::vector<long> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<long> s) : shape(std::move(s)), data(count(shape), 0.0) {}

    static long count(const std::vector<long>& s) {
        long n = 1;
        for (long d : s) {
            check_arg(d >= 0, "Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<long> s) { return Tensor(std::move(s)); }

    long numel() const { return static_cast<long>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    long dim(int i) const { return shape[static_cast<size_t>(i)]; }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    void reshape(std::vector<long> s) {
        check_arg(count(s) == numel(), "Tensor::reshape: element count mismatch");
        shape = std::move(s);
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    double& at(long i) { return data[static_cast<size_t>(i)]; }
    double at(long i) const { return data[static_cast<size_t>(i)]; }
    double& at(long i, long j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
    double at(long i, long j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
    double& at(long i, long j, long k) {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }
    double at(long i, long j, long k) const {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }
    double& at(long i, long j, long k, long l) {
        return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
    }
    double at(long i, long j, long k, long l) const {
        return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
    }
};

}  // namespace fewshot
