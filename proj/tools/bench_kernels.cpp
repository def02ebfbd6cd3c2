// Serial-reference vs OpenMP-kernel timings for the hot paths.
// Run: ./bench_kernels [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <vector>

#include "fewshot/kernels.hpp"
#include "fewshot/rng.hpp"

namespace {

using namespace fewshot;

std::vector<double> random_vec(long n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.uniform_range(-1.0, 1.0);
    return v;
}

void bm_matmul_serial(benchmark::State& state) {
    const long n = state.range(0);
    auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(static_cast<size_t>(n * n));
    for (auto _ : state) {
        kern::serial::matmul(a.data(), b.data(), c.data(), n, n, n);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void bm_matmul_omp(benchmark::State& state) {
    const long n = state.range(0);
    auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(static_cast<size_t>(n * n));
    for (auto _ : state) {
        kern::matmul(a.data(), b.data(), c.data(), n, n, n);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

kern::Conv2dShape conv_shape(long c_in, long c_out, long hw) {
    kern::Conv2dShape s;
    s.in_c = c_in;
    s.in_h = s.in_w = hw;
    s.out_c = c_out;
    s.kh = s.kw = 3;
    s.stride = 1;
    s.pad = 1;
    return s;
}

void bm_conv_serial(benchmark::State& state) {
    const long batch = state.range(0);
    auto s = conv_shape(16, 32, 32);
    auto x = random_vec(batch * s.in_plane(), 1);
    auto w = random_vec(s.weight_count(), 2);
    std::vector<double> y(static_cast<size_t>(batch * s.out_plane()));
    for (auto _ : state) {
        kern::serial::conv2d_forward(x.data(), w.data(), y.data(), batch, s);
        benchmark::ClobberMemory();
    }
}

void bm_conv_omp(benchmark::State& state) {
    const long batch = state.range(0);
    auto s = conv_shape(16, 32, 32);
    auto x = random_vec(batch * s.in_plane(), 1);
    auto w = random_vec(s.weight_count(), 2);
    std::vector<double> y(static_cast<size_t>(batch * s.out_plane()));
    for (auto _ : state) {
        kern::conv2d_forward(x.data(), w.data(), y.data(), batch, s);
        benchmark::ClobberMemory();
    }
}

void bm_bn_serial(benchmark::State& state) {
    const long n = state.range(0), c = 32, hw = 32 * 32;
    auto x = random_vec(n * c * hw, 1);
    std::vector<double> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
    for (auto _ : state) {
        kern::serial::bn_batch_stats(x.data(), n, c, hw, mean.data(), var.data());
        benchmark::ClobberMemory();
    }
}

void bm_bn_omp(benchmark::State& state) {
    const long n = state.range(0), c = 32, hw = 32 * 32;
    auto x = random_vec(n * c * hw, 1);
    std::vector<double> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
    for (auto _ : state) {
        kern::bn_batch_stats(x.data(), n, c, hw, mean.data(), var.data());
        benchmark::ClobberMemory();
    }
}

void bm_resize_serial(benchmark::State& state) {
    auto src = random_vec(64 * 64 * 3, 1);
    std::vector<double> dst(255 * 255 * 3);
    for (auto _ : state) {
        kern::serial::resize_bilinear_hwc(src.data(), 64, 64, 3, dst.data(), 255, 255);
        benchmark::ClobberMemory();
    }
}

void bm_resize_omp(benchmark::State& state) {
    auto src = random_vec(64 * 64 * 3, 1);
    std::vector<double> dst(255 * 255 * 3);
    for (auto _ : state) {
        kern::resize_bilinear_hwc(src.data(), 64, 64, 3, dst.data(), 255, 255);
        benchmark::ClobberMemory();
    }
}

BENCHMARK(bm_matmul_serial)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul_omp)->Arg(128)->Arg(256);
BENCHMARK(bm_conv_serial)->Arg(8)->Arg(32);
BENCHMARK(bm_conv_omp)->Arg(8)->Arg(32);
BENCHMARK(bm_bn_serial)->Arg(32);
BENCHMARK(bm_bn_omp)->Arg(32);
BENCHMARK(bm_resize_serial);
BENCHMARK(bm_resize_omp);

}  // namespace

BENCHMARK_MAIN();
