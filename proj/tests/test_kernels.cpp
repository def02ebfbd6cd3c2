#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <vector>

#include "fewshot/kernels.hpp"
#include "fewshot/rng.hpp"

using namespace fewshot;

namespace {

std::vector<double> random_vec(long n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.uniform_range(-1.0, 1.0);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("matmul variants match the serial reference bitwise") {
    const long m = 37, k = 53, n = 29;
    auto a = random_vec(m * k, 1);
    auto b = random_vec(k * n, 2);
    auto at = random_vec(k * m, 3);
    auto bt = random_vec(n * k, 4);

    std::vector<double> c1(static_cast<size_t>(m * n)), c2(c1);
    kern::matmul(a.data(), b.data(), c1.data(), m, k, n);
    kern::serial::matmul(a.data(), b.data(), c2.data(), m, k, n);
    CHECK(bitwise_equal(c1, c2));

    kern::matmul_at_b(at.data(), b.data(), c1.data(), m, k, n);
    kern::serial::matmul_at_b(at.data(), b.data(), c2.data(), m, k, n);
    CHECK(bitwise_equal(c1, c2));

    kern::matmul_a_bt(a.data(), bt.data(), c1.data(), m, k, n);
    kern::serial::matmul_a_bt(a.data(), bt.data(), c2.data(), m, k, n);
    CHECK(bitwise_equal(c1, c2));
}

TEST_CASE("matmul accumulate adds into the output") {
    const long m = 5, k = 7, n = 3;
    auto a = random_vec(m * k, 5);
    auto b = random_vec(k * n, 6);
    std::vector<double> base(static_cast<size_t>(m * n), 0.5);
    auto c = base;
    kern::matmul(a.data(), b.data(), c.data(), m, k, n, true);
    std::vector<double> fresh(static_cast<size_t>(m * n));
    kern::matmul(a.data(), b.data(), fresh.data(), m, k, n, false);
    for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(0.5 + fresh[i]));
}

TEST_CASE("results are identical across thread counts") {
    const long m = 64, k = 48, n = 32;
    auto a = random_vec(m * k, 7);
    auto b = random_vec(k * n, 8);
    std::vector<double> c1(static_cast<size_t>(m * n)), c2(c1);

    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    kern::matmul(a.data(), b.data(), c1.data(), m, k, n);
    omp_set_num_threads(2);
    kern::matmul(a.data(), b.data(), c2.data(), m, k, n);
    omp_set_num_threads(saved);
    CHECK(bitwise_equal(c1, c2));
}

TEST_CASE("conv2d im2col path matches the direct serial convolution") {
    kern::Conv2dShape s;
    s.in_c = 3;
    s.in_h = 11;
    s.in_w = 13;
    s.out_c = 5;
    s.kh = s.kw = 3;

    for (auto [stride, pad] : {std::pair<long, long>{1, 1}, {2, 1}, {1, 0}, {2, 0}}) {
        s.stride = stride;
        s.pad = pad;
        const long batch = 4;
        auto x = random_vec(batch * s.in_plane(), 10 + stride + pad);
        auto w = random_vec(s.weight_count(), 20 + stride);
        std::vector<double> y1(static_cast<size_t>(batch * s.out_plane()));
        std::vector<double> y2(y1);
        kern::conv2d_forward(x.data(), w.data(), y1.data(), batch, s);
        kern::serial::conv2d_forward(x.data(), w.data(), y2.data(), batch, s);
        for (size_t i = 0; i < y1.size(); ++i)
            CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d_backward_weight is deterministic across thread counts") {
    kern::Conv2dShape s;
    s.in_c = 2;
    s.in_h = s.in_w = 8;
    s.out_c = 3;
    s.kh = s.kw = 3;
    s.stride = 1;
    s.pad = 1;
    const long batch = 37;  // not a multiple of the reduction block
    auto x = random_vec(batch * s.in_plane(), 31);
    auto dy = random_vec(batch * s.out_plane(), 32);

    std::vector<double> dw1(static_cast<size_t>(s.weight_count()), 0.0), dw2(dw1);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    kern::conv2d_backward_weight(x.data(), dy.data(), dw1.data(), batch, s);
    omp_set_num_threads(2);
    kern::conv2d_backward_weight(x.data(), dy.data(), dw2.data(), batch, s);
    omp_set_num_threads(saved);
    CHECK(bitwise_equal(dw1, dw2));
}

TEST_CASE("im2col / col2im_add are adjoint") {
    // <im2col(x), c> == <x, col2im_add(c)> for random c
    kern::Conv2dShape s;
    s.in_c = 2;
    s.in_h = 6;
    s.in_w = 5;
    s.out_c = 1;
    s.kh = s.kw = 3;
    s.stride = 2;
    s.pad = 1;
    auto x = random_vec(s.in_plane(), 41);
    auto c = random_vec(s.col_rows() * s.out_h() * s.out_w(), 42);

    std::vector<double> cols(c.size());
    kern::im2col(x.data(), s, cols.data());
    double lhs = 0.0;
    for (size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];

    std::vector<double> back(static_cast<size_t>(s.in_plane()), 0.0);
    kern::col2im_add(c.data(), s, back.data());
    double rhs = 0.0;
    for (size_t i = 0; i < back.size(); ++i) rhs += back[i] * x[static_cast<size_t>(i)];

    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("bn statistics match the serial reference and hand values") {
    const long n = 6, c = 4, hw = 9;
    auto x = random_vec(n * c * hw, 50);
    std::vector<double> m1(static_cast<size_t>(c)), v1(m1), m2(m1), v2(m1);
    kern::bn_batch_stats(x.data(), n, c, hw, m1.data(), v1.data());
    kern::serial::bn_batch_stats(x.data(), n, c, hw, m2.data(), v2.data());
    CHECK(bitwise_equal(m1, m2));
    CHECK(bitwise_equal(v1, v2));

    // constant channel: mean == value, var == 0
    std::vector<double> xc(static_cast<size_t>(n * c * hw), 0.75);
    kern::bn_batch_stats(xc.data(), n, c, hw, m1.data(), v1.data());
    for (long i = 0; i < c; ++i) {
        CHECK(m1[static_cast<size_t>(i)] == doctest::Approx(0.75));
        CHECK(v1[static_cast<size_t>(i)] == doctest::Approx(0.0));
    }
}

TEST_CASE("bn_normalize standardizes each channel") {
    const long n = 8, c = 3, hw = 16;
    auto x = random_vec(n * c * hw, 60);
    std::vector<double> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
    kern::bn_batch_stats(x.data(), n, c, hw, mean.data(), var.data());
    std::vector<double> gamma(static_cast<size_t>(c), 1.0), beta(static_cast<size_t>(c), 0.0);
    std::vector<double> y(x.size());
    kern::bn_normalize(x.data(), mean.data(), var.data(), gamma.data(), beta.data(), 1e-12,
                       y.data(), n, c, hw);
    std::vector<double> ymean(static_cast<size_t>(c)), yvar(static_cast<size_t>(c));
    kern::bn_batch_stats(y.data(), n, c, hw, ymean.data(), yvar.data());
    for (long i = 0; i < c; ++i) {
        CHECK(ymean[static_cast<size_t>(i)] == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(yvar[static_cast<size_t>(i)] == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("maxpool forward matches serial and routes gradients to the argmax") {
    const long n = 3, c = 2, h = 7, w = 9;
    auto x = random_vec(n * c * h * w, 70);
    const long kh = 3, kw = 3, stride = 2, pad = 1;
    const long oh = (h + 2 * pad - kh) / stride + 1;
    const long ow = (w + 2 * pad - kw) / stride + 1;

    std::vector<double> y1(static_cast<size_t>(n * c * oh * ow)), y2(y1);
    std::vector<long> a1(y1.size()), a2(y1.size());
    kern::maxpool_forward(x.data(), n, c, h, w, kh, kw, stride, pad, y1.data(), a1.data());
    kern::serial::maxpool_forward(x.data(), n, c, h, w, kh, kw, stride, pad, y2.data(),
                                  a2.data());
    CHECK(bitwise_equal(y1, y2));
    CHECK(a1 == a2);

    auto dy = random_vec(n * c * oh * ow, 71);
    std::vector<double> dx(static_cast<size_t>(n * c * h * w));
    kern::maxpool_backward(dy.data(), a1.data(), n, c, oh * ow, h * w, dx.data());
    double sum_dy = 0.0, sum_dx = 0.0;
    for (double v : dy) sum_dy += v;
    for (double v : dx) sum_dx += v;
    CHECK(sum_dx == doctest::Approx(sum_dy).epsilon(1e-12));
}

TEST_CASE("bilinear resize: identity, constants, serial parity") {
    auto src = random_vec(16 * 12 * 3, 80);

    std::vector<double> same(src.size());
    kern::resize_bilinear_hwc(src.data(), 16, 12, 3, same.data(), 16, 12);
    CHECK(bitwise_equal(src, same));

    std::vector<double> constant(10 * 10 * 3, 0.42);
    std::vector<double> up(25 * 31 * 3);
    kern::resize_bilinear_hwc(constant.data(), 10, 10, 3, up.data(), 25, 31);
    for (double v : up) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));

    std::vector<double> p1(33 * 21 * 3), p2(p1);
    kern::resize_bilinear_hwc(src.data(), 16, 12, 3, p1.data(), 33, 21);
    kern::serial::resize_bilinear_hwc(src.data(), 16, 12, 3, p2.data(), 33, 21);
    CHECK(bitwise_equal(p1, p2));
}

TEST_CASE("rotate90 cycles and serial parity") {
    const long h = 5, w = 8, c = 3;
    auto src = random_vec(h * w * c, 90);

    // four quarter turns compose to the identity
    std::vector<double> r1(src.size()), r2(src.size()), r3(src.size()), r4(src.size());
    kern::rotate90_hwc(src.data(), h, w, c, 1, r1.data());
    kern::rotate90_hwc(r1.data(), w, h, c, 1, r2.data());
    kern::rotate90_hwc(r2.data(), h, w, c, 1, r3.data());
    kern::rotate90_hwc(r3.data(), w, h, c, 1, r4.data());
    CHECK(bitwise_equal(src, r4));

    // double quarter turn equals the half turn
    std::vector<double> twice(src.size());
    kern::rotate90_hwc(src.data(), h, w, c, 2, twice.data());
    CHECK(bitwise_equal(r2, twice));

    std::vector<double> s1(src.size());
    kern::serial::rotate90_hwc(src.data(), h, w, c, 1, s1.data());
    CHECK(bitwise_equal(r1, s1));
}

TEST_CASE("global average pool forward/backward") {
    const long n = 4, c = 3, hw = 25;
    auto x = random_vec(n * c * hw, 95);
    std::vector<double> y1(static_cast<size_t>(n * c)), y2(y1);
    kern::global_avgpool_forward(x.data(), n, c, hw, y1.data());
    kern::serial::global_avgpool_forward(x.data(), n, c, hw, y2.data());
    CHECK(bitwise_equal(y1, y2));

    auto dy = random_vec(n * c, 96);
    std::vector<double> dx(static_cast<size_t>(n * c * hw));
    kern::global_avgpool_backward(dy.data(), n, c, hw, dx.data());
    for (long i = 0; i < n * c; ++i)
        CHECK(dx[static_cast<size_t>(i * hw)] ==
              doctest::Approx(dy[static_cast<size_t>(i)] / hw));
}
