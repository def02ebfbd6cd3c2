#include "fewshot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

namespace fewshot::kern {

namespace {

inline void zero(double* p, long n) { std::memset(p, 0, sizeof(double) * static_cast<size_t>(n)); }

inline void matmul_rows(const double* a, const double* b, double* c, long m, long k, long n,
                        bool acc, long i0, long i1) {
    for (long i = i0; i < i1; ++i) {
        double* crow = c + i * n;
        if (!acc) zero(crow, n);
        const double* arow = a + i * k;
        for (long p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void matmul_at_b_rows(const double* a, const double* b, double* c, long m, long k,
                             long n, bool acc, long i0, long i1) {
    for (long i = i0; i < i1; ++i) {
        double* crow = c + i * n;
        if (!acc) zero(crow, n);
        for (long p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* brow = b + p * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void matmul_a_bt_rows(const double* a, const double* b, double* c, long m, long k,
                             long n, bool acc, long i0, long i1) {
    for (long i = i0; i < i1; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double dot = 0.0;
            for (long p = 0; p < k; ++p) dot += arow[p] * brow[p];
            if (acc)
                crow[j] += dot;
            else
                crow[j] = dot;
        }
    }
}

}  // namespace

void matmul(const double* a, const double* b, double* c, long m, long k, long n, bool acc) {
#pragma omp parallel for schedule(static) if (m > 2 && m * k * n > 16384)
    for (long i = 0; i < m; ++i) matmul_rows(a, b, c, m, k, n, acc, i, i + 1);
}

void matmul_at_b(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc) {
#pragma omp parallel for schedule(static) if (m > 2 && m * k * n > 16384)
    for (long i = 0; i < m; ++i) matmul_at_b_rows(a, b, c, m, k, n, acc, i, i + 1);
}

void matmul_a_bt(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc) {
#pragma omp parallel for schedule(static) if (m > 2 && m * k * n > 16384)
    for (long i = 0; i < m; ++i) matmul_a_bt_rows(a, b, c, m, k, n, acc, i, i + 1);
}

void im2col(const double* x, const Conv2dShape& s, double* cols) {
    const long oh = s.out_h(), ow = s.out_w();
    const long ocount = oh * ow;
    long row = 0;
    for (long ci = 0; ci < s.in_c; ++ci) {
        const double* plane = x + ci * s.in_h * s.in_w;
        for (long ky = 0; ky < s.kh; ++ky) {
            for (long kx = 0; kx < s.kw; ++kx, ++row) {
                double* out = cols + row * ocount;
                for (long oy = 0; oy < oh; ++oy) {
                    const long iy = oy * s.stride - s.pad + ky;
                    double* orow = out + oy * ow;
                    if (iy < 0 || iy >= s.in_h) {
                        zero(orow, ow);
                        continue;
                    }
                    const double* irow = plane + iy * s.in_w;
                    for (long ox = 0; ox < ow; ++ox) {
                        const long ix = ox * s.stride - s.pad + kx;
                        orow[ox] = (ix >= 0 && ix < s.in_w) ? irow[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const Conv2dShape& s, double* x) {
    const long oh = s.out_h(), ow = s.out_w();
    const long ocount = oh * ow;
    long row = 0;
    for (long ci = 0; ci < s.in_c; ++ci) {
        double* plane = x + ci * s.in_h * s.in_w;
        for (long ky = 0; ky < s.kh; ++ky) {
            for (long kx = 0; kx < s.kw; ++kx, ++row) {
                const double* in = cols + row * ocount;
                for (long oy = 0; oy < oh; ++oy) {
                    const long iy = oy * s.stride - s.pad + ky;
                    if (iy < 0 || iy >= s.in_h) continue;
                    double* irow = plane + iy * s.in_w;
                    const double* orow = in + oy * ow;
                    for (long ox = 0; ox < ow; ++ox) {
                        const long ix = ox * s.stride - s.pad + kx;
                        if (ix >= 0 && ix < s.in_w) irow[ix] += orow[ox];
                    }
                }
            }
        }
    }
}

void conv2d_forward(const double* x, const double* w, double* y, long batch,
                    const Conv2dShape& s) {
    const long ocount = s.out_h() * s.out_w();
    const long crows = s.col_rows();
#pragma omp parallel
    {
        std::vector<double> cols(static_cast<size_t>(crows * ocount));
#pragma omp for schedule(static)
        for (long b = 0; b < batch; ++b) {
            im2col(x + b * s.in_plane(), s, cols.data());
            matmul_rows(w, cols.data(), y + b * s.out_plane(), s.out_c, crows, ocount,
                        false, 0, s.out_c);
        }
    }
}

void conv2d_backward_input(const double* w, const double* dy, double* dx, long batch,
                           const Conv2dShape& s) {
    const long ocount = s.out_h() * s.out_w();
    const long crows = s.col_rows();
#pragma omp parallel
    {
        std::vector<double> cols(static_cast<size_t>(crows * ocount));
#pragma omp for schedule(static)
        for (long b = 0; b < batch; ++b) {
            // cols = W^T(crows x out_c) * dy_b(out_c x ocount)
            matmul_at_b_rows(w, dy + b * s.out_plane(), cols.data(), crows, s.out_c,
                             ocount, false, 0, crows);
            double* dst = dx + b * s.in_plane();
            zero(dst, s.in_plane());
            col2im_add(cols.data(), s, dst);
        }
    }
}

void conv2d_backward_weight(const double* x, const double* dy, double* dw, long batch,
                            const Conv2dShape& s) {
    const long ocount = s.out_h() * s.out_w();
    const long crows = s.col_rows();
    const long wcount = s.weight_count();
    const long block = 16;  // fixed block size keeps the reduction order
    const long nblocks = (batch + block - 1) / block;
    std::vector<double> partial(static_cast<size_t>(nblocks * wcount), 0.0);
#pragma omp parallel
    {
        std::vector<double> cols(static_cast<size_t>(crows * ocount));
#pragma omp for schedule(static)
        for (long nb = 0; nb < nblocks; ++nb) {
            double* acc = partial.data() + nb * wcount;
            const long b1 = std::min(batch, (nb + 1) * block);
            for (long b = nb * block; b < b1; ++b) {
                im2col(x + b * s.in_plane(), s, cols.data());
                // dW += dy_b(out_c x ocount) * cols^T(ocount x crows)
                matmul_a_bt_rows(dy + b * s.out_plane(), cols.data(), acc, s.out_c,
                                 ocount, crows, true, 0, s.out_c);
            }
        }
    }
    for (long nb = 0; nb < nblocks; ++nb) {
        const double* acc = partial.data() + nb * wcount;
        for (long i = 0; i < wcount; ++i) dw[i] += acc[i];
    }
}

void bn_batch_stats(const double* x, long n, long c, long hw, double* mean, double* var) {
    const long count = n * hw;
#pragma omp parallel for schedule(static) if (c > 1 && n * c * hw > 8192)
    for (long ci = 0; ci < c; ++ci) {
        double sum = 0.0;
        for (long b = 0; b < n; ++b) {
            const double* p = x + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) sum += p[i];
        }
        const double mu = sum / static_cast<double>(count);
        double sq = 0.0;
        for (long b = 0; b < n; ++b) {
            const double* p = x + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) {
                const double d = p[i] - mu;
                sq += d * d;
            }
        }
        mean[ci] = mu;
        var[ci] = sq / static_cast<double>(count);
    }
}

void bn_normalize(const double* x, const double* mean, const double* var,
                  const double* gamma, const double* beta, double eps, double* y,
                  long n, long c, long hw) {
#pragma omp parallel for schedule(static) collapse(2) if (n * c * hw > 8192)
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double inv = 1.0 / std::sqrt(var[ci] + eps);
            const double g = gamma[ci], bt = beta[ci], mu = mean[ci];
            const double* src = x + (b * c + ci) * hw;
            double* dst = y + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) dst[i] = g * (src[i] - mu) * inv + bt;
        }
    }
}

void bn_backward_batch(const double* x, const double* mean, const double* var,
                       const double* gamma, double eps, const double* dy, double* dx,
                       double* dgamma, double* dbeta, long n, long c, long hw) {
    const double count = static_cast<double>(n * hw);
#pragma omp parallel for schedule(static) if (c > 1 && n * c * hw > 8192)
    for (long ci = 0; ci < c; ++ci) {
        const double mu = mean[ci];
        const double inv = 1.0 / std::sqrt(var[ci] + eps);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (long b = 0; b < n; ++b) {
            const double* xp = x + (b * c + ci) * hw;
            const double* gp = dy + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) {
                sum_dy += gp[i];
                sum_dy_xhat += gp[i] * (xp[i] - mu) * inv;
            }
        }
        dgamma[ci] += sum_dy_xhat;
        dbeta[ci] += sum_dy;
        const double g_inv = gamma[ci] * inv;
        for (long b = 0; b < n; ++b) {
            const double* xp = x + (b * c + ci) * hw;
            const double* gp = dy + (b * c + ci) * hw;
            double* dp = dx + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) {
                const double xhat = (xp[i] - mu) * inv;
                dp[i] = g_inv * (gp[i] - sum_dy / count - xhat * sum_dy_xhat / count);
            }
        }
    }
}

void bn_backward_frozen(const double* x, const double* mean, const double* var,
                        const double* gamma, double eps, const double* dy, double* dx,
                        double* dgamma, double* dbeta, long n, long c, long hw) {
#pragma omp parallel for schedule(static) if (c > 1 && n * c * hw > 8192)
    for (long ci = 0; ci < c; ++ci) {
        const double mu = mean[ci];
        const double inv = 1.0 / std::sqrt(var[ci] + eps);
        const double g_inv = gamma[ci] * inv;
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (long b = 0; b < n; ++b) {
            const double* xp = x + (b * c + ci) * hw;
            const double* gp = dy + (b * c + ci) * hw;
            double* dp = dx + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) {
                sum_dy += gp[i];
                sum_dy_xhat += gp[i] * (xp[i] - mu) * inv;
                dp[i] = g_inv * gp[i];
            }
        }
        dgamma[ci] += sum_dy_xhat;
        dbeta[ci] += sum_dy;
    }
}

void maxpool_forward(const double* x, long n, long c, long h, long w, long kh, long kw,
                     long stride, long pad, double* y, long* arg) {
    const long oh = (h + 2 * pad - kh) / stride + 1;
    const long ow = (w + 2 * pad - kw) / stride + 1;
#pragma omp parallel for schedule(static) collapse(2) if (n * c > 2)
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double* plane = x + (b * c + ci) * h * w;
            double* out = y + (b * c + ci) * oh * ow;
            long* ap = arg + (b * c + ci) * oh * ow;
            for (long oy = 0; oy < oh; ++oy) {
                for (long ox = 0; ox < ow; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    long best_idx = -1;
                    for (long ky = 0; ky < kh; ++ky) {
                        const long iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (long kx = 0; kx < kw; ++kx) {
                            const long ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            const double v = plane[iy * w + ix];
                            if (v > best) {
                                best = v;
                                best_idx = iy * w + ix;
                            }
                        }
                    }
                    out[oy * ow + ox] = best;
                    ap[oy * ow + ox] = best_idx;
                }
            }
        }
    }
}

void maxpool_backward(const double* dy, const long* arg, long n, long c, long out_hw,
                      long in_hw, double* dx) {
#pragma omp parallel for schedule(static) collapse(2) if (n * c > 2)
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double* gp = dy + (b * c + ci) * out_hw;
            const long* ap = arg + (b * c + ci) * out_hw;
            double* dp = dx + (b * c + ci) * in_hw;
            zero(dp, in_hw);
            for (long i = 0; i < out_hw; ++i)
                if (ap[i] >= 0) dp[ap[i]] += gp[i];
        }
    }
}

void global_avgpool_forward(const double* x, long n, long c, long hw, double* y) {
#pragma omp parallel for schedule(static) collapse(2) if (n * c > 2)
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double* p = x + (b * c + ci) * hw;
            double sum = 0.0;
            for (long i = 0; i < hw; ++i) sum += p[i];
            y[b * c + ci] = sum / static_cast<double>(hw);
        }
    }
}

void global_avgpool_backward(const double* dy, long n, long c, long hw, double* dx) {
#pragma omp parallel for schedule(static) collapse(2) if (n * c > 2)
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double g = dy[b * c + ci] / static_cast<double>(hw);
            double* dp = dx + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) dp[i] = g;
        }
    }
}

namespace {

inline void resize_rows(const double* src, long sh, long sw, long c, double* dst, long dh,
                        long dw, long y0, long y1) {
    const double sy_scale = static_cast<double>(sh) / static_cast<double>(dh);
    const double sx_scale = static_cast<double>(sw) / static_cast<double>(dw);
    for (long y = y0; y < y1; ++y) {
        double sy = (static_cast<double>(y) + 0.5) * sy_scale - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(sh - 1));
        const long iy0 = static_cast<long>(sy);
        const long iy1 = std::min(iy0 + 1, sh - 1);
        const double wy = sy - static_cast<double>(iy0);
        for (long x = 0; x < dw; ++x) {
            double sx = (static_cast<double>(x) + 0.5) * sx_scale - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(sw - 1));
            const long ix0 = static_cast<long>(sx);
            const long ix1 = std::min(ix0 + 1, sw - 1);
            const double wx = sx - static_cast<double>(ix0);
            const double* p00 = src + (iy0 * sw + ix0) * c;
            const double* p01 = src + (iy0 * sw + ix1) * c;
            const double* p10 = src + (iy1 * sw + ix0) * c;
            const double* p11 = src + (iy1 * sw + ix1) * c;
            double* out = dst + (y * dw + x) * c;
            for (long ch = 0; ch < c; ++ch) {
                const double top = p00[ch] + (p01[ch] - p00[ch]) * wx;
                const double bot = p10[ch] + (p11[ch] - p10[ch]) * wx;
                out[ch] = top + (bot - top) * wy;
            }
        }
    }
}

inline void rotate_rows(const double* src, long h, long w, long c, int times, double* dst,
                        long y0, long y1) {
    const long dw = (times % 2 == 0) ? w : h;
    for (long y = y0; y < y1; ++y) {
        for (long x = 0; x < dw; ++x) {
            const double* from = nullptr;
            switch (times) {
                case 0: from = src + (y * w + x) * c; break;
                case 1: from = src + (x * w + (w - 1 - y)) * c; break;  // 90 CCW
                case 2: from = src + ((h - 1 - y) * w + (w - 1 - x)) * c; break;
                default: from = src + ((h - 1 - x) * w + y) * c; break;  // 270 CCW
            }
            double* to = dst + (y * dw + x) * c;
            for (long ch = 0; ch < c; ++ch) to[ch] = from[ch];
        }
    }
}

}  // namespace

void resize_bilinear_hwc(const double* src, long sh, long sw, long c, double* dst, long dh,
                         long dw) {
#pragma omp parallel for schedule(static) if (dh * dw * c > 16384)
    for (long y = 0; y < dh; ++y) resize_rows(src, sh, sw, c, dst, dh, dw, y, y + 1);
}

void rotate90_hwc(const double* src, long h, long w, long c, int times, double* dst) {
    times = ((times % 4) + 4) % 4;
    const long dhh = (times % 2 == 0) ? h : w;
#pragma omp parallel for schedule(static) if (h * w * c > 16384)
    for (long y = 0; y < dhh; ++y) rotate_rows(src, h, w, c, times, dst, y, y + 1);
}

namespace serial {

void matmul(const double* a, const double* b, double* c, long m, long k, long n, bool acc) {
    matmul_rows(a, b, c, m, k, n, acc, 0, m);
}

void matmul_at_b(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc) {
    matmul_at_b_rows(a, b, c, m, k, n, acc, 0, m);
}

void matmul_a_bt(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc) {
    matmul_a_bt_rows(a, b, c, m, k, n, acc, 0, m);
}

void conv2d_forward(const double* x, const double* w, double* y, long batch,
                    const Conv2dShape& s) {
    const long oh = s.out_h(), ow = s.out_w();
    for (long b = 0; b < batch; ++b) {
        const double* img = x + b * s.in_plane();
        double* out = y + b * s.out_plane();
        for (long oc = 0; oc < s.out_c; ++oc) {
            const double* wrow = w + oc * s.col_rows();
            for (long oy = 0; oy < oh; ++oy) {
                for (long ox = 0; ox < ow; ++ox) {
                    double sum = 0.0;
                    long widx = 0;
                    for (long ci = 0; ci < s.in_c; ++ci) {
                        for (long ky = 0; ky < s.kh; ++ky) {
                            for (long kx = 0; kx < s.kw; ++kx, ++widx) {
                                const long iy = oy * s.stride - s.pad + ky;
                                const long ix = ox * s.stride - s.pad + kx;
                                if (iy < 0 || iy >= s.in_h || ix < 0 || ix >= s.in_w)
                                    continue;
                                sum += wrow[widx] * img[(ci * s.in_h + iy) * s.in_w + ix];
                            }
                        }
                    }
                    out[(oc * oh + oy) * ow + ox] = sum;
                }
            }
        }
    }
}

void bn_batch_stats(const double* x, long n, long c, long hw, double* mean, double* var) {
    const long count = n * hw;
    for (long ci = 0; ci < c; ++ci) {
        double sum = 0.0;
        for (long b = 0; b < n; ++b) {
            const double* p = x + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) sum += p[i];
        }
        const double mu = sum / static_cast<double>(count);
        double sq = 0.0;
        for (long b = 0; b < n; ++b) {
            const double* p = x + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i) {
                const double d = p[i] - mu;
                sq += d * d;
            }
        }
        mean[ci] = mu;
        var[ci] = sq / static_cast<double>(count);
    }
}

void bn_normalize(const double* x, const double* mean, const double* var,
                  const double* gamma, const double* beta, double eps, double* y, long n,
                  long c, long hw) {
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double inv = 1.0 / std::sqrt(var[ci] + eps);
            const double* src = x + (b * c + ci) * hw;
            double* dst = y + (b * c + ci) * hw;
            for (long i = 0; i < hw; ++i)
                dst[i] = gamma[ci] * (src[i] - mean[ci]) * inv + beta[ci];
        }
    }
}

void maxpool_forward(const double* x, long n, long c, long h, long w, long kh, long kw,
                     long stride, long pad, double* y, long* arg) {
    const long oh = (h + 2 * pad - kh) / stride + 1;
    const long ow = (w + 2 * pad - kw) / stride + 1;
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double* plane = x + (b * c + ci) * h * w;
            double* out = y + (b * c + ci) * oh * ow;
            long* ap = arg + (b * c + ci) * oh * ow;
            for (long oy = 0; oy < oh; ++oy) {
                for (long ox = 0; ox < ow; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    long best_idx = -1;
                    for (long ky = 0; ky < kh; ++ky) {
                        const long iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (long kx = 0; kx < kw; ++kx) {
                            const long ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            const double v = plane[iy * w + ix];
                            if (v > best) {
                                best = v;
                                best_idx = iy * w + ix;
                            }
                        }
                    }
                    out[oy * ow + ox] = best;
                    ap[oy * ow + ox] = best_idx;
                }
            }
        }
    }
}

void global_avgpool_forward(const double* x, long n, long c, long hw, double* y) {
    for (long b = 0; b < n; ++b) {
        for (long ci = 0; ci < c; ++ci) {
            const double* p = x + (b * c + ci) * hw;
            double sum = 0.0;
            for (long i = 0; i < hw; ++i) sum += p[i];
            y[b * c + ci] = sum / static_cast<double>(hw);
        }
    }
}

void resize_bilinear_hwc(const double* src, long sh, long sw, long c, double* dst, long dh,
                         long dw) {
    resize_rows(src, sh, sw, c, dst, dh, dw, 0, dh);
}

void rotate90_hwc(const double* src, long h, long w, long c, int times, double* dst) {
    times = ((times % 4) + 4) % 4;
    const long dhh = (times % 2 == 0) ? h : w;
    rotate_rows(src, h, w, c, times, dst, 0, dhh);
}

}  // namespace serial

}  // namespace fewshot::kern
