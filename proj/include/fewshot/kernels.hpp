#pragma once

#include <cstdint>

namespace fewshot::kern {

// Compute kernels behind every layer and image transform. The parallel
// versions split work across independent output elements only, with a fixed
// accumulation order inside each element, so results are bitwise identical
// to the serial references in kern::serial for any thread count.

// C(m x n) = A(m x k) * B(k x n); row-major. acc adds into C.
void matmul(const double* a, const double* b, double* c, long m, long k, long n,
            bool acc = false);
// C(m x n) = A^T * B with A stored k x m.
void matmul_at_b(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc = false);
// C(m x n) = A * B^T with B stored n x k.
void matmul_a_bt(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc = false);

struct Conv2dShape {
    long in_c = 0, in_h = 0, in_w = 0;
    long out_c = 0, kh = 0, kw = 0;
    long stride = 1, pad = 0;

    long out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
    long out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
    long col_rows() const { return in_c * kh * kw; }
    long in_plane() const { return in_c * in_h * in_w; }
    long out_plane() const { return out_c * out_h() * out_w(); }
    long weight_count() const { return out_c * col_rows(); }
};

// cols: (in_c*kh*kw) x (out_h*out_w), one input image (C,H,W).
void im2col(const double* x, const Conv2dShape& s, double* cols);
void col2im_add(const double* cols, const Conv2dShape& s, double* x);

// x: batch x in_c x H x W, w: out_c x (in_c*kh*kw), y: batch x out_c x oh x ow.
void conv2d_forward(const double* x, const double* w, double* y, long batch,
                    const Conv2dShape& s);
void conv2d_backward_input(const double* w, const double* dy, double* dx, long batch,
                           const Conv2dShape& s);
// Adds into dw; per-image contributions are reduced in a fixed block order.
void conv2d_backward_weight(const double* x, const double* dy, double* dw, long batch,
                            const Conv2dShape& s);

// Batch-norm statistics and transform over n x c x hw (biased variance).
void bn_batch_stats(const double* x, long n, long c, long hw, double* mean, double* var);
void bn_normalize(const double* x, const double* mean, const double* var,
                  const double* gamma, const double* beta, double eps, double* y,
                  long n, long c, long hw);
// Backward through normalization with batch statistics.
void bn_backward_batch(const double* x, const double* mean, const double* var,
                       const double* gamma, double eps, const double* dy, double* dx,
                       double* dgamma, double* dbeta, long n, long c, long hw);
// Backward when the statistics were frozen inputs (eval under running stats).
void bn_backward_frozen(const double* x, const double* mean, const double* var,
                        const double* gamma, double eps, const double* dy, double* dx,
                        double* dgamma, double* dbeta, long n, long c, long hw);

// Max pooling; padded cells never win. arg stores the flat input-plane index
// of each maximum (first-in-scan-order on ties).
void maxpool_forward(const double* x, long n, long c, long h, long w, long kh, long kw,
                     long stride, long pad, double* y, long* arg);
void maxpool_backward(const double* dy, const long* arg, long n, long c, long out_hw,
                      long in_hw, double* dx);

void global_avgpool_forward(const double* x, long n, long c, long hw, double* y);
void global_avgpool_backward(const double* dy, long n, long c, long hw, double* dx);

// Images are H x W x C. Half-pixel-center bilinear; weights sum to one, so
// constants are preserved and same-size resize is the identity.
void resize_bilinear_hwc(const double* src, long sh, long sw, long c, double* dst,
                         long dh, long dw);
// times: quarter-turns counter-clockwise (0..3). dst holds h x w swapped for odd times.
void rotate90_hwc(const double* src, long h, long w, long c, int times, double* dst);

namespace serial {
void matmul(const double* a, const double* b, double* c, long m, long k, long n,
            bool acc = false);
void matmul_at_b(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc = false);
void matmul_a_bt(const double* a, const double* b, double* c, long m, long k, long n,
                 bool acc = false);
// Direct nested-loop convolution; the oracle for the im2col path.
void conv2d_forward(const double* x, const double* w, double* y, long batch,
                    const Conv2dShape& s);
void bn_batch_stats(const double* x, long n, long c, long hw, double* mean, double* var);
void bn_normalize(const double* x, const double* mean, const double* var,
                  const double* gamma, const double* beta, double eps, double* y,
                  long n, long c, long hw);
void maxpool_forward(const double* x, long n, long c, long h, long w, long kh, long kw,
                     long stride, long pad, double* y, long* arg);
void global_avgpool_forward(const double* x, long n, long c, long hw, double* y);
void resize_bilinear_hwc(const double* src, long sh, long sw, long c, double* dst,
                         long dh, long dw);
void rotate90_hwc(const double* src, long h, long w, long c, int times, double* dst);
}  // namespace serial

}  // namespace fewshot::kern
