#include "fewshot/nn.hpp"

#include <cmath>

#include "fewshot/common.hpp"

namespace fewshot::nn {

namespace {

void check_4d(const Tensor& x, const char* who) {
    check_arg(x.ndim() == 4, cat(who, ": expected N x C x H x W input"));
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(long in_c, long out_c, long kernel, long stride, long pad)
    : weight({out_c, in_c * kernel * kernel}),
      wgrad({out_c, in_c * kernel * kernel}),
      in_c_(in_c),
      out_c_(out_c),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {}

kern::Conv2dShape Conv2d::shape_for(const Tensor& x) const {
    check_4d(x, "Conv2d");
    check_arg(x.dim(1) == in_c_, "Conv2d: channel mismatch");
    kern::Conv2dShape s;
    s.in_c = in_c_;
    s.in_h = x.dim(2);
    s.in_w = x.dim(3);
    s.out_c = out_c_;
    s.kh = s.kw = kernel_;
    s.stride = stride_;
    s.pad = pad_;
    check_arg(s.out_h() >= 1 && s.out_w() >= 1, "Conv2d: input smaller than kernel");
    return s;
}

Tensor Conv2d::forward(const Tensor& x, bool /*train*/, Rng* /*rng*/) {
    cached_ = shape_for(x);
    cached_batch_ = x.dim(0);
    x_ = x;
    Tensor y({cached_batch_, out_c_, cached_.out_h(), cached_.out_w()});
    kern::conv2d_forward(x.ptr(), weight.ptr(), y.ptr(), cached_batch_, cached_);
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    kern::conv2d_backward_weight(x_.ptr(), dy.ptr(), wgrad.ptr(), cached_batch_, cached_);
    Tensor dx(x_.shape);
    kern::conv2d_backward_input(weight.ptr(), dy.ptr(), dx.ptr(), cached_batch_, cached_);
    return dx;
}

Tensor Conv2d::infer(const Tensor& x) const {
    kern::Conv2dShape s = shape_for(x);
    Tensor y({x.dim(0), out_c_, s.out_h(), s.out_w()});
    kern::conv2d_forward(x.ptr(), weight.ptr(), y.ptr(), x.dim(0), s);
    return y;
}

void Conv2d::init_params(Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(in_c_ * kernel_ * kernel_));
    for (double& v : weight.data) v = rng.normal() * std;
    wgrad.fill(0.0);
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& params,
                     std::vector<BufferRef>&) {
    params.push_back({prefix + ".weight", &weight, &wgrad});
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(long channels, BnPolicy policy, double eps, double momentum)
    : gamma({channels}),
      beta({channels}),
      ggrad({channels}),
      bgrad({channels}),
      running_mean({channels}),
      running_var({channels}),
      channels_(channels),
      policy_(policy),
      eps_(eps),
      momentum_(momentum) {
    gamma.fill(1.0);
    running_var.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train, Rng* /*rng*/) {
    check_4d(x, "BatchNorm2d");
    check_arg(x.dim(1) == channels_, "BatchNorm2d: channel mismatch");
    const long n = x.dim(0), hw = x.dim(2) * x.dim(3);
    x_ = x;
    used_batch_stats_ = (policy_ == BnPolicy::per_batch) || train;
    if (used_batch_stats_) {
        mean_ = Tensor({channels_});
        var_ = Tensor({channels_});
        kern::bn_batch_stats(x.ptr(), n, channels_, hw, mean_.ptr(), var_.ptr());
        if (policy_ == BnPolicy::running_stats && train) {
            const double count = static_cast<double>(n * hw);
            const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
            for (long c = 0; c < channels_; ++c) {
                running_mean.at(c) =
                    (1.0 - momentum_) * running_mean.at(c) + momentum_ * mean_.at(c);
                running_var.at(c) = (1.0 - momentum_) * running_var.at(c) +
                                    momentum_ * var_.at(c) * unbias;
            }
        }
    } else {
        mean_ = running_mean;
        var_ = running_var;
    }
    Tensor y(x.shape);
    kern::bn_normalize(x.ptr(), mean_.ptr(), var_.ptr(), gamma.ptr(), beta.ptr(), eps_,
                       y.ptr(), n, channels_, hw);
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    const long n = x_.dim(0), hw = x_.dim(2) * x_.dim(3);
    Tensor dx(x_.shape);
    if (used_batch_stats_)
        kern::bn_backward_batch(x_.ptr(), mean_.ptr(), var_.ptr(), gamma.ptr(), eps_,
                                dy.ptr(), dx.ptr(), ggrad.ptr(), bgrad.ptr(), n,
                                channels_, hw);
    else
        kern::bn_backward_frozen(x_.ptr(), mean_.ptr(), var_.ptr(), gamma.ptr(), eps_,
                                 dy.ptr(), dx.ptr(), ggrad.ptr(), bgrad.ptr(), n,
                                 channels_, hw);
    return dx;
}

Tensor BatchNorm2d::infer(const Tensor& x) const {
    check_4d(x, "BatchNorm2d");
    const long n = x.dim(0), hw = x.dim(2) * x.dim(3);
    Tensor mean({channels_}), var({channels_});
    if (policy_ == BnPolicy::per_batch) {
        kern::bn_batch_stats(x.ptr(), n, channels_, hw, mean.ptr(), var.ptr());
    } else {
        mean = running_mean;
        var = running_var;
    }
    Tensor y(x.shape);
    kern::bn_normalize(x.ptr(), mean.ptr(), var.ptr(), gamma.ptr(), beta.ptr(), eps_,
                       y.ptr(), n, channels_, hw);
    return y;
}

void BatchNorm2d::init_params(Rng& /*rng*/) {
    gamma.fill(1.0);
    beta.fill(0.0);
    running_mean.fill(0.0);
    running_var.fill(1.0);
    ggrad.fill(0.0);
    bgrad.fill(0.0);
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>& params,
                          std::vector<BufferRef>& buffers) {
    params.push_back({prefix + ".gamma", &gamma, &ggrad});
    params.push_back({prefix + ".beta", &beta, &bgrad});
    buffers.push_back({prefix + ".running_mean", &running_mean});
    buffers.push_back({prefix + ".running_var", &running_var});
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, bool /*train*/, Rng* /*rng*/) {
    x_ = x;
    Tensor y(x.shape);
    const long n = x.numel();
    const double* src = x.ptr();
    double* dst = y.ptr();
#pragma omp parallel for schedule(static) if (n > 65536)
    for (long i = 0; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx(dy.shape);
    const long n = dy.numel();
    const double* g = dy.ptr();
    const double* src = x_.ptr();
    double* dst = dx.ptr();
#pragma omp parallel for schedule(static) if (n > 65536)
    for (long i = 0; i < n; ++i) dst[i] = src[i] > 0.0 ? g[i] : 0.0;
    return dx;
}

Tensor ReLU::infer(const Tensor& x) const {
    Tensor y(x.shape);
    const long n = x.numel();
    const double* src = x.ptr();
    double* dst = y.ptr();
    for (long i = 0; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
    return y;
}

// ------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(long kernel, long stride, long pad)
    : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool /*train*/, Rng* /*rng*/) {
    check_4d(x, "MaxPool2d");
    const long n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const long oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
    const long ow = (w + 2 * pad_ - kernel_) / stride_ + 1;
    check_arg(oh >= 1 && ow >= 1, "MaxPool2d: input smaller than kernel");
    Tensor y({n, c, oh, ow});
    arg_.assign(static_cast<size_t>(n * c * oh * ow), -1);
    kern::maxpool_forward(x.ptr(), n, c, h, w, kernel_, kernel_, stride_, pad_, y.ptr(),
                          arg_.data());
    in_shape_ = x.shape;
    out_hw_ = oh * ow;
    return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
    Tensor dx(in_shape_);
    kern::maxpool_backward(dy.ptr(), arg_.data(), in_shape_[0], in_shape_[1], out_hw_,
                           in_shape_[2] * in_shape_[3], dx.ptr());
    return dx;
}

Tensor MaxPool2d::infer(const Tensor& x) const {
    check_4d(x, "MaxPool2d");
    const long n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const long oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
    const long ow = (w + 2 * pad_ - kernel_) / stride_ + 1;
    Tensor y({n, c, oh, ow});
    std::vector<long> arg(static_cast<size_t>(n * c * oh * ow));
    kern::maxpool_forward(x.ptr(), n, c, h, w, kernel_, kernel_, stride_, pad_, y.ptr(),
                          arg.data());
    return y;
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool /*train*/, Rng* /*rng*/) {
    check_4d(x, "GlobalAvgPool");
    in_shape_ = x.shape;
    Tensor y({x.dim(0), x.dim(1)});
    kern::global_avgpool_forward(x.ptr(), x.dim(0), x.dim(1), x.dim(2) * x.dim(3),
                                 y.ptr());
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    Tensor dx(in_shape_);
    kern::global_avgpool_backward(dy.ptr(), in_shape_[0], in_shape_[1],
                                  in_shape_[2] * in_shape_[3], dx.ptr());
    return dx;
}

Tensor GlobalAvgPool::infer(const Tensor& x) const {
    Tensor y({x.dim(0), x.dim(1)});
    kern::global_avgpool_forward(x.ptr(), x.dim(0), x.dim(1), x.dim(2) * x.dim(3),
                                 y.ptr());
    return y;
}

// ---------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x, bool /*train*/, Rng* /*rng*/) {
    in_shape_ = x.shape;
    Tensor y = x;
    y.reshape({x.dim(0), x.numel() / x.dim(0)});
    return y;
}

Tensor Flatten::backward(const Tensor& dy) {
    Tensor dx = dy;
    dx.reshape(in_shape_);
    return dx;
}

Tensor Flatten::infer(const Tensor& x) const {
    Tensor y = x;
    y.reshape({x.dim(0), x.numel() / x.dim(0)});
    return y;
}

// ----------------------------------------------------------------- Linear

Linear::Linear(long in_features, long out_features, bool bias_term)
    : weight({out_features, in_features}),
      bias({bias_term ? out_features : 0}),
      wgrad({out_features, in_features}),
      bgrad({bias_term ? out_features : 0}),
      in_(in_features),
      out_(out_features),
      has_bias_(bias_term) {}

Tensor Linear::forward(const Tensor& x, bool /*train*/, Rng* /*rng*/) {
    check_arg(x.ndim() == 2 && x.dim(1) == in_, "Linear: bad input shape");
    x_ = x;
    const long b = x.dim(0);
    Tensor y({b, out_});
    kern::matmul_a_bt(x.ptr(), weight.ptr(), y.ptr(), b, in_, out_);
    if (has_bias_)
        for (long i = 0; i < b; ++i)
            for (long j = 0; j < out_; ++j) y.at(i, j) += bias.at(j);
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    const long b = x_.dim(0);
    // dW += dy^T x ; db += column sums ; dx = dy W
    kern::matmul_at_b(dy.ptr(), x_.ptr(), wgrad.ptr(), out_, b, in_, true);
    if (has_bias_)
        for (long j = 0; j < out_; ++j) {
            double sum = 0.0;
            for (long i = 0; i < b; ++i) sum += dy.at(i, j);
            bgrad.at(j) += sum;
        }
    Tensor dx({b, in_});
    kern::matmul(dy.ptr(), weight.ptr(), dx.ptr(), b, out_, in_);
    return dx;
}

Tensor Linear::infer(const Tensor& x) const {
    check_arg(x.ndim() == 2 && x.dim(1) == in_, "Linear: bad input shape");
    const long b = x.dim(0);
    Tensor y({b, out_});
    kern::matmul_a_bt(x.ptr(), weight.ptr(), y.ptr(), b, in_, out_);
    if (has_bias_)
        for (long i = 0; i < b; ++i)
            for (long j = 0; j < out_; ++j) y.at(i, j) += bias.at(j);
    return y;
}

void Linear::init_params(Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(in_));
    for (double& v : weight.data) v = rng.normal() * std;
    bias.fill(0.0);
    wgrad.fill(0.0);
    bgrad.fill(0.0);
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& params,
                     std::vector<BufferRef>&) {
    params.push_back({prefix + ".weight", &weight, &wgrad});
    if (has_bias_) params.push_back({prefix + ".bias", &bias, &bgrad});
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double p) : p_(p) {
    check_arg(p >= 0.0 && p < 1.0, "Dropout: p must be in [0,1)");
}

Tensor Dropout::forward(const Tensor& x, bool train, Rng* rng) {
    if (!train || p_ == 0.0) {
        masked_ = false;
        return x;
    }
    check_arg(rng != nullptr, "Dropout: train-mode forward needs an rng");
    const long n = x.numel();
    mask_.resize(static_cast<size_t>(n));
    const double scale = 1.0 / (1.0 - p_);
    Tensor y(x.shape);
    for (long i = 0; i < n; ++i) {
        mask_[static_cast<size_t>(i)] = rng->bernoulli(1.0 - p_) ? scale : 0.0;
        y.at(i) = x.at(i) * mask_[static_cast<size_t>(i)];
    }
    masked_ = true;
    return y;
}

Tensor Dropout::backward(const Tensor& dy) {
    if (!masked_) return dy;
    Tensor dx(dy.shape);
    for (long i = 0; i < dy.numel(); ++i) dx.at(i) = dy.at(i) * mask_[static_cast<size_t>(i)];
    return dx;
}

Tensor Dropout::infer(const Tensor& x) const { return x; }

// ------------------------------------------------------------- Sequential

Sequential& Sequential::add(const std::string& name, std::unique_ptr<Layer> layer) {
    names_.push_back(name);
    layers_.push_back(std::move(layer));
    return *this;
}

Tensor Sequential::forward(const Tensor& x, bool train, Rng* rng) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur, train, rng);
    return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
    Tensor cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        cur = (*it)->backward(cur);
    return cur;
}

Tensor Sequential::infer(const Tensor& x) const {
    Tensor cur = x;
    for (const auto& layer : layers_) cur = layer->infer(cur);
    return cur;
}

void Sequential::init_params(Rng& rng) {
    for (auto& layer : layers_) layer->init_params(rng);
}

void Sequential::collect(const std::string& prefix, std::vector<ParamRef>& params,
                         std::vector<BufferRef>& buffers) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect(prefix + "." + names_[i], params, buffers);
}

// ------------------------------------------------------------- BasicBlock

BasicBlock::BasicBlock(long in_c, long out_c, long stride, BnPolicy policy) {
    main_.add("conv1", std::make_unique<Conv2d>(in_c, out_c, 3, stride, 1));
    main_.add("bn1", std::make_unique<BatchNorm2d>(out_c, policy));
    main_.add("relu1", std::make_unique<ReLU>());
    main_.add("conv2", std::make_unique<Conv2d>(out_c, out_c, 3, 1, 1));
    main_.add("bn2", std::make_unique<BatchNorm2d>(out_c, policy));
    if (stride != 1 || in_c != out_c) {
        shortcut_ = std::make_unique<Sequential>();
        shortcut_->add("conv", std::make_unique<Conv2d>(in_c, out_c, 1, stride, 0));
        shortcut_->add("bn", std::make_unique<BatchNorm2d>(out_c, policy));
    }
}

Tensor BasicBlock::forward(const Tensor& x, bool train, Rng* rng) {
    Tensor main_out = main_.forward(x, train, rng);
    Tensor skip = shortcut_ ? shortcut_->forward(x, train, rng) : x;
    sum_ = Tensor(main_out.shape);
    for (long i = 0; i < sum_.numel(); ++i) sum_.at(i) = main_out.at(i) + skip.at(i);
    Tensor y(sum_.shape);
    for (long i = 0; i < y.numel(); ++i) y.at(i) = sum_.at(i) > 0.0 ? sum_.at(i) : 0.0;
    return y;
}

Tensor BasicBlock::backward(const Tensor& dy) {
    Tensor dsum(dy.shape);
    for (long i = 0; i < dy.numel(); ++i)
        dsum.at(i) = sum_.at(i) > 0.0 ? dy.at(i) : 0.0;
    Tensor dx = main_.backward(dsum);
    if (shortcut_) {
        Tensor dskip = shortcut_->backward(dsum);
        for (long i = 0; i < dx.numel(); ++i) dx.at(i) += dskip.at(i);
    } else {
        for (long i = 0; i < dx.numel(); ++i) dx.at(i) += dsum.at(i);
    }
    return dx;
}

Tensor BasicBlock::infer(const Tensor& x) const {
    Tensor main_out = main_.infer(x);
    Tensor skip = shortcut_ ? shortcut_->infer(x) : x;
    Tensor y(main_out.shape);
    for (long i = 0; i < y.numel(); ++i) {
        const double s = main_out.at(i) + skip.at(i);
        y.at(i) = s > 0.0 ? s : 0.0;
    }
    return y;
}

void BasicBlock::init_params(Rng& rng) {
    main_.init_params(rng);
    if (shortcut_) shortcut_->init_params(rng);
}

void BasicBlock::collect(const std::string& prefix, std::vector<ParamRef>& params,
                         std::vector<BufferRef>& buffers) {
    main_.collect(prefix + ".main", params, buffers);
    if (shortcut_) shortcut_->collect(prefix + ".shortcut", params, buffers);
}

void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params) p.grad->fill(0.0);
}

}  // namespace fewshot::nn
