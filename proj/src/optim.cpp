#include "fewshot/optim.hpp"

#include <cmath>

namespace fewshot {

Adam::Adam(std::vector<nn::ParamRef> params, double lr, double weight_decay, double beta1,
           double beta2, double eps)
    : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2),
      eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.value->shape);
        v_.emplace_back(p.value->shape);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        double* w = params_[pi].value->ptr();
        const double* g = params_[pi].grad->ptr();
        double* m = m_[pi].ptr();
        double* v = v_[pi].ptr();
        const long n = params_[pi].value->numel();
#pragma omp parallel for schedule(static) if (n > 65536)
        for (long i = 0; i < n; ++i) {
            const double grad = g[i] + wd_ * w[i];
            m[i] = b1_ * m[i] + (1.0 - b1_) * grad;
            v[i] = b2_ * v[i] + (1.0 - b2_) * grad * grad;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() { nn::zero_grads(params_); }

}  // namespace fewshot
