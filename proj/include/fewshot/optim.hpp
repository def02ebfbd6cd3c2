#pragma once

#include <vector>

#include "fewshot/nn.hpp"

namespace fewshot {

// ADAM with optional decoupled-from-nothing plain L2 weight decay folded
// into the gradient.
class Adam {
public:
    explicit Adam(std::vector<nn::ParamRef> params, double lr = 1e-3,
                  double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step();
    void zero_grad();
    long step_count() const { return t_; }

private:
    std::vector<nn::ParamRef> params_;
    std::vector<Tensor> m_, v_;
    double lr_, wd_, b1_, b2_, eps_;
    long t_ = 0;
};

}  // namespace fewshot
