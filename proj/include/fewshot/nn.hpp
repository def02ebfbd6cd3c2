#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fewshot/kernels.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/tensor.hpp"

namespace fewshot::nn {

enum class BnPolicy { running_stats, per_batch };

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

struct BufferRef {
    std::string name;
    Tensor* value;
};

// Layers cache what their backward needs during forward(); a forward/backward
// pair must therefore not interleave with another forward on the same
// instance. infer() is the stateless, const path used for concurrent
// evaluation.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train, Rng* rng) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual Tensor infer(const Tensor& x) const = 0;
    virtual void init_params(Rng& /*rng*/) {}
    virtual void collect(const std::string& /*prefix*/, std::vector<ParamRef>& /*params*/,
                         std::vector<BufferRef>& /*buffers*/) {}
};

class Conv2d : public Layer {
public:
    Conv2d(long in_c, long out_c, long kernel, long stride, long pad);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;
    void init_params(Rng& rng) override;  // He-normal, fan-in
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<BufferRef>& buffers) override;

    Tensor weight;  // out_c x (in_c * k * k)
    Tensor wgrad;

private:
    kern::Conv2dShape shape_for(const Tensor& x) const;
    long in_c_, out_c_, kernel_, stride_, pad_;
    Tensor x_;
    kern::Conv2dShape cached_;
    long cached_batch_ = 0;
};

class BatchNorm2d : public Layer {
public:
    BatchNorm2d(long channels, BnPolicy policy, double eps = 1e-5, double momentum = 0.1);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;
    void init_params(Rng& rng) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<BufferRef>& buffers) override;

    BnPolicy policy() const { return policy_; }

    Tensor gamma, beta, ggrad, bgrad;
    Tensor running_mean, running_var;

private:
    long channels_;
    BnPolicy policy_;
    double eps_, momentum_;
    Tensor x_, mean_, var_;
    bool used_batch_stats_ = false;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;

private:
    Tensor x_;
};

class MaxPool2d : public Layer {
public:
    MaxPool2d(long kernel, long stride, long pad);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;

private:
    long kernel_, stride_, pad_;
    std::vector<long> arg_;
    std::vector<long> in_shape_;
    long out_hw_ = 0;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;

private:
    std::vector<long> in_shape_;
};

class Flatten : public Layer {
public:
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;

private:
    std::vector<long> in_shape_;
};

class Linear : public Layer {
public:
    Linear(long in_features, long out_features, bool bias = true);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;
    void init_params(Rng& rng) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<BufferRef>& buffers) override;

    long in_features() const { return in_; }
    long out_features() const { return out_; }

    Tensor weight;  // out x in
    Tensor bias;
    Tensor wgrad, bgrad;

private:
    long in_, out_;
    bool has_bias_;
    Tensor x_;
};

// Inverted dropout: scales kept activations by 1/(1-p) in train mode so eval
// is the identity. Train-mode forward draws the mask from the given rng.
class Dropout : public Layer {
public:
    explicit Dropout(double p);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;

private:
    double p_;
    std::vector<double> mask_;
    bool masked_ = false;
};

class Sequential : public Layer {
public:
    Sequential() = default;
    Sequential& add(const std::string& name, std::unique_ptr<Layer> layer);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;
    void init_params(Rng& rng) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<BufferRef>& buffers) override;

    size_t size() const { return layers_.size(); }
    Layer* at(size_t i) { return layers_[i].get(); }

private:
    std::vector<std::string> names_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

// ResNet residual unit: conv-bn-relu-conv-bn plus identity (or a strided
// 1x1 conv-bn projection), ReLU after the sum.
class BasicBlock : public Layer {
public:
    BasicBlock(long in_c, long out_c, long stride, BnPolicy policy);
    Tensor forward(const Tensor& x, bool train, Rng* rng) override;
    Tensor backward(const Tensor& dy) override;
    Tensor infer(const Tensor& x) const override;
    void init_params(Rng& rng) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<BufferRef>& buffers) override;

private:
    Sequential main_;
    std::unique_ptr<Sequential> shortcut_;
    Tensor sum_;  // pre-ReLU sum cached for backward
};

void zero_grads(const std::vector<ParamRef>& params);

}  // namespace fewshot::nn
