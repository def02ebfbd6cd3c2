#pragma once

#include <vector>

#include "fewshot/tensor.hpp"

namespace fewshot {

struct CeResult {
    double loss = 0.0;
    double accuracy = 0.0;
    Tensor dlogits;  // d(mean loss)/d(logits), scaled by 1/batch
};

// Mean over the batch of -log softmax(logits)[target], max-stabilized.
// Argmax ties break to the lowest index.
CeResult cross_entropy_with_grad(const Tensor& logits, const std::vector<long>& targets);
double cross_entropy(const Tensor& logits, const std::vector<long>& targets);

// Per-class arithmetic means of support embeddings; labels are local 0..N-1.
Tensor class_prototypes(const Tensor& support, const std::vector<long>& labels,
                        long n_way);

struct ProtoResult {
    double loss = 0.0;
    double accuracy = 0.0;
    Tensor prototypes;  // N x D
    Tensor logits;      // Q x N, negative squared Euclidean distance
    Tensor dsupport;    // NK x D
    Tensor dquery;      // NM x D
};

// Prototypical episodic loss: query logits are negative squared distances to
// the class prototypes, loss is cross-entropy over those logits.
ProtoResult prototype_loss(const Tensor& support, const std::vector<long>& support_labels,
                           const Tensor& query, const std::vector<long>& query_labels,
                           bool with_grad = true);

CeResult jigsaw_loss(const Tensor& logits, const std::vector<long>& perm_indices);
CeResult rotation_loss(const Tensor& logits, const std::vector<long>& angle_indices);

// Equal-weight sum; throws on non-finite inputs so training halts loudly.
double combine(double supervised, double self_supervised);

}  // namespace fewshot
