#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fewshot/dataset.hpp"
#include "fewshot/nn.hpp"

namespace fewshot {

enum class BackboneKind { small_conv, paper_resnet18 };

struct BackboneConfig {
    BackboneKind kind = BackboneKind::small_conv;
    long embed_dim = 64;   // 512 for paper_resnet18
    long width = 16;       // first-block channels for small_conv
    nn::BnPolicy bn_policy = nn::BnPolicy::per_batch;
};

// Shared backbone f plus the heads named by the training configuration.
// The supervised/prototype path reads raw backbone embeddings; the
// self-supervised branches go through the extra projection layer first.
struct ModelBundle {
    BackboneConfig cfg;
    std::unique_ptr<nn::Sequential> backbone;
    std::unique_ptr<nn::Linear> supervised_head;     // softmax training only
    std::unique_ptr<nn::Linear> projection;          // embed_dim -> embed_dim
    std::unique_ptr<nn::Sequential> jigsaw_head;
    std::unique_ptr<nn::Sequential> rotation_head;
    long num_classes = 0;
    long perm_count = 0;

    std::vector<nn::ParamRef> params();
    std::vector<nn::BufferRef> buffers();
    void init(Rng& rng);
};

std::unique_ptr<nn::Sequential> build_backbone(const BackboneConfig& cfg);

long jigsaw_hidden_dim(const BackboneConfig& cfg);

ModelBundle make_bundle(const BackboneConfig& cfg, bool with_supervised_head,
                        long num_classes, bool with_jigsaw, long perm_count,
                        bool with_rotation);

// Batch of images (all H x W x C with identical dims) -> N x C x H x W.
Tensor to_nchw(const std::vector<const ImageTensor*>& images);
Tensor to_nchw(const std::vector<LabeledImage>& images);

// Cached forwards (paired with the matching backward); one pair at a time
// per bundle.
Tensor embed_forward(ModelBundle& m, const Tensor& nchw, bool train, Rng* rng);
// Returns the gradient w.r.t. the input batch.
Tensor embed_backward(ModelBundle& m, const Tensor& dembed);

Tensor supervised_forward(ModelBundle& m, const Tensor& nchw, bool train, Rng* rng);
Tensor supervised_backward(ModelBundle& m, const Tensor& dlogits);

// tiles: (9 * batch) x C x H x W, sample-major (sample i owns rows 9i..9i+8).
Tensor jigsaw_forward(ModelBundle& m, const Tensor& tiles, bool train, Rng* rng);
void jigsaw_backward(ModelBundle& m, const Tensor& dlogits);

Tensor rotation_forward(ModelBundle& m, const Tensor& nchw, bool train, Rng* rng);
void rotation_backward(ModelBundle& m, const Tensor& dlogits);

// Stateless eval-mode forwards, safe to call concurrently.
Tensor embed_infer(const ModelBundle& m, const Tensor& nchw);
Tensor supervised_infer(const ModelBundle& m, const Tensor& nchw);

Tensor tiles_to_nchw(const std::vector<JigsawSample>& samples);

}  // namespace fewshot
