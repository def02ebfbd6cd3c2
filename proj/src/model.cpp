#include "fewshot/model.hpp"

#include "fewshot/common.hpp"

namespace fewshot {

using nn::BatchNorm2d;
using nn::BnPolicy;
using nn::Conv2d;
using nn::Dropout;
using nn::GlobalAvgPool;
using nn::Linear;
using nn::MaxPool2d;
using nn::ReLU;
using nn::Sequential;

namespace {

void add_conv_block(Sequential& seq, const std::string& name, long in_c, long out_c,
                    BnPolicy policy) {
    seq.add(name + "_conv", std::make_unique<Conv2d>(in_c, out_c, 3, 1, 1));
    seq.add(name + "_bn", std::make_unique<BatchNorm2d>(out_c, policy));
    seq.add(name + "_relu", std::make_unique<ReLU>());
    seq.add(name + "_pool", std::make_unique<MaxPool2d>(2, 2, 0));
}

}  // namespace

std::unique_ptr<Sequential> build_backbone(const BackboneConfig& cfg) {
    check_arg(cfg.embed_dim > 0, "backbone: embed_dim must be positive");
    auto seq = std::make_unique<Sequential>();
    if (cfg.kind == BackboneKind::small_conv) {
        check_arg(cfg.width > 0, "backbone: width must be positive");
        add_conv_block(*seq, "block1", 3, cfg.width, cfg.bn_policy);
        add_conv_block(*seq, "block2", cfg.width, 2 * cfg.width, cfg.bn_policy);
        add_conv_block(*seq, "block3", 2 * cfg.width, 4 * cfg.width, cfg.bn_policy);
        add_conv_block(*seq, "block4", 4 * cfg.width, cfg.embed_dim, cfg.bn_policy);
        seq->add("gap", std::make_unique<GlobalAvgPool>());
    } else {
        check_arg(cfg.embed_dim == 512, "paper_resnet18: embed_dim must be 512");
        seq->add("stem_conv", std::make_unique<Conv2d>(3, 64, 7, 2, 3));
        seq->add("stem_bn", std::make_unique<BatchNorm2d>(64, cfg.bn_policy));
        seq->add("stem_relu", std::make_unique<ReLU>());
        seq->add("stem_pool", std::make_unique<MaxPool2d>(3, 2, 1));
        const long chans[4] = {64, 128, 256, 512};
        long in_c = 64;
        for (int stage = 0; stage < 4; ++stage) {
            const long out_c = chans[stage];
            const long stride = stage == 0 ? 1 : 2;
            seq->add(cat("stage", stage + 1, "a"),
                     std::make_unique<nn::BasicBlock>(in_c, out_c, stride, cfg.bn_policy));
            seq->add(cat("stage", stage + 1, "b"),
                     std::make_unique<nn::BasicBlock>(out_c, out_c, 1, cfg.bn_policy));
            in_c = out_c;
        }
        seq->add("gap", std::make_unique<GlobalAvgPool>());
    }
    return seq;
}

long jigsaw_hidden_dim(const BackboneConfig& cfg) {
    // Paper sizes (4608 -> 4096) are verbatim for the 512-dim backbone only.
    return cfg.embed_dim == 512 ? 4096 : 8 * cfg.embed_dim;
}

ModelBundle make_bundle(const BackboneConfig& cfg, bool with_supervised_head,
                        long num_classes, bool with_jigsaw, long perm_count,
                        bool with_rotation) {
    ModelBundle m;
    m.cfg = cfg;
    m.backbone = build_backbone(cfg);
    if (with_supervised_head) {
        check_arg(num_classes >= 1, "make_bundle: supervised head needs num_classes");
        m.supervised_head = std::make_unique<Linear>(cfg.embed_dim, num_classes);
        m.num_classes = num_classes;
    }
    if (with_jigsaw || with_rotation)
        m.projection = std::make_unique<Linear>(cfg.embed_dim, cfg.embed_dim);
    if (with_jigsaw) {
        check_arg(perm_count >= 2, "make_bundle: jigsaw head needs a permutation set");
        m.perm_count = perm_count;
        const long hidden = jigsaw_hidden_dim(cfg);
        auto head = std::make_unique<Sequential>();
        head->add("fc1", std::make_unique<Linear>(9 * cfg.embed_dim, hidden));
        head->add("relu", std::make_unique<ReLU>());
        head->add("fc2", std::make_unique<Linear>(hidden, perm_count));
        m.jigsaw_head = std::move(head);
    }
    if (with_rotation) {
        auto head = std::make_unique<Sequential>();
        head->add("fc1", std::make_unique<Linear>(cfg.embed_dim, 128));
        head->add("relu1", std::make_unique<ReLU>());
        head->add("drop1", std::make_unique<Dropout>(0.5));
        head->add("fc2", std::make_unique<Linear>(128, 128));
        head->add("relu2", std::make_unique<ReLU>());
        head->add("drop2", std::make_unique<Dropout>(0.5));
        head->add("fc3", std::make_unique<Linear>(128, 4));
        m.rotation_head = std::move(head);
    }
    return m;
}

std::vector<nn::ParamRef> ModelBundle::params() {
    std::vector<nn::ParamRef> out;
    std::vector<nn::BufferRef> bufs;
    backbone->collect("backbone", out, bufs);
    if (supervised_head) supervised_head->collect("supervised_head", out, bufs);
    if (projection) projection->collect("projection", out, bufs);
    if (jigsaw_head) jigsaw_head->collect("jigsaw_head", out, bufs);
    if (rotation_head) rotation_head->collect("rotation_head", out, bufs);
    return out;
}

std::vector<nn::BufferRef> ModelBundle::buffers() {
    std::vector<nn::ParamRef> params_unused;
    std::vector<nn::BufferRef> out;
    backbone->collect("backbone", params_unused, out);
    if (supervised_head) supervised_head->collect("supervised_head", params_unused, out);
    if (projection) projection->collect("projection", params_unused, out);
    if (jigsaw_head) jigsaw_head->collect("jigsaw_head", params_unused, out);
    if (rotation_head) rotation_head->collect("rotation_head", params_unused, out);
    return out;
}

void ModelBundle::init(Rng& rng) {
    backbone->init_params(rng);
    if (supervised_head) supervised_head->init_params(rng);
    if (projection) projection->init_params(rng);
    if (jigsaw_head) jigsaw_head->init_params(rng);
    if (rotation_head) rotation_head->init_params(rng);
}

Tensor to_nchw(const std::vector<const ImageTensor*>& images) {
    check_arg(!images.empty(), "to_nchw: empty batch");
    const long h = images[0]->dim(0), w = images[0]->dim(1), c = images[0]->dim(2);
    for (const ImageTensor* img : images)
        check_arg(img->dim(0) == h && img->dim(1) == w && img->dim(2) == c,
                  "to_nchw: mixed image sizes in batch");
    const long n = static_cast<long>(images.size());
    Tensor out({n, c, h, w});
    for (long b = 0; b < n; ++b) {
        const double* src = images[static_cast<size_t>(b)]->ptr();
        double* dst = out.ptr() + b * c * h * w;
        for (long y = 0; y < h; ++y)
            for (long x = 0; x < w; ++x)
                for (long ch = 0; ch < c; ++ch)
                    dst[(ch * h + y) * w + x] = src[(y * w + x) * c + ch];
    }
    return out;
}

Tensor to_nchw(const std::vector<LabeledImage>& images) {
    std::vector<const ImageTensor*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& li : images) ptrs.push_back(&li.image);
    return to_nchw(ptrs);
}

Tensor embed_forward(ModelBundle& m, const Tensor& nchw, bool train, Rng* rng) {
    return m.backbone->forward(nchw, train, rng);
}

Tensor embed_backward(ModelBundle& m, const Tensor& dembed) {
    return m.backbone->backward(dembed);
}

Tensor supervised_forward(ModelBundle& m, const Tensor& nchw, bool train, Rng* rng) {
    check(m.supervised_head != nullptr,
          "supervised_forward: no supervised head in this configuration");
    Tensor emb = embed_forward(m, nchw, train, rng);
    return m.supervised_head->forward(emb, train, rng);
}

Tensor supervised_backward(ModelBundle& m, const Tensor& dlogits) {
    Tensor demb = m.supervised_head->backward(dlogits);
    return embed_backward(m, demb);
}

Tensor jigsaw_forward(ModelBundle& m, const Tensor& tiles, bool train, Rng* rng) {
    check(m.jigsaw_head != nullptr, "jigsaw_forward: no jigsaw head");
    check_arg(tiles.ndim() == 4 && tiles.dim(0) % 9 == 0,
              "jigsaw_forward: tile batch must be 9 per sample");
    const long batch = tiles.dim(0) / 9;
    Tensor emb = m.backbone->forward(tiles, train, rng);   // (9B) x E
    Tensor proj = m.projection->forward(emb, train, rng);  // (9B) x E
    proj.reshape({batch, 9 * m.cfg.embed_dim});
    return m.jigsaw_head->forward(proj, train, rng);  // B x P
}

void jigsaw_backward(ModelBundle& m, const Tensor& dlogits) {
    Tensor dproj = m.jigsaw_head->backward(dlogits);
    dproj.reshape({dlogits.dim(0) * 9, m.cfg.embed_dim});
    Tensor demb = m.projection->backward(dproj);
    m.backbone->backward(demb);
}

Tensor rotation_forward(ModelBundle& m, const Tensor& nchw, bool train, Rng* rng) {
    check(m.rotation_head != nullptr, "rotation_forward: no rotation head");
    Tensor emb = m.backbone->forward(nchw, train, rng);
    Tensor proj = m.projection->forward(emb, train, rng);
    return m.rotation_head->forward(proj, train, rng);
}

void rotation_backward(ModelBundle& m, const Tensor& dlogits) {
    Tensor dproj = m.rotation_head->backward(dlogits);
    Tensor demb = m.projection->backward(dproj);
    m.backbone->backward(demb);
}

Tensor embed_infer(const ModelBundle& m, const Tensor& nchw) {
    return m.backbone->infer(nchw);
}

Tensor supervised_infer(const ModelBundle& m, const Tensor& nchw) {
    check(m.supervised_head != nullptr,
          "supervised_infer: no supervised head in this configuration");
    return m.supervised_head->infer(m.backbone->infer(nchw));
}

Tensor tiles_to_nchw(const std::vector<JigsawSample>& samples) {
    std::vector<const ImageTensor*> ptrs;
    ptrs.reserve(samples.size() * 9);
    for (const auto& s : samples) {
        check_arg(s.tiles.size() == 9, "tiles_to_nchw: sample must hold 9 tiles");
        for (const auto& t : s.tiles) ptrs.push_back(&t);
    }
    return to_nchw(ptrs);
}

}  // namespace fewshot
