#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "fewshot/model.hpp"
#include "fewshot/objectives.hpp"
#include "fewshot/optim.hpp"

using namespace fewshot;

namespace {

Tensor random_tensor(std::vector<long> shape, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform_range(-scale, scale);
    return t;
}

// Central-difference check of d(loss)/d(params) against accumulated grads.
// loss_fn must be deterministic and must not touch the grads.
struct GradCheck {
    double max_rel_err = 0.0;
    long checked = 0;
};

GradCheck grad_check(std::vector<nn::ParamRef> params, const std::function<double()>& loss_fn,
                     const std::function<void()>& backward_fn, long samples,
                     uint64_t seed) {
    nn::zero_grads(params);
    backward_fn();

    std::vector<std::pair<size_t, long>> coords;
    for (size_t pi = 0; pi < params.size(); ++pi)
        for (long i = 0; i < params[pi].value->numel(); ++i) coords.push_back({pi, i});
    Rng rng(seed);
    GradCheck result;
    for (long s = 0; s < samples; ++s) {
        const auto [pi, i] = coords[static_cast<size_t>(
            rng.uniform_index(static_cast<long>(coords.size())))];
        double& theta = params[pi].value->at(i);
        const double analytic = params[pi].grad->at(i);
        const double saved = theta;
        const double h = 1e-5 * std::max(1.0, std::abs(saved));
        theta = saved + h;
        const double up = loss_fn();
        theta = saved - h;
        const double down = loss_fn();
        theta = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({1e-8, std::abs(analytic), std::abs(numeric)});
        result.max_rel_err = std::max(result.max_rel_err,
                                      std::abs(analytic - numeric) / denom);
        ++result.checked;
    }
    return result;
}

BackboneConfig tiny_config(nn::BnPolicy policy = nn::BnPolicy::per_batch) {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::small_conv;
    cfg.embed_dim = 8;
    cfg.width = 2;
    cfg.bn_policy = policy;
    return cfg;
}

}  // namespace

TEST_CASE("embed: per-batch BN makes duplicated rows identical") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, false, 0, false, 0, false);
    Rng init(1);
    m.init(init);

    Tensor one = random_tensor({1, 3, 16, 16}, 2, 0.5);
    Tensor two({2, 3, 16, 16});
    std::copy(one.data.begin(), one.data.end(), two.data.begin());
    std::copy(one.data.begin(), one.data.end(), two.data.begin() + one.numel());

    Tensor emb = embed_forward(m, two, true, nullptr);
    REQUIRE(emb.dim(0) == 2);
    REQUIRE(emb.dim(1) == cfg.embed_dim);
    for (long j = 0; j < cfg.embed_dim; ++j)
        CHECK(emb.at(0, j) == doctest::Approx(emb.at(1, j)).epsilon(1e-12));
}

TEST_CASE("embed: output shape for any batch size") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, false, 0, false, 0, false);
    Rng init(3);
    m.init(init);
    for (long b : {1L, 3L, 7L}) {
        Tensor x = random_tensor({b, 3, 16, 16}, 10 + static_cast<uint64_t>(b), 0.5);
        Tensor emb = embed_infer(m, x);
        CHECK(emb.dim(0) == b);
        CHECK(emb.dim(1) == cfg.embed_dim);
    }
    Tensor bad = random_tensor({2, 3, 16, 12}, 20, 0.5);
    CHECK_NOTHROW(embed_infer(m, bad));  // rectangular is fine; mixed sizes are not
}

TEST_CASE("embed: frozen running stats make eval independent of batch composition") {
    BackboneConfig cfg = tiny_config(nn::BnPolicy::running_stats);
    ModelBundle m = make_bundle(cfg, false, 0, false, 0, false);
    Rng init(4);
    m.init(init);

    // a couple of train-mode forwards to move the running stats off init
    for (uint64_t s = 0; s < 3; ++s) {
        Tensor batch = random_tensor({6, 3, 16, 16}, 30 + s, 0.5);
        embed_forward(m, batch, true, nullptr);
    }

    Tensor a = random_tensor({1, 3, 16, 16}, 40, 0.5);
    Tensor b = random_tensor({1, 3, 16, 16}, 41, 0.5);
    Tensor both({2, 3, 16, 16});
    std::copy(a.data.begin(), a.data.end(), both.data.begin());
    std::copy(b.data.begin(), b.data.end(), both.data.begin() + a.numel());

    Tensor single = embed_infer(m, a);
    Tensor batched = embed_infer(m, both);
    for (long j = 0; j < cfg.embed_dim; ++j)
        CHECK(single.at(0, j) == doctest::Approx(batched.at(0, j)).epsilon(1e-12));
}

TEST_CASE("per-batch policy leaves running-statistic buffers at initialization") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, false, 0, false, 0, false);
    Rng init(5);
    m.init(init);
    for (uint64_t s = 0; s < 4; ++s)
        embed_forward(m, random_tensor({5, 3, 16, 16}, 50 + s, 0.5), true, nullptr);
    for (const auto& buf : m.buffers()) {
        const bool is_mean = buf.name.find("mean") != std::string::npos;
        for (double v : buf.value->data) CHECK(v == (is_mean ? 0.0 : 1.0));
    }
}

TEST_CASE("jigsaw head dims follow the paper for a 512-d backbone") {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::small_conv;
    cfg.embed_dim = 512;
    cfg.width = 2;
    ModelBundle m = make_bundle(cfg, false, 0, true, 35, false);
    auto* fc1 = dynamic_cast<nn::Linear*>(m.jigsaw_head->at(0));
    auto* fc2 = dynamic_cast<nn::Linear*>(m.jigsaw_head->at(2));
    REQUIRE(fc1 != nullptr);
    REQUIRE(fc2 != nullptr);
    CHECK(fc1->in_features() == 4608);   // 9 x 512
    CHECK(fc1->out_features() == 4096);  // paper projection
    CHECK(fc2->in_features() == 4096);
    CHECK(fc2->out_features() == 35);
    CHECK(m.projection->in_features() == 512);
    CHECK(m.projection->out_features() == 512);
}

TEST_CASE("jigsaw_forward: logits shape, finiteness, batch equivariance") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, false, 0, true, 35, false);
    Rng init(6);
    m.init(init);

    const long batch = 3;
    Tensor tiles = random_tensor({batch * 9, 3, 16, 16}, 60, 0.5);
    Tensor logits = jigsaw_forward(m, tiles, false, nullptr);
    REQUIRE(logits.dim(0) == batch);
    REQUIRE(logits.dim(1) == 35);
    for (double v : logits.data) CHECK(std::isfinite(v));

    // swap samples 0 and 2 -> rows 0 and 2 swap
    Tensor swapped(tiles.shape);
    const long plane = 3 * 16 * 16;
    auto copy_sample = [&](long from, long to) {
        std::copy(tiles.ptr() + from * 9 * plane, tiles.ptr() + (from + 1) * 9 * plane,
                  swapped.ptr() + to * 9 * plane);
    };
    copy_sample(0, 2);
    copy_sample(1, 1);
    copy_sample(2, 0);
    Tensor logits2 = jigsaw_forward(m, swapped, false, nullptr);
    for (long j = 0; j < 35; ++j) {
        CHECK(logits2.at(0, j) == doctest::Approx(logits.at(2, j)).epsilon(1e-9));
        CHECK(logits2.at(2, j) == doctest::Approx(logits.at(0, j)).epsilon(1e-9));
    }

    Tensor bad = random_tensor({10, 3, 16, 16}, 61, 0.5);  // not a multiple of 9
    CHECK_THROWS(jigsaw_forward(m, bad, false, nullptr));
}

TEST_CASE("rotation_forward: shape, eval determinism, train-mode dropout noise") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, false, 0, false, 0, true);
    Rng init(7);
    m.init(init);

    Tensor x = random_tensor({4, 3, 16, 16}, 70, 0.5);
    Tensor a = rotation_forward(m, x, false, nullptr);
    Tensor b = rotation_forward(m, x, false, nullptr);
    REQUIRE(a.dim(0) == 4);
    REQUIRE(a.dim(1) == 4);
    CHECK(a.data == b.data);

    Rng drop1(100), drop2(200);
    Tensor t1 = rotation_forward(m, x, true, &drop1);
    Tensor t2 = rotation_forward(m, x, true, &drop2);
    bool any_diff = false;
    for (long i = 0; i < t1.numel(); ++i)
        if (t1.at(i) != t2.at(i)) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("supervised_forward: shape, degenerate uniform head, argmax shift invariance") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, true, 6, false, 0, false);
    Rng init(8);
    m.init(init);

    Tensor x = random_tensor({3, 3, 16, 16}, 80, 0.5);
    Tensor logits = supervised_forward(m, x, false, nullptr);
    REQUIRE(logits.dim(0) == 3);
    REQUIRE(logits.dim(1) == 6);

    // zero-weight head -> all-zero logits -> uniform loss ln C
    m.supervised_head->weight.fill(0.0);
    m.supervised_head->bias.fill(0.0);
    Tensor zero_logits = supervised_forward(m, x, false, nullptr);
    for (double v : zero_logits.data) CHECK(v == 0.0);
    CeResult ce = cross_entropy_with_grad(zero_logits, {0, 1, 2});
    CHECK(ce.loss == doctest::Approx(std::log(6.0)));

    // adding a constant to every logit leaves argmax unchanged
    Rng init2(9);
    m.init(init2);
    Tensor base = supervised_forward(m, x, false, nullptr);
    Tensor shifted = base;
    for (double& v : shifted.data) v += 3.25;
    for (long i = 0; i < base.dim(0); ++i) {
        long arg_a = 0, arg_b = 0;
        for (long j = 1; j < base.dim(1); ++j) {
            if (base.at(i, j) > base.at(i, arg_a)) arg_a = j;
            if (shifted.at(i, j) > shifted.at(i, arg_b)) arg_b = j;
        }
        CHECK(arg_a == arg_b);
    }

    ModelBundle episodic = make_bundle(cfg, false, 0, false, 0, false);
    Rng init3(10);
    episodic.init(init3);
    CHECK_THROWS(supervised_forward(episodic, x, false, nullptr));
}

TEST_CASE("backbone is shared: a jigsaw-only step moves supervised embeddings") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, false, 0, true, 12, false);
    Rng init(11);
    m.init(init);
    Adam adam(m.params(), 1e-3);

    Tensor probe = random_tensor({1, 3, 16, 16}, 110, 0.5);
    Tensor before = embed_infer(m, probe);

    adam.zero_grad();
    Tensor tiles = random_tensor({2 * 9, 3, 16, 16}, 111, 0.5);
    Tensor logits = jigsaw_forward(m, tiles, true, nullptr);
    CeResult ce = jigsaw_loss(logits, {3, 7});
    jigsaw_backward(m, ce.dlogits);
    adam.step();

    Tensor after = embed_infer(m, probe);
    double diff = 0.0;
    for (long i = 0; i < before.numel(); ++i) diff += std::abs(after.at(i) - before.at(i));
    CHECK(diff > 1e-8);
}

TEST_CASE("paper_resnet18 backbone: embedding shape and parameter naming") {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::paper_resnet18;
    cfg.embed_dim = 512;
    cfg.bn_policy = nn::BnPolicy::per_batch;
    ModelBundle m = make_bundle(cfg, false, 0, false, 0, false);
    Rng init(12);
    m.init(init);

    Tensor x = random_tensor({2, 3, 64, 64}, 120, 0.5);
    Tensor emb = embed_infer(m, x);
    CHECK(emb.dim(0) == 2);
    CHECK(emb.dim(1) == 512);
    for (double v : emb.data) CHECK(std::isfinite(v));

    auto params = m.params();
    std::set<std::string> names;
    for (const auto& p : params) CHECK(names.insert(p.name).second);
    CHECK(params.size() == 60);  // 17+3 convs plus a gamma/beta pair per BN
}

TEST_CASE("gradient check: conv/bn/relu/pool/linear stack at float64") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, true, 4, false, 0, false);
    Rng init(13);
    m.init(init);

    Tensor x = random_tensor({3, 3, 16, 16}, 130, 0.5);
    const std::vector<long> targets{0, 2, 3};

    auto loss_fn = [&]() {
        ModelBundle& mm = m;
        Tensor logits = supervised_forward(mm, x, true, nullptr);
        return cross_entropy(logits, targets);
    };
    auto backward_fn = [&]() {
        Tensor logits = supervised_forward(m, x, true, nullptr);
        CeResult ce = cross_entropy_with_grad(logits, targets);
        supervised_backward(m, ce.dlogits);
    };

    GradCheck gc = grad_check(m.params(), loss_fn, backward_fn, 120, 999);
    CHECK(gc.checked >= 100);
    CHECK(gc.max_rel_err < 1e-5);
}

TEST_CASE("gradient check: prototype loss through the backbone") {
    BackboneConfig cfg = tiny_config();
    ModelBundle m = make_bundle(cfg, false, 0, false, 0, false);
    Rng init(14);
    m.init(init);

    const long n_way = 2, k_shot = 2, m_query = 2;
    Tensor x = random_tensor({n_way * (k_shot + m_query), 3, 16, 16}, 140, 0.5);
    std::vector<long> slabels{0, 0, 1, 1}, qlabels{0, 0, 1, 1};
    const long nk = n_way * k_shot, nm = n_way * m_query;

    auto split_loss = [&](bool with_grad) {
        Tensor emb = embed_forward(m, x, true, nullptr);
        const long d = emb.dim(1);
        Tensor support({nk, d}), query({nm, d});
        std::copy(emb.ptr(), emb.ptr() + nk * d, support.ptr());
        std::copy(emb.ptr() + nk * d, emb.ptr() + (nk + nm) * d, query.ptr());
        ProtoResult res = prototype_loss(support, slabels, query, qlabels, with_grad);
        if (with_grad) {
            Tensor demb({nk + nm, d});
            std::copy(res.dsupport.ptr(), res.dsupport.ptr() + nk * d, demb.ptr());
            std::copy(res.dquery.ptr(), res.dquery.ptr() + nm * d, demb.ptr() + nk * d);
            embed_backward(m, demb);
        }
        return res.loss;
    };

    auto loss_fn = [&]() { return split_loss(false); };
    auto backward_fn = [&]() { split_loss(true); };

    GradCheck gc = grad_check(m.params(), loss_fn, backward_fn, 120, 888);
    CHECK(gc.checked >= 100);
    CHECK(gc.max_rel_err < 1e-5);
}
