#include "fewshot/config.hpp"

#include "fewshot/common.hpp"

namespace fewshot {

using nlohmann::json;

namespace {

template <class T>
T parse_enum(const std::string& v, std::initializer_list<std::pair<const char*, T>> table,
             const char* what) {
    for (const auto& [name, value] : table)
        if (v == name) return value;
    throw std::invalid_argument(cat("config: unknown ", what, " '", v, "'"));
}

}  // namespace

std::string to_string(TrainMode m) { return m == TrainMode::episodic ? "episodic" : "standard"; }
std::string to_string(SslTask t) {
    switch (t) {
        case SslTask::none: return "none";
        case SslTask::jigsaw: return "jigsaw";
        default: return "rotation";
    }
}
std::string to_string(RotationMode m) {
    return m == RotationMode::one_per_image ? "one_per_image" : "all_four";
}
std::string to_string(Degrade d) {
    switch (d) {
        case Degrade::none: return "none";
        case Degrade::greyscale: return "greyscale";
        default: return "lowres";
    }
}
std::string to_string(BackboneKind k) {
    return k == BackboneKind::small_conv ? "small_conv" : "paper_resnet18";
}
std::string to_string(nn::BnPolicy p) {
    return p == nn::BnPolicy::per_batch ? "per_batch" : "running_stats";
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    std::string mode = to_string(cfg.mode), ssl = to_string(cfg.ssl_task);
    std::string rot = to_string(cfg.rotation_mode), deg = to_string(cfg.degrade);
    get("mode", mode);
    get("ssl_task", ssl);
    get("rotation_mode", rot);
    get("degrade", deg);
    cfg.mode = parse_enum<TrainMode>(mode, {{"episodic", TrainMode::episodic},
                                            {"standard", TrainMode::standard}},
                                     "mode");
    cfg.ssl_task = parse_enum<SslTask>(ssl, {{"none", SslTask::none},
                                             {"jigsaw", SslTask::jigsaw},
                                             {"rotation", SslTask::rotation}},
                                       "ssl_task");
    cfg.rotation_mode = parse_enum<RotationMode>(
        rot, {{"one_per_image", RotationMode::one_per_image},
              {"all_four", RotationMode::all_four}},
        "rotation_mode");
    cfg.degrade = parse_enum<Degrade>(deg, {{"none", Degrade::none},
                                            {"greyscale", Degrade::greyscale},
                                            {"lowres", Degrade::lowres}},
                                      "degrade");
    get("n_way", cfg.n_way);
    get("k_shot", cfg.k_shot);
    get("m_query", cfg.m_query);
    get("episodes", cfg.episodes);
    get("epochs", cfg.epochs);
    get("batch_size", cfg.batch_size);
    get("learning_rate", cfg.learning_rate);
    get("weight_decay", cfg.weight_decay);
    get("seed", cfg.seed);
    get("image_size", cfg.image_size);
    get("validate_every", cfg.validate_every);
    get("val_episodes", cfg.val_episodes);
    get("val_holdout_fraction", cfg.val_holdout_fraction);
    get("ssl_chunk", cfg.ssl_chunk);

    if (j.contains("backbone")) {
        const json& b = j.at("backbone");
        std::string kind = to_string(cfg.backbone.kind);
        if (b.contains("kind")) kind = b.at("kind").get<std::string>();
        cfg.backbone.kind = parse_enum<BackboneKind>(
            kind, {{"small_conv", BackboneKind::small_conv},
                   {"paper_resnet18", BackboneKind::paper_resnet18}},
            "backbone kind");
        if (cfg.backbone.kind == BackboneKind::paper_resnet18) cfg.backbone.embed_dim = 512;
        if (b.contains("embed_dim")) cfg.backbone.embed_dim = b.at("embed_dim").get<long>();
        if (b.contains("width")) cfg.backbone.width = b.at("width").get<long>();
        if (b.contains("bn_policy")) {
            cfg.backbone.bn_policy = parse_enum<nn::BnPolicy>(
                b.at("bn_policy").get<std::string>(),
                {{"per_batch", nn::BnPolicy::per_batch},
                 {"running_stats", nn::BnPolicy::running_stats}},
                "bn_policy");
        } else {
            cfg.backbone.bn_policy = cfg.ssl_task != SslTask::none
                                         ? nn::BnPolicy::per_batch
                                         : nn::BnPolicy::running_stats;
        }
    } else if (cfg.ssl_task == SslTask::none) {
        cfg.backbone.bn_policy = nn::BnPolicy::running_stats;
    }

    validate_train_config(cfg);
    return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["ssl_task"] = to_string(cfg.ssl_task);
    j["n_way"] = cfg.n_way;
    j["k_shot"] = cfg.k_shot;
    j["m_query"] = cfg.m_query;
    j["episodes"] = cfg.episodes;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["weight_decay"] = cfg.weight_decay;
    j["seed"] = cfg.seed;
    j["rotation_mode"] = to_string(cfg.rotation_mode);
    j["degrade"] = to_string(cfg.degrade);
    j["image_size"] = cfg.image_size;
    j["backbone"] = {{"kind", to_string(cfg.backbone.kind)},
                     {"embed_dim", cfg.backbone.embed_dim},
                     {"width", cfg.backbone.width},
                     {"bn_policy", to_string(cfg.backbone.bn_policy)}};
    j["validate_every"] = cfg.validate_every;
    j["val_episodes"] = cfg.val_episodes;
    j["val_holdout_fraction"] = cfg.val_holdout_fraction;
    j["ssl_chunk"] = cfg.ssl_chunk;
    return j;
}

void validate_train_config(const TrainConfig& cfg) {
    check_arg(cfg.n_way >= 1 && cfg.k_shot >= 1 && cfg.m_query >= 1,
              "config: episode geometry must be positive");
    check_arg(cfg.episodes >= 1, "config: episodes must be >= 1");
    check_arg(cfg.epochs >= 1, "config: epochs must be >= 1");
    check_arg(cfg.batch_size >= 1, "config: batch_size must be >= 1");
    check_arg(cfg.learning_rate > 0.0 && std::isfinite(cfg.learning_rate),
              "config: learning_rate must be positive");
    check_arg(cfg.weight_decay >= 0.0 && std::isfinite(cfg.weight_decay),
              "config: weight_decay must be >= 0");
    check_arg(cfg.image_size >= 8, "config: image_size too small");
    check_arg(cfg.ssl_chunk >= 1, "config: ssl_chunk must be >= 1");
    check_arg(cfg.val_holdout_fraction >= 0.0 && cfg.val_holdout_fraction < 1.0,
              "config: val_holdout_fraction must be in [0,1)");
    check_arg(cfg.backbone.embed_dim >= 1, "config: embed_dim must be >= 1");
    // Self-supervised batches mix full images and small tiles; their batch
    // statistics differ, so running averages are disallowed here.
    check_arg(!(cfg.ssl_task != SslTask::none &&
                cfg.backbone.bn_policy == nn::BnPolicy::running_stats),
              "config: ssl_task requires bn_policy per_batch");
}

ModelBundle build_model(const TrainConfig& cfg, long num_classes, long perm_count) {
    const bool supervised = cfg.mode == TrainMode::standard;
    const bool jigsaw = cfg.ssl_task == SslTask::jigsaw;
    const bool rotation = cfg.ssl_task == SslTask::rotation;
    if (jigsaw)
        check_arg(perm_count >= 2, "build_model: jigsaw training needs a permutation set");
    return make_bundle(cfg.backbone, supervised, num_classes, jigsaw, perm_count,
                       rotation);
}

}  // namespace fewshot
