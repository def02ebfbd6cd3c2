#pragma once

#include <string>

#include <json.hpp>

#include "fewshot/config.hpp"

namespace fewshot {

struct Checkpoint {
    TrainConfig config;
    nlohmann::json config_json;
    long step = 0;
    double best_val = -1.0;  // -1 when no validation ran
    nlohmann::json permset;  // embedded permutation-set JSON, or null
    ModelBundle bundle;
};

// Versioned binary container: magic, JSON header (config echo, permset,
// counters, tensor manifest), then raw float64 tensor data. Loading rebuilds
// the model from the stored config and fails loudly on any name or shape
// mismatch.
void save_checkpoint(const std::string& path, ModelBundle& bundle,
                     const nlohmann::json& config, long step, double best_val,
                     const nlohmann::json& permset);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace fewshot
