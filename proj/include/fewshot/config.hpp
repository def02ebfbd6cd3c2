#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fewshot/model.hpp"

namespace fewshot {

enum class TrainMode { episodic, standard };
enum class SslTask { none, jigsaw, rotation };
enum class RotationMode { one_per_image, all_four };
enum class Degrade { none, greyscale, lowres };

struct TrainConfig {
    TrainMode mode = TrainMode::episodic;
    SslTask ssl_task = SslTask::none;
    long n_way = 5, k_shot = 5, m_query = 16;
    long episodes = 40000;  // episodic
    long epochs = 400;      // standard
    long batch_size = 16;   // standard
    double learning_rate = 0.001;
    double weight_decay = 0.0;
    uint64_t seed = 0;
    RotationMode rotation_mode = RotationMode::one_per_image;
    Degrade degrade = Degrade::none;
    long image_size = 224;
    BackboneConfig backbone{BackboneKind::small_conv, 64, 16, nn::BnPolicy::per_batch};
    long validate_every = 500;  // episodic steps; standard validates per epoch; 0 disables
    long val_episodes = 100;
    double val_holdout_fraction = 0.1;  // standard-mode image-level validation holdout
    long ssl_chunk = 14;                // jigsaw samples per sub-batch (9 tiles each)
};

// Parses with defaults, including the batch-norm rule: when bn_policy is not
// given it is per_batch whenever a self-supervised task is active, otherwise
// running_stats. An explicit running_stats with ssl active is rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
void validate_train_config(const TrainConfig& cfg);

// Instantiates exactly the heads the configuration names.
ModelBundle build_model(const TrainConfig& cfg, long num_classes, long perm_count);

std::string to_string(TrainMode m);
std::string to_string(SslTask t);
std::string to_string(RotationMode m);
std::string to_string(Degrade d);
std::string to_string(BackboneKind k);
std::string to_string(nn::BnPolicy p);

}  // namespace fewshot
