#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "fewshot/checkpoint.hpp"
#include "fewshot/config.hpp"
#include "fewshot/dataset.hpp"
#include "fewshot/permset.hpp"

namespace fewshot {

struct StepRecord {
    long step = 0;
    double loss_total = 0.0, loss_sup = 0.0, loss_ssl = 0.0;
    double acc_sup = 0.0, acc_ssl = 0.0;
    double wallclock = 0.0;
    // Source paths of the supervised batch and of the images the
    // self-supervised samples were derived from, in batch order.
    std::vector<std::string> sup_image_ids;
    std::vector<std::string> ssl_image_ids;
};

using StepObserver = std::function<void(const StepRecord&, ModelBundle&)>;

struct TrainResult {
    std::string best_checkpoint_path;
    std::string last_checkpoint_path;
    double best_val = -1.0;
    long steps = 0;
};

// One optimizer step per episode (episodic) or minibatch (standard). The
// self-supervised inputs of a step are derived from the very images of its
// supervised batch; both losses are summed with equal weights and a single
// optimizer update is applied to the accumulated gradients.
TrainResult train(const TrainConfig& cfg, const std::vector<LabeledImage>& images,
                  const ClassSplit& split, const PermutationSet* permset,
                  const std::string& out_dir, std::ostream* log = nullptr,
                  const StepObserver& observer = {});

// Deterministic validation metric: episodic mode evaluates a fixed draw of
// cfg.val_episodes episodes from the validation classes; standard mode
// scores held-out images with the supervised head.
double validate(const ModelBundle& bundle, const std::vector<LabeledImage>& val_images,
                const TrainConfig& cfg);

// Standard-mode image-level holdout (per class, seed-deterministic).
void standard_holdout(const std::vector<LabeledImage>& images, const TrainConfig& cfg,
                      std::vector<LabeledImage>& train_out,
                      std::vector<LabeledImage>& val_out);

nlohmann::json step_record_to_json(const StepRecord& rec);

}  // namespace fewshot
