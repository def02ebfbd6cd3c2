#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/dataset.hpp"
#include "fewshot/model.hpp"

namespace fewshot {

struct EvalReport {
    std::string protocol;  // "meta_test" | "standard"
    long n_way = 0, k_shot = 0, m_query = 0, n_episodes = 0;
    std::vector<double> per_episode_accuracies;  // fractions in [0,1]
    double mean_accuracy = 0.0;       // percent
    double ci95 = 0.0;                // percent half-width, sample std (E-1)
    double ci95_population = 0.0;     // population-std variant, for reference
    double accuracy = 0.0;            // standard protocol, percent
    long n_images = 0;
    uint64_t seed = 0;
    nlohmann::json config;            // checkpoint config echo
    std::string checkpoint_id;

    std::string formatted() const;    // "87.29±0.48"
};

// Mean accuracy and 95% confidence interval helpers (accuracies as fractions).
double mean_of(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);
double ci95_halfwidth(const std::vector<double>& xs);  // 1.96 * s / sqrt(E), percent

// Nearest-prototype accuracy of one episode under eval-mode forwards.
// Support and query run as separate batches (the query batch is the full
// N*M set), matching the training-time batch-statistics policy.
double episode_accuracy(const ModelBundle& bundle, const Episode& ep);

// 600-episode protocol: episodes are drawn from per-episode substreams of
// (seed, index), so evaluation order and parallelism cannot change the report.
EvalReport meta_test(const ModelBundle& bundle, const std::vector<LabeledImage>& novel,
                     long n_way, long k_shot = 5, long m_query = 16,
                     long n_episodes = 600, uint64_t seed = 0);

EvalReport test_standard(const ModelBundle& bundle,
                         const std::vector<LabeledImage>& test_images);

// Gradient of the true-class logit w.r.t. the input image; per-pixel L2
// magnitude across channels, min-max normalized to [0,1].
Tensor saliency(ModelBundle& bundle, const ImageTensor& image, long true_class);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace fewshot
