#include "fewshot/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fewshot/common.hpp"
#include "fewshot/objectives.hpp"

namespace fewshot {

using nlohmann::json;

double mean_of(const std::vector<double>& xs) {
    check_arg(!xs.empty(), "mean_of: empty");
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean_of(xs);
    double sq = 0.0;
    for (double x : xs) sq += (x - mu) * (x - mu);
    return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

double ci95_halfwidth(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    return 100.0 * 1.96 * sample_std(xs) / std::sqrt(static_cast<double>(xs.size()));
}

std::string EvalReport::formatted() const {
    char buf[64];
    if (protocol == "meta_test")
        std::snprintf(buf, sizeof(buf), "%.2f±%.2f", mean_accuracy, ci95);
    else
        std::snprintf(buf, sizeof(buf), "%.1f", accuracy);
    return buf;
}

double episode_accuracy(const ModelBundle& bundle, const Episode& ep) {
    Tensor support_emb = embed_infer(bundle, to_nchw(ep.support));
    Tensor query_emb = embed_infer(bundle, to_nchw(ep.query));
    std::vector<long> slabels;
    for (long l = 0; l < ep.n_way; ++l)
        for (long k = 0; k < ep.k_shot; ++k) slabels.push_back(l);
    Tensor proto = class_prototypes(support_emb, slabels, ep.n_way);

    const long d = query_emb.dim(1);
    long correct = 0;
    for (long q = 0; q < query_emb.dim(0); ++q) {
        long best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (long l = 0; l < ep.n_way; ++l) {
            double dist = 0.0;
            for (long j = 0; j < d; ++j) {
                const double diff = query_emb.at(q, j) - proto.at(l, j);
                dist += diff * diff;
            }
            if (dist < best_dist) {  // ties break to the lowest class index
                best_dist = dist;
                best = l;
            }
        }
        if (best == q / ep.m_query) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(query_emb.dim(0));
}

EvalReport meta_test(const ModelBundle& bundle, const std::vector<LabeledImage>& novel,
                     long n_way, long k_shot, long m_query, long n_episodes,
                     uint64_t seed) {
    check_arg(n_episodes >= 1, "meta_test: need at least one episode");
    check_arg(!novel.empty(), "meta_test: empty novel set");
    EvalReport report;
    report.protocol = "meta_test";
    report.n_way = n_way;
    report.k_shot = k_shot;
    report.m_query = m_query;
    report.n_episodes = n_episodes;
    report.seed = seed;
    report.per_episode_accuracies.assign(static_cast<size_t>(n_episodes), 0.0);

#pragma omp parallel for schedule(dynamic)
    for (long e = 0; e < n_episodes; ++e) {
        Rng rng = Rng::substream(seed, "metatest", static_cast<uint64_t>(e));
        Episode ep = sample_episode(novel, n_way, k_shot, m_query, rng);
        report.per_episode_accuracies[static_cast<size_t>(e)] =
            episode_accuracy(bundle, ep);
    }

    report.mean_accuracy = 100.0 * mean_of(report.per_episode_accuracies);
    report.ci95 = ci95_halfwidth(report.per_episode_accuracies);
    if (report.per_episode_accuracies.size() >= 2) {
        const double s = sample_std(report.per_episode_accuracies);
        const double e_count = static_cast<double>(report.per_episode_accuracies.size());
        const double pop = s * std::sqrt((e_count - 1.0) / e_count);
        report.ci95_population = 100.0 * 1.96 * pop / std::sqrt(e_count);
    }
    return report;
}

EvalReport test_standard(const ModelBundle& bundle,
                         const std::vector<LabeledImage>& test_images) {
    check_arg(!test_images.empty(), "test_standard: empty test set");
    check(bundle.supervised_head != nullptr,
          "test_standard: checkpoint has no supervised head");
    const long num_classes = bundle.num_classes;
    for (const auto& img : test_images)
        check_arg(img.class_id >= 0 && img.class_id < num_classes,
                  cat("test_standard: class id ", img.class_id,
                      " outside the trained label space of ", num_classes, " classes"));

    long correct = 0;
    const size_t chunk = 256;
    for (size_t lo = 0; lo < test_images.size(); lo += chunk) {
        const size_t hi = std::min(test_images.size(), lo + chunk);
        std::vector<LabeledImage> part(test_images.begin() + static_cast<long>(lo),
                                       test_images.begin() + static_cast<long>(hi));
        Tensor logits = supervised_infer(bundle, to_nchw(part));
        for (long i = 0; i < logits.dim(0); ++i) {
            long argmax = 0;
            for (long j = 1; j < logits.dim(1); ++j)
                if (logits.at(i, j) > logits.at(i, argmax)) argmax = j;
            if (argmax == part[static_cast<size_t>(i)].class_id) ++correct;
        }
    }
    EvalReport report;
    report.protocol = "standard";
    report.n_images = static_cast<long>(test_images.size());
    report.accuracy =
        100.0 * static_cast<double>(correct) / static_cast<double>(test_images.size());
    return report;
}

Tensor saliency(ModelBundle& bundle, const ImageTensor& image, long true_class) {
    check(bundle.supervised_head != nullptr,
          "saliency: model has no supervised head (train in standard mode)");
    check_arg(true_class >= 0 && true_class < bundle.num_classes,
              cat("saliency: class ", true_class, " outside label space"));
    std::vector<const ImageTensor*> one{&image};
    Tensor nchw = to_nchw(one);
    Tensor logits = supervised_forward(bundle, nchw, false, nullptr);
    Tensor dlogits(logits.shape);
    dlogits.at(0, true_class) = 1.0;
    Tensor dx = supervised_backward(bundle, dlogits);  // 1 x C x H x W

    const long c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    Tensor map({h, w});
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double sq = 0.0;
            for (long ch = 0; ch < c; ++ch) {
                const double g = dx.at(0, ch, y, x);
                sq += g * g;
            }
            map.at(y, x) = std::sqrt(sq);
        }
    }
    double lo = map.at(0), hi = map.at(0);
    for (double v : map.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == 0.0) return map;  // identically-zero gradient stays all zero
    if (hi == lo) {
        map.fill(1.0);
        return map;
    }
    for (double& v : map.data) v = (v - lo) / (hi - lo);
    return map;
}

json report_to_json(const EvalReport& report) {
    json j;
    j["protocol"] = report.protocol;
    j["seed"] = report.seed;
    j["config"] = report.config;
    j["checkpoint_id"] = report.checkpoint_id;
    if (report.protocol == "meta_test") {
        j["n_way"] = report.n_way;
        j["k_shot"] = report.k_shot;
        j["m_query"] = report.m_query;
        j["n_episodes"] = report.n_episodes;
        j["per_episode_accuracies"] = report.per_episode_accuracies;
        j["mean_accuracy"] = report.mean_accuracy;
        j["ci95"] = report.ci95;
        j["ci95_population"] = report.ci95_population;
        j["formatted"] = report.formatted();
        j["ci_std"] = "sample";  // E-1 denominator
    } else {
        j["n_images"] = report.n_images;
        j["accuracy"] = report.accuracy;
        j["formatted"] = report.formatted();
    }
    return j;
}

EvalReport report_from_json(const json& j) {
    EvalReport report;
    report.protocol = j.at("protocol").get<std::string>();
    report.seed = j.value("seed", 0ull);
    if (j.contains("config")) report.config = j.at("config");
    report.checkpoint_id = j.value("checkpoint_id", "");
    if (report.protocol == "meta_test") {
        report.n_way = j.at("n_way").get<long>();
        report.k_shot = j.at("k_shot").get<long>();
        report.m_query = j.at("m_query").get<long>();
        report.n_episodes = j.at("n_episodes").get<long>();
        report.per_episode_accuracies =
            j.at("per_episode_accuracies").get<std::vector<double>>();
        report.mean_accuracy = j.at("mean_accuracy").get<double>();
        report.ci95 = j.at("ci95").get<double>();
        report.ci95_population = j.value("ci95_population", 0.0);
    } else {
        report.n_images = j.at("n_images").get<long>();
        report.accuracy = j.at("accuracy").get<double>();
    }
    return report;
}

}  // namespace fewshot
