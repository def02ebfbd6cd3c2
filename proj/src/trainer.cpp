#include "fewshot/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>

#include "fewshot/common.hpp"
#include "fewshot/evaluator.hpp"
#include "fewshot/objectives.hpp"
#include "fewshot/optim.hpp"

namespace fewshot {

using nlohmann::json;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct SslOutcome {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::string> image_ids;
};

// Jigsaw branch for one step: every batch image yields one sample; samples
// run in fixed-size chunks (each chunk is its own BN batch) and gradients
// accumulate, weighted so the result is the mean over the full sample set.
SslOutcome run_jigsaw(ModelBundle& bundle, const std::vector<const LabeledImage*>& batch,
                      const PermutationSet& permset, long chunk_size, Rng& jig_rng,
                      Rng& drop_rng) {
    SslOutcome out;
    std::vector<JigsawSample> samples;
    std::vector<long> targets;
    samples.reserve(batch.size());
    for (const LabeledImage* img : batch) {
        samples.push_back(make_jigsaw(img->image, permset, jig_rng));
        targets.push_back(samples.back().perm_index);
        out.image_ids.push_back(img->source_path);
    }
    const long total = static_cast<long>(samples.size());
    for (long lo = 0; lo < total; lo += chunk_size) {
        const long hi = std::min(total, lo + chunk_size);
        std::vector<JigsawSample> chunk(samples.begin() + lo, samples.begin() + hi);
        std::vector<long> chunk_targets(targets.begin() + lo, targets.begin() + hi);
        Tensor tiles = tiles_to_nchw(chunk);
        Tensor logits = jigsaw_forward(bundle, tiles, true, &drop_rng);
        CeResult ce = jigsaw_loss(logits, chunk_targets);
        const double w = static_cast<double>(hi - lo) / static_cast<double>(total);
        out.loss += ce.loss * w;
        out.accuracy += ce.accuracy * w;
        for (double& g : ce.dlogits.data) g *= w;
        jigsaw_backward(bundle, ce.dlogits);
    }
    return out;
}

SslOutcome run_rotation(ModelBundle& bundle, const std::vector<const LabeledImage*>& batch,
                        RotationMode mode, Rng& rot_rng, Rng& drop_rng) {
    SslOutcome out;
    std::vector<ImageTensor> rotated;
    std::vector<long> targets;
    for (const LabeledImage* img : batch) {
        if (mode == RotationMode::one_per_image) {
            const int angle = static_cast<int>(rot_rng.uniform_index(4));
            rotated.push_back(make_rotation(img->image, angle).image);
            targets.push_back(angle);
        } else {
            for (int angle = 0; angle < 4; ++angle) {
                rotated.push_back(make_rotation(img->image, angle).image);
                targets.push_back(angle);
            }
        }
        out.image_ids.push_back(img->source_path);
    }
    std::vector<const ImageTensor*> ptrs;
    ptrs.reserve(rotated.size());
    for (const auto& img : rotated) ptrs.push_back(&img);
    Tensor nchw = to_nchw(ptrs);
    Tensor logits = rotation_forward(bundle, nchw, true, &drop_rng);
    CeResult ce = rotation_loss(logits, targets);
    out.loss = ce.loss;
    out.accuracy = ce.accuracy;
    rotation_backward(bundle, ce.dlogits);
    return out;
}

std::vector<long> local_support_labels(long n_way, long k_shot) {
    std::vector<long> labels;
    labels.reserve(static_cast<size_t>(n_way * k_shot));
    for (long l = 0; l < n_way; ++l)
        for (long k = 0; k < k_shot; ++k) labels.push_back(l);
    return labels;
}

long count_classes(const std::vector<LabeledImage>& images) {
    long max_id = -1;
    for (const auto& img : images) max_id = std::max(max_id, img.class_id);
    return max_id + 1;
}

struct CheckpointWriter {
    std::string out_dir;
    json config_echo;
    json permset_json;

    std::string write(const char* name, ModelBundle& bundle, long step, double best_val) {
        const std::string path =
            (std::filesystem::path(out_dir) / name).string();
        save_checkpoint(path, bundle, config_echo, step, best_val, permset_json);
        return path;
    }
};

}  // namespace

void standard_holdout(const std::vector<LabeledImage>& images, const TrainConfig& cfg,
                      std::vector<LabeledImage>& train_out,
                      std::vector<LabeledImage>& val_out) {
    std::map<long, std::vector<size_t>> by_class;
    for (size_t i = 0; i < images.size(); ++i) by_class[images[i].class_id].push_back(i);
    Rng rng = Rng::substream(cfg.seed, "holdout");
    for (auto& [cid, idx] : by_class) {
        rng.shuffle(idx);
        const long n_val = static_cast<long>(cfg.val_holdout_fraction *
                                             static_cast<double>(idx.size()));
        for (size_t i = 0; i < idx.size(); ++i) {
            if (static_cast<long>(i) < n_val)
                val_out.push_back(images[idx[i]]);
            else
                train_out.push_back(images[idx[i]]);
        }
    }
}

double validate(const ModelBundle& bundle, const std::vector<LabeledImage>& val_images,
                const TrainConfig& cfg) {
    check_arg(!val_images.empty(), "validate: empty validation set");
    if (cfg.mode == TrainMode::episodic) {
        Rng rng = Rng::substream(cfg.seed, "val_episode");
        double sum = 0.0;
        for (long e = 0; e < cfg.val_episodes; ++e) {
            Episode ep = sample_episode(val_images, cfg.n_way, cfg.k_shot, cfg.m_query, rng);
            sum += episode_accuracy(bundle, ep);
        }
        return sum / static_cast<double>(cfg.val_episodes);
    }
    // standard: supervised-head accuracy over the holdout
    long correct = 0;
    const long chunk = 256;
    for (size_t lo = 0; lo < val_images.size(); lo += chunk) {
        const size_t hi = std::min(val_images.size(), lo + chunk);
        std::vector<LabeledImage> part(val_images.begin() + static_cast<long>(lo),
                                       val_images.begin() + static_cast<long>(hi));
        Tensor logits = supervised_infer(bundle, to_nchw(part));
        for (long i = 0; i < logits.dim(0); ++i) {
            long argmax = 0;
            for (long j = 1; j < logits.dim(1); ++j)
                if (logits.at(i, j) > logits.at(i, argmax)) argmax = j;
            if (argmax == part[static_cast<size_t>(i)].class_id) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(val_images.size());
}

json step_record_to_json(const StepRecord& rec) {
    return json{{"step", rec.step},         {"loss_total", rec.loss_total},
                {"loss_sup", rec.loss_sup}, {"loss_ssl", rec.loss_ssl},
                {"acc_sup", rec.acc_sup},   {"acc_ssl", rec.acc_ssl},
                {"wallclock", rec.wallclock}};
}

TrainResult train(const TrainConfig& cfg, const std::vector<LabeledImage>& images,
                  const ClassSplit& split, const PermutationSet* permset,
                  const std::string& out_dir, std::ostream* log,
                  const StepObserver& observer) {
    validate_train_config(cfg);
    check_arg(!(cfg.ssl_task == SslTask::jigsaw && permset == nullptr),
              "train: jigsaw training needs a permutation set");
    std::filesystem::create_directories(out_dir);

    const bool episodic = cfg.mode == TrainMode::episodic;

    std::vector<LabeledImage> train_images, val_images;
    long num_classes = 0;
    if (episodic) {
        train_images = filter_by_classes(images, split.base);
        val_images = filter_by_classes(images, split.val);
        check_arg(!train_images.empty(), "train: base split has no images");
        std::map<long, long> counts;
        for (const auto& img : train_images) ++counts[img.class_id];
        check_arg(static_cast<long>(counts.size()) >= cfg.n_way,
                  cat("train: base split has ", counts.size(), " classes, episode needs ",
                      cfg.n_way));
        for (const auto& [cid, n] : counts)
            check_arg(n >= cfg.k_shot + cfg.m_query,
                      cat("train: class ", cid, " has ", n, " images, episode needs ",
                          cfg.k_shot + cfg.m_query));
    } else {
        standard_holdout(images, cfg, train_images, val_images);
        check_arg(!train_images.empty(), "train: empty training set");
        num_classes = count_classes(images);
    }

    Rng init_rng = Rng::substream(cfg.seed, "init");
    Rng episode_rng = Rng::substream(cfg.seed, "episode");
    Rng shuffle_rng = Rng::substream(cfg.seed, "standard_shuffle");
    Rng jig_rng = Rng::substream(cfg.seed, "jigsaw");
    Rng rot_rng = Rng::substream(cfg.seed, "rotation");
    Rng drop_rng = Rng::substream(cfg.seed, "dropout");

    const long perm_count = permset ? permset->size() : 0;
    ModelBundle bundle = build_model(cfg, num_classes, perm_count);
    bundle.init(init_rng);
    Adam adam(bundle.params(), cfg.learning_rate, cfg.weight_decay);

    json config_echo = train_config_to_json(cfg);
    if (!episodic) config_echo["num_classes"] = num_classes;
    json permset_json;
    if (permset) {
        permset_json["n"] = permset->n_elements;
        permset_json["perms"] = permset->perms;
        permset_json["min_hamming"] = permset->min_hamming;
    }
    CheckpointWriter writer{out_dir, config_echo, permset_json};

    TrainResult result;
    const double t0 = now_seconds();
    bool validated = false;

    auto run_step = [&](long step, const std::vector<const LabeledImage*>& batch,
                        const std::vector<long>& targets, bool proto) {
        adam.zero_grad();
        StepRecord rec;
        rec.step = step;
        for (const LabeledImage* img : batch) rec.sup_image_ids.push_back(img->source_path);

        std::vector<const ImageTensor*> ptrs;
        ptrs.reserve(batch.size());
        for (const LabeledImage* img : batch) ptrs.push_back(&img->image);
        Tensor nchw = to_nchw(ptrs);

        if (proto) {
            Tensor emb = embed_forward(bundle, nchw, true, &drop_rng);
            const long nk = cfg.n_way * cfg.k_shot;
            const long nm = cfg.n_way * cfg.m_query;
            const long d = emb.dim(1);
            Tensor support({nk, d}), query({nm, d});
            std::copy(emb.ptr(), emb.ptr() + nk * d, support.ptr());
            std::copy(emb.ptr() + nk * d, emb.ptr() + (nk + nm) * d, query.ptr());
            std::vector<long> slabels = local_support_labels(cfg.n_way, cfg.k_shot);
            std::vector<long> qlabels = local_support_labels(cfg.n_way, cfg.m_query);
            ProtoResult proto_res = prototype_loss(support, slabels, query, qlabels);
            rec.loss_sup = proto_res.loss;
            rec.acc_sup = proto_res.accuracy;
            Tensor demb({nk + nm, d});
            std::copy(proto_res.dsupport.ptr(), proto_res.dsupport.ptr() + nk * d,
                      demb.ptr());
            std::copy(proto_res.dquery.ptr(), proto_res.dquery.ptr() + nm * d,
                      demb.ptr() + nk * d);
            embed_backward(bundle, demb);
        } else {
            Tensor logits = supervised_forward(bundle, nchw, true, &drop_rng);
            CeResult ce = cross_entropy_with_grad(logits, targets);
            rec.loss_sup = ce.loss;
            rec.acc_sup = ce.accuracy;
            supervised_backward(bundle, ce.dlogits);
        }

        SslOutcome ssl;
        if (cfg.ssl_task == SslTask::jigsaw)
            ssl = run_jigsaw(bundle, batch, *permset, cfg.ssl_chunk, jig_rng, drop_rng);
        else if (cfg.ssl_task == SslTask::rotation)
            ssl = run_rotation(bundle, batch, cfg.rotation_mode, rot_rng, drop_rng);
        rec.loss_ssl = ssl.loss;
        rec.acc_ssl = ssl.accuracy;
        rec.ssl_image_ids = std::move(ssl.image_ids);

        try {
            rec.loss_total = combine(rec.loss_sup, rec.loss_ssl);
        } catch (const std::exception& e) {
            fail(cat("training aborted at step ", step, ": ", e.what(),
                     " (loss_sup=", rec.loss_sup, ", loss_ssl=", rec.loss_ssl, ")"));
        }

        adam.step();
        rec.wallclock = now_seconds() - t0;
        if (log) *log << step_record_to_json(rec).dump() << "\n";
        if (observer) observer(rec, bundle);
    };

    auto maybe_validate = [&](long step) {
        if (cfg.validate_every <= 0 || val_images.empty()) return;
        const double metric = validate(bundle, val_images, cfg);
        if (!validated || metric > result.best_val) {
            result.best_val = metric;
            result.best_checkpoint_path = writer.write("best.ckpt", bundle, step, metric);
        }
        validated = true;
    };

    if (episodic) {
        for (long step = 1; step <= cfg.episodes; ++step) {
            Episode ep = sample_episode(train_images, cfg.n_way, cfg.k_shot, cfg.m_query,
                                        episode_rng);
            std::vector<const LabeledImage*> batch;
            batch.reserve(ep.support.size() + ep.query.size());
            for (const auto& img : ep.support) batch.push_back(&img);
            for (const auto& img : ep.query) batch.push_back(&img);
            run_step(step, batch, {}, true);
            if (cfg.validate_every > 0 && step % cfg.validate_every == 0)
                maybe_validate(step);
            result.steps = step;
        }
    } else {
        long step = 0;
        const long n = static_cast<long>(train_images.size());
        const long steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
        std::vector<size_t> order(train_images.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            for (long mb = 0; mb < steps_per_epoch; ++mb) {
                const long lo = mb * cfg.batch_size;
                const long hi = std::min(n, lo + cfg.batch_size);
                std::vector<const LabeledImage*> batch;
                std::vector<long> targets;
                for (long i = lo; i < hi; ++i) {
                    batch.push_back(&train_images[order[static_cast<size_t>(i)]]);
                    targets.push_back(batch.back()->class_id);
                }
                run_step(++step, batch, targets, false);
            }
            if (cfg.validate_every > 0) maybe_validate(step);
            result.steps = step;
        }
    }

    result.last_checkpoint_path =
        writer.write("last.ckpt", bundle, result.steps, result.best_val);
    if (result.best_checkpoint_path.empty()) {
        // No validation ran; model selection falls back to the final state.
        result.best_checkpoint_path =
            writer.write("best.ckpt", bundle, result.steps, result.best_val);
    }
    return result;
}

}  // namespace fewshot
