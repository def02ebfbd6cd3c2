#include "fewshot/cli_runner.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fewshot/common.hpp"
#include "fewshot/evaluator.hpp"
#include "fewshot/image_io.hpp"
#include "fewshot/manifest.hpp"
#include "fewshot/sha256.hpp"
#include "fewshot/trainer.hpp"

namespace fewshot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string parent_dir(const std::string& path) {
    fs::path p = fs::absolute(path).parent_path();
    return p.empty() ? "." : p.string();
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), cat("cannot open '", path, "'"));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(cat("malformed JSON in '", path, "': ", e.what()));
    }
}

void apply_override(json& j, const std::string& spec) {
    const size_t eq = spec.find('=');
    check_arg(eq != std::string::npos && eq > 0,
              cat("override '", spec, "' is not key=value"));
    const std::string key = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);
    json* node = &j;
    size_t start = 0;
    while (true) {
        const size_t dot = key.find('.', start);
        const std::string part =
            key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        check_arg(!part.empty(), cat("override '", spec, "' has an empty key segment"));
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void apply_degrade(std::vector<LabeledImage>& images, Degrade degrade) {
    if (degrade == Degrade::none) return;
    for (auto& img : images)
        img.image = degrade == Degrade::greyscale ? to_greyscale(img.image)
                                                  : degrade_low_resolution(img.image, 4);
}

std::string resolve_root(const std::string& root) {
    if (!root.empty()) return root;
    const char* env = std::getenv("FEWSHOT_SSL_DATA");
    check(env != nullptr && *env != '\0',
          "no dataset root: pass --root or set FEWSHOT_SSL_DATA");
    return env;
}

PermutationSet permset_from_json(const json& j) {
    PermutationSet set;
    set.n_elements = j.at("n").get<int>();
    set.perms = j.at("perms").get<std::vector<Permutation>>();
    set.min_hamming = j.at("min_hamming").get<int>();
    set.mean_hamming = mean_pairwise_hamming(set.perms);
    return set;
}

}  // namespace

void run_permset(int n, long count, const std::string& out, bool exhaustive,
                 uint64_t seed) {
    PermutationSet set = generate_permutation_set(n, count, exhaustive, seed);
    save_permutation_set(set, out);
    RunInfo info;
    info.command = "permset";
    info.inputs = {{"n", n}, {"count", count}, {"exhaustive", exhaustive}, {"seed", seed}};
    info.artifacts = {out};
    update_manifest(parent_dir(out), info);
    std::cout << "permset: wrote " << set.size() << " permutations of " << n
              << " (min_hamming=" << set.min_hamming
              << ", mean_hamming=" << set.mean_hamming << ") to " << out << "\n";
}

void run_split(const std::string& root, const std::string& ratio_spec, uint64_t seed,
               const std::string& out) {
    std::array<long, 3> ratio{2, 1, 1};
    {
        std::istringstream is(ratio_spec);
        std::string part;
        for (int i = 0; i < 3; ++i) {
            check_arg(static_cast<bool>(std::getline(is, part, ',')),
                      cat("ratio '", ratio_spec, "' must be three comma-separated ints"));
            ratio[static_cast<size_t>(i)] = std::stol(part);
        }
    }
    const std::string data_root = resolve_root(root);
    const std::vector<std::string> names = list_class_names(data_root);
    std::vector<long> ids(names.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<long>(i);
    ClassSplit split = split_classes(ids, ratio, seed);
    save_split(split, names, out);
    RunInfo info;
    info.command = "split";
    info.inputs = {{"root", data_root}, {"ratio", ratio_spec}, {"seed", seed}};
    info.artifacts = {out};
    update_manifest(parent_dir(out), info);
    std::cout << "split: " << split.base.size() << " base / " << split.val.size()
              << " val / " << split.novel.size() << " novel classes -> " << out << "\n";
}

void run_train(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& root, const std::string& split_path,
               const std::string& permset_path, const std::string& out_dir) {
    json config_json = load_json_file(config_path);
    for (const auto& spec : overrides) apply_override(config_json, spec);
    TrainConfig cfg = train_config_from_json(config_json);

    const std::string data_root = resolve_root(root);
    std::vector<LabeledImage> images = load_dataset(data_root, cfg.image_size);
    apply_degrade(images, cfg.degrade);

    ClassSplit split;
    if (cfg.mode == TrainMode::episodic) {
        check(!split_path.empty(), "episodic training needs --split");
        split = load_split(list_class_names(data_root), split_path);
    }

    PermutationSet permset;
    const bool jigsaw = cfg.ssl_task == SslTask::jigsaw;
    if (jigsaw) {
        check(!permset_path.empty(), "jigsaw training needs --permset");
        permset = load_permutation_set(permset_path);
    }

    fs::create_directories(out_dir);
    const std::string log_path = (fs::path(out_dir) / "train_log.jsonl").string();
    std::ofstream log(log_path);
    check(log.good(), cat("cannot open log '", log_path, "'"));

    TrainResult result = train(cfg, images, split, jigsaw ? &permset : nullptr, out_dir,
                               &log);
    log.close();

    RunInfo info;
    info.command = "train";
    info.inputs = {{"config_path", fs::absolute(config_path).string()},
                   {"config_sha256", sha256_file_hex(config_path)},
                   {"overrides", overrides},
                   {"dataset_root", data_root},
                   {"split_file", split_path},
                   {"permset_file", permset_path},
                   {"seed", cfg.seed}};
    info.artifacts = {result.best_checkpoint_path, result.last_checkpoint_path, log_path};
    update_manifest(out_dir, info);
    std::cout << "train: " << result.steps << " steps, best_val=" << result.best_val
              << ", checkpoints in " << out_dir << "\n";
}

void run_eval(const std::string& checkpoint_path, const std::string& protocol,
              const std::string& root, const std::string& split_path, long n_way,
              long k_shot, long m_query, long episodes, uint64_t seed,
              const std::string& out) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    const std::string data_root = resolve_root(root);
    std::vector<LabeledImage> images = load_dataset(data_root, ck.config.image_size);
    apply_degrade(images, ck.config.degrade);

    EvalReport report;
    if (protocol == "meta_test") {
        check(!split_path.empty(), "meta_test evaluation needs --split");
        ClassSplit split = load_split(list_class_names(data_root), split_path);
        std::vector<LabeledImage> novel = filter_by_classes(images, split.novel);
        report = meta_test(ck.bundle, novel, n_way, k_shot, m_query, episodes, seed);
    } else if (protocol == "standard") {
        report = test_standard(ck.bundle, images);
    } else {
        fail(cat("unknown eval protocol '", protocol, "'"));
    }
    report.config = ck.config_json;
    report.checkpoint_id = sha256_file_hex(checkpoint_path);

    std::ofstream os(out);
    check(os.good(), cat("cannot open report '", out, "'"));
    os << report_to_json(report).dump(1) << "\n";
    os.close();

    RunInfo info;
    info.command = "eval";
    info.inputs = {{"checkpoint", fs::absolute(checkpoint_path).string()},
                   {"checkpoint_sha256", report.checkpoint_id},
                   {"protocol", protocol},
                   {"dataset_root", data_root},
                   {"split_file", split_path},
                   {"n_way", n_way},
                   {"episodes", episodes},
                   {"seed", seed},
                   {"report", fs::path(out).filename().string()}};
    info.artifacts = {out};
    update_manifest(parent_dir(out), info);
    std::cout << "eval(" << protocol << "): " << report.formatted() << " -> " << out
              << "\n";
}

void run_saliency(const std::string& checkpoint_path, const std::string& image_path,
                  long class_id, const std::string& out) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    ImageTensor img = read_image(image_path);
    img = center_crop(resize_shorter_edge(img, ck.config.image_size), ck.config.image_size);
    if (ck.config.degrade == Degrade::greyscale) img = to_greyscale(img);
    if (ck.config.degrade == Degrade::lowres) img = degrade_low_resolution(img, 4);
    Tensor map = saliency(ck.bundle, img, class_id);
    write_png_grey8(out, map);

    RunInfo info;
    info.command = "saliency";
    info.inputs = {{"checkpoint", fs::absolute(checkpoint_path).string()},
                   {"image", fs::absolute(image_path).string()},
                   {"class", class_id}};
    info.artifacts = {out};
    update_manifest(parent_dir(out), info);
    std::cout << "saliency: " << out << "\n";
}

void run_report(const std::string& in_dir, const std::string& out) {
    std::vector<fs::path> manifests;
    check(fs::is_directory(in_dir), cat("report: '", in_dir, "' is not a directory"));
    for (const auto& entry : fs::recursive_directory_iterator(in_dir))
        if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
            manifests.push_back(entry.path());
    std::sort(manifests.begin(), manifests.end());

    json rows = json::array();
    std::cout << "| experiment | mode | loss | degrade | metric |\n";
    std::cout << "|---|---|---|---|---|\n";
    for (const auto& mpath : manifests) {
        json manifest = read_manifest(mpath.string());
        json row;
        row["experiment_id"] = manifest.value("experiment_id", "?");
        std::string mode = "-", loss = "-", degrade = "-", metric = "-";
        const json runs = manifest.value("runs", json::object());
        if (runs.contains("eval")) {
            const json& eval_run = runs.at("eval");
            const std::string report_name =
                eval_run.at("inputs").value("report", "");
            const fs::path report_path = mpath.parent_path() / report_name;
            if (!report_name.empty() && fs::exists(report_path)) {
                EvalReport report = report_from_json(load_json_file(report_path.string()));
                metric = report.formatted();
                if (report.protocol == "meta_test")
                    metric += cat(" (", report.n_way, "-way ", report.k_shot, "-shot)");
                if (report.config.is_object()) {
                    mode = report.config.value("mode", "-");
                    loss = report.config.value("ssl_task", "-");
                    degrade = report.config.value("degrade", "-");
                }
            }
        }
        if (mode == "-" && runs.contains("train")) mode = "train-only";
        row["mode"] = mode;
        row["ssl_task"] = loss;
        row["degrade"] = degrade;
        row["metric"] = metric;
        rows.push_back(row);
        std::cout << "| " << row["experiment_id"].get<std::string>() << " | " << mode
                  << " | " << loss << " | " << degrade << " | " << metric << " |\n";
    }
    std::cout << rows.size() << " run manifest(s) found under " << in_dir << "\n";
    if (!out.empty()) {
        std::ofstream os(out);
        check(os.good(), cat("cannot open '", out, "'"));
        os << rows.dump(1) << "\n";
    }
}

}  // namespace fewshot
