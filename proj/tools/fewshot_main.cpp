#include <cstdint>
#include <iostream>

#include <CLI11.hpp>

#include "fewshot/cli_runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Few-shot representation learning with self-supervised auxiliary losses"};
    app.require_subcommand(1);

    // permset
    int perm_n = 9;
    long perm_count = 35;
    std::string perm_out;
    bool exhaustive = false;
    uint64_t perm_seed = 0;
    auto* permset = app.add_subcommand("permset", "Build the jigsaw permutation set");
    permset->add_option("--n", perm_n, "Number of tiles");
    permset->add_option("--count", perm_count, "Set size");
    permset->add_option("--out", perm_out, "Output JSON path")->required();
    permset->add_flag("--exhaustive", exhaustive, "Score all n! candidates");
    permset->add_option("--seed", perm_seed, "Sampling seed");

    // split
    std::string split_root, split_ratio = "2,1,1", split_out;
    uint64_t split_seed = 0;
    auto* split = app.add_subcommand("split", "Partition classes into base/val/novel");
    split->add_option("--root", split_root, "Dataset root")->envname("FEWSHOT_SSL_DATA");
    split->add_option("--ratio", split_ratio, "base,val,novel ratio");
    split->add_option("--seed", split_seed, "Shuffle seed");
    split->add_option("--out", split_out, "Output split JSON")->required();

    // train
    std::string train_config, train_root, train_split, train_permset, train_out = "runs/run0";
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "Train a model per a JSON config");
    train->add_option("--config", train_config, "Config JSON path")->required();
    train->add_option("--override", overrides, "key=value config overrides");
    train->add_option("--root", train_root, "Dataset root")->envname("FEWSHOT_SSL_DATA");
    train->add_option("--split", train_split, "Split JSON (episodic mode)");
    train->add_option("--permset", train_permset, "Permutation-set JSON (jigsaw)");
    train->add_option("--out-dir", train_out, "Output directory");

    // eval
    std::string eval_ckpt, eval_root, eval_split, eval_out = "report.json";
    std::string eval_protocol = "meta_test";
    long eval_n_way = 5, eval_k_shot = 5, eval_m_query = 16, eval_episodes = 600;
    uint64_t eval_seed = 0;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--protocol", eval_protocol, "meta_test | standard");
    eval->add_option("--root", eval_root, "Dataset root")->envname("FEWSHOT_SSL_DATA");
    eval->add_option("--split", eval_split, "Split JSON (meta_test)");
    eval->add_option("--n-way", eval_n_way, "Classes per test episode (5 or 20)");
    eval->add_option("--k-shot", eval_k_shot, "Support images per class");
    eval->add_option("--m-query", eval_m_query, "Query images per class");
    eval->add_option("--episodes", eval_episodes, "Number of test episodes");
    eval->add_option("--seed", eval_seed, "Episode-sampling seed");
    eval->add_option("--out", eval_out, "Report JSON path");

    // saliency
    std::string sal_ckpt, sal_image, sal_out = "saliency.png";
    long sal_class = 0;
    auto* sal = app.add_subcommand("saliency", "Input-gradient saliency map");
    sal->add_option("--checkpoint", sal_ckpt, "Checkpoint path")->required();
    sal->add_option("--image", sal_image, "Input image")->required();
    sal->add_option("--class", sal_class, "True class id")->required();
    sal->add_option("--out", sal_out, "Output PNG path");

    // report
    std::string report_in, report_out;
    auto* report = app.add_subcommand("report", "Consolidate run manifests into a table");
    report->add_option("--in", report_in, "Directory to scan")->required();
    report->add_option("--out", report_out, "Optional consolidated JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (permset->parsed())
            fewshot::run_permset(perm_n, perm_count, perm_out, exhaustive, perm_seed);
        else if (split->parsed())
            fewshot::run_split(split_root, split_ratio, split_seed, split_out);
        else if (train->parsed())
            fewshot::run_train(train_config, overrides, train_root, train_split,
                               train_permset, train_out);
        else if (eval->parsed())
            fewshot::run_eval(eval_ckpt, eval_protocol, eval_root, eval_split, eval_n_way,
                              eval_k_shot, eval_m_query, eval_episodes, eval_seed,
                              eval_out);
        else if (sal->parsed())
            fewshot::run_saliency(sal_ckpt, sal_image, sal_class, sal_out);
        else if (report->parsed())
            fewshot::run_report(report_in, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
