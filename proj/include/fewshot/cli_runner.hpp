#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fewshot {

// Subcommand bodies behind the CLI entry point; each writes its artifacts,
// updates the manifest next to them, and throws on any error.

void run_permset(int n, long count, const std::string& out, bool exhaustive,
                 uint64_t seed);

void run_split(const std::string& root, const std::string& ratio_spec, uint64_t seed,
               const std::string& out);

void run_train(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& root, const std::string& split_path,
               const std::string& permset_path, const std::string& out_dir);

void run_eval(const std::string& checkpoint_path, const std::string& protocol,
              const std::string& root, const std::string& split_path, long n_way,
              long k_shot, long m_query, long episodes, uint64_t seed,
              const std::string& out);

void run_saliency(const std::string& checkpoint_path, const std::string& image_path,
                  long class_id, const std::string& out);

void run_report(const std::string& in_dir, const std::string& out);

}  // namespace fewshot
