#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace fewshot {

struct RunInfo {
    std::string command;
    nlohmann::json inputs;               // paths and content hashes consumed
    std::vector<std::string> artifacts;  // files produced, hashed on record
};

// Updates <dir>/manifest.json: one entry per command, artifact content
// hashes, and an experiment id derived from the recorded content so that
// identical inputs reproduce identical manifests byte for byte.
void update_manifest(const std::string& dir, const RunInfo& info);

nlohmann::json read_manifest(const std::string& path);

}  // namespace fewshot
