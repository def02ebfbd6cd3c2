#include "fewshot/manifest.hpp"

#include <filesystem>
#include <fstream>

#include "fewshot/common.hpp"
#include "fewshot/sha256.hpp"

namespace fewshot {

namespace fs = std::filesystem;
using nlohmann::json;

json read_manifest(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), cat("read_manifest: cannot open '", path, "'"));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(cat("read_manifest: malformed JSON in '", path, "': ", e.what()));
    }
}

void update_manifest(const std::string& dir, const RunInfo& info) {
    fs::create_directories(dir);
    const fs::path path = fs::path(dir) / "manifest.json";
    json manifest;
    if (fs::exists(path)) manifest = read_manifest(path.string());
    if (!manifest.contains("runs") || !manifest["runs"].is_object())
        manifest["runs"] = json::object();

    json artifacts = json::object();
    for (const auto& artifact : info.artifacts) {
        const fs::path ap(artifact);
        artifacts[ap.filename().string()] = sha256_file_hex(ap.string());
    }
    manifest["runs"][info.command] = {{"inputs", info.inputs}, {"artifacts", artifacts}};
    manifest["out_dir"] = fs::absolute(dir).string();
    manifest["experiment_id"] = sha256_hex(manifest["runs"].dump()).substr(0, 12);

    std::ofstream out(path);
    check(out.good(), cat("update_manifest: cannot open '", path.string(), "'"));
    out << manifest.dump(1) << "\n";
    check(out.good(), cat("update_manifest: write failed for '", path.string(), "'"));
}

}  // namespace fewshot
