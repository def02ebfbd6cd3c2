#include "fewshot/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "fewshot/common.hpp"

namespace fewshot {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'S', 'C', 'K', 'P', 'T', '0', '1'};

json tensor_manifest(const std::vector<nn::ParamRef>& params,
                     const std::vector<nn::BufferRef>& buffers) {
    json list = json::array();
    for (const auto& p : params) list.push_back({{"name", p.name}, {"shape", p.value->shape}});
    for (const auto& b : buffers) list.push_back({{"name", b.name}, {"shape", b.value->shape}});
    return list;
}

}  // namespace

void save_checkpoint(const std::string& path, ModelBundle& bundle, const json& config,
                     long step, double best_val, const json& permset) {
    auto params = bundle.params();
    auto buffers = bundle.buffers();
    json header;
    header["config"] = config;
    header["step"] = step;
    header["best_val"] = best_val;
    header["permset"] = permset;
    header["tensors"] = tensor_manifest(params, buffers);
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    check(out.good(), cat("save_checkpoint: cannot open '", path, "'"));
    out.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = head.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    auto write_tensor = [&](const Tensor& t) {
        out.write(reinterpret_cast<const char*>(t.ptr()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.numel())));
    };
    for (const auto& p : params) write_tensor(*p.value);
    for (const auto& b : buffers) write_tensor(*b.value);
    check(out.good(), cat("save_checkpoint: write failed for '", path, "'"));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), cat("load_checkpoint: cannot open '", path, "'"));
    char magic[8];
    in.read(magic, sizeof(magic));
    check(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          cat("load_checkpoint: '", path, "' is not a checkpoint file"));
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    check(in.good() && hlen > 0 && hlen < (1ull << 30),
          cat("load_checkpoint: corrupt header length in '", path, "'"));
    std::string head(hlen, '\0');
    in.read(head.data(), static_cast<std::streamsize>(hlen));
    check(in.good(), cat("load_checkpoint: truncated header in '", path, "'"));

    json header;
    try {
        header = json::parse(head);
    } catch (const json::parse_error& e) {
        fail(cat("load_checkpoint: malformed header in '", path, "': ", e.what()));
    }

    Checkpoint ck;
    ck.config_json = header.at("config");
    ck.config = train_config_from_json(ck.config_json);
    ck.step = header.at("step").get<long>();
    ck.best_val = header.at("best_val").get<double>();
    ck.permset = header.at("permset");

    long perm_count = 0;
    if (!ck.permset.is_null()) perm_count = static_cast<long>(ck.permset.at("perms").size());
    long num_classes = 0;
    if (header["config"].contains("num_classes"))
        num_classes = header["config"]["num_classes"].get<long>();
    ck.bundle = build_model(ck.config, num_classes, perm_count);

    auto params = ck.bundle.params();
    auto buffers = ck.bundle.buffers();
    const json& tensors = header.at("tensors");
    check(tensors.size() == params.size() + buffers.size(),
          cat("load_checkpoint: '", path, "' holds ", tensors.size(),
              " tensors, model expects ", params.size() + buffers.size()));

    size_t idx = 0;
    auto read_tensor = [&](Tensor* t, const std::string& name) {
        const json& entry = tensors.at(idx++);
        check(entry.at("name").get<std::string>() == name,
              cat("load_checkpoint: tensor '", entry.at("name").get<std::string>(),
                  "' where '", name, "' expected (config mismatch)"));
        check(entry.at("shape").get<std::vector<long>>() == t->shape,
              cat("load_checkpoint: shape mismatch for tensor '", name, "'"));
        in.read(reinterpret_cast<char*>(t->ptr()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t->numel())));
        check(in.good(), cat("load_checkpoint: truncated data for tensor '", name, "'"));
    };
    for (auto& p : params) read_tensor(p.value, p.name);
    for (auto& b : buffers) read_tensor(b.value, b.name);
    return ck;
}

}  // namespace fewshot
