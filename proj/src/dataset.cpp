#include "fewshot/dataset.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "fewshot/common.hpp"
#include "fewshot/image_io.hpp"

namespace fewshot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

}  // namespace

std::vector<std::string> list_class_names(const std::string& root_dir) {
    check(fs::is_directory(root_dir), cat("dataset root '", root_dir, "' is not a directory"));
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(root_dir))
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    check(!names.empty(), cat("dataset root '", root_dir, "' has no class directories"));
    return names;
}

std::vector<LabeledImage> load_dataset(const std::string& root_dir, long image_size) {
    check_arg(image_size >= 1, "load_dataset: image_size must be positive");
    const std::vector<std::string> names = list_class_names(root_dir);
    std::vector<LabeledImage> images;
    for (size_t cid = 0; cid < names.size(); ++cid) {
        const fs::path cls_dir = fs::path(root_dir) / names[cid];
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(cls_dir))
            if (entry.is_regular_file() && has_image_extension(entry.path()))
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        check(!files.empty(), cat("class '", names[cid], "' has no image files"));
        for (const auto& file : files) {
            ImageTensor img = read_image(file.string());
            img = resize_shorter_edge(img, image_size);
            img = center_crop(img, image_size);
            images.push_back(LabeledImage{std::move(img), static_cast<long>(cid),
                                          file.string()});
        }
    }
    return images;
}

ClassSplit split_classes(const std::vector<long>& class_ids,
                         const std::array<long, 3>& ratio, uint64_t seed) {
    check_arg(class_ids.size() >= 3, "split_classes: need at least 3 classes");
    for (long r : ratio) check_arg(r >= 0, "split_classes: ratio entries must be >= 0");
    const long rsum = ratio[0] + ratio[1] + ratio[2];
    check_arg(rsum > 0, "split_classes: ratio sum must be positive");

    std::vector<long> ids = class_ids;
    std::sort(ids.begin(), ids.end());
    check_arg(std::adjacent_find(ids.begin(), ids.end()) == ids.end(),
              "split_classes: duplicate class ids");
    Rng rng = Rng::substream(seed, "split");
    rng.shuffle(ids);

    const long n = static_cast<long>(ids.size());
    std::array<long, 3> sizes{};
    long assigned = 0;
    for (int i = 0; i < 3; ++i) {
        sizes[static_cast<size_t>(i)] = n * ratio[static_cast<size_t>(i)] / rsum;
        assigned += sizes[static_cast<size_t>(i)];
    }
    long rem = n - assigned;
    for (int i = 0; i < 3 && rem > 0; ++i) {  // remainder goes base-first
        ++sizes[static_cast<size_t>(i)];
        --rem;
    }

    ClassSplit split;
    long pos = 0;
    for (long i = 0; i < sizes[0]; ++i) split.base.insert(ids[static_cast<size_t>(pos++)]);
    for (long i = 0; i < sizes[1]; ++i) split.val.insert(ids[static_cast<size_t>(pos++)]);
    for (long i = 0; i < sizes[2]; ++i) split.novel.insert(ids[static_cast<size_t>(pos++)]);
    return split;
}

void save_split(const ClassSplit& split, const std::vector<std::string>& class_names,
                const std::string& path) {
    auto names_of = [&](const std::set<long>& ids) {
        std::vector<std::string> out;
        for (long id : ids) {
            check_arg(id >= 0 && id < static_cast<long>(class_names.size()),
                      cat("save_split: class id ", id, " has no name"));
            out.push_back(class_names[static_cast<size_t>(id)]);
        }
        return out;
    };
    json j;
    j["base"] = names_of(split.base);
    j["val"] = names_of(split.val);
    j["novel"] = names_of(split.novel);
    std::ofstream out(path);
    check(out.good(), cat("save_split: cannot open '", path, "'"));
    out << j.dump(1) << "\n";
    check(out.good(), cat("save_split: write failed for '", path, "'"));
}

ClassSplit load_split(const std::vector<std::string>& class_names,
                      const std::string& path) {
    std::ifstream in(path);
    check(in.good(), cat("load_split: cannot open '", path, "'"));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(cat("load_split: malformed JSON in '", path, "': ", e.what()));
    }
    std::map<std::string, long> id_of;
    for (size_t i = 0; i < class_names.size(); ++i)
        id_of[class_names[i]] = static_cast<long>(i);
    auto ids_of = [&](const char* key) {
        std::set<long> out;
        for (const auto& name : j.at(key).get<std::vector<std::string>>()) {
            auto it = id_of.find(name);
            check(it != id_of.end(),
                  cat("load_split: unknown class '", name, "' in '", path, "'"));
            out.insert(it->second);
        }
        return out;
    };
    ClassSplit split;
    try {
        split.base = ids_of("base");
        split.val = ids_of("val");
        split.novel = ids_of("novel");
    } catch (const json::exception& e) {
        fail(cat("load_split: bad schema in '", path, "': ", e.what()));
    }
    for (long id : split.val)
        check(!split.base.count(id), cat("load_split: class id ", id, " in base and val"));
    for (long id : split.novel)
        check(!split.base.count(id) && !split.val.count(id),
              cat("load_split: class id ", id, " in multiple sets"));
    return split;
}

std::vector<LabeledImage> filter_by_classes(const std::vector<LabeledImage>& images,
                                            const std::set<long>& classes) {
    std::vector<LabeledImage> out;
    for (const auto& img : images)
        if (classes.count(img.class_id)) out.push_back(img);
    return out;
}

Episode sample_episode(const std::vector<LabeledImage>& images, long n_way, long k_shot,
                       long m_query, Rng& rng) {
    check_arg(n_way >= 1 && k_shot >= 1 && m_query >= 1,
              "sample_episode: geometry must be positive");
    std::map<long, std::vector<size_t>> by_class;
    for (size_t i = 0; i < images.size(); ++i)
        by_class[images[i].class_id].push_back(i);

    std::vector<long> classes;
    for (const auto& [cid, _] : by_class) classes.push_back(cid);
    check(static_cast<long>(classes.size()) >= n_way,
          cat("sample_episode: need ", n_way, " classes, have ", classes.size()));

    rng.shuffle(classes);
    Episode ep;
    ep.n_way = n_way;
    ep.k_shot = k_shot;
    ep.m_query = m_query;
    for (long local = 0; local < n_way; ++local) {
        const long cid = classes[static_cast<size_t>(local)];
        auto idx = by_class[cid];
        check(static_cast<long>(idx.size()) >= k_shot + m_query,
              cat("sample_episode: class ", cid, " has ", idx.size(), " images, needs ",
                  k_shot + m_query));
        rng.shuffle(idx);
        ep.class_map[cid] = local;
        for (long k = 0; k < k_shot; ++k) ep.support.push_back(images[idx[static_cast<size_t>(k)]]);
        for (long m = 0; m < m_query; ++m)
            ep.query.push_back(images[idx[static_cast<size_t>(k_shot + m)]]);
    }
    return ep;
}

JigsawSample make_jigsaw(const ImageTensor& image, const PermutationSet& perm_set,
                         Rng& rng) {
    check_arg(perm_set.n_elements == 9 && perm_set.size() >= 1,
              "make_jigsaw: permutation set must cover 9 tiles");
    ImageTensor img = image;
    if (std::min(img.dim(0), img.dim(1)) < kJigsawRegion)
        img = resize_shorter_edge(img, kJigsawRegion);

    // Draw order is fixed: scale, window y, window x, 9x(tile y, tile x), perm.
    const double scale = rng.uniform_range(0.5, 1.0);
    const long win = std::lround(scale * static_cast<double>(kJigsawRegion));
    const long y0 = rng.uniform_index(img.dim(0) - win + 1);
    const long x0 = rng.uniform_index(img.dim(1) - win + 1);
    ImageTensor region = crop(img, y0, x0, win, win);
    if (win != kJigsawRegion) region = resize_to(region, kJigsawRegion, kJigsawRegion);

    std::vector<ImageTensor> raster;
    raster.reserve(9);
    for (long gy = 0; gy < 3; ++gy) {
        for (long gx = 0; gx < 3; ++gx) {
            const long oy = rng.uniform_index(kJigsawOffsets);
            const long ox = rng.uniform_index(kJigsawOffsets);
            raster.push_back(crop(region, gy * kJigsawCell + oy, gx * kJigsawCell + ox,
                                  kJigsawTile, kJigsawTile));
        }
    }

    JigsawSample sample;
    sample.perm_index = rng.uniform_index(perm_set.size());
    const Permutation& p = perm_set.perms[static_cast<size_t>(sample.perm_index)];
    sample.tiles.reserve(9);
    for (int i = 0; i < 9; ++i)
        sample.tiles.push_back(std::move(raster[static_cast<size_t>(p[static_cast<size_t>(i)])]));
    return sample;
}

RotationSample make_rotation(const ImageTensor& image, int angle_index) {
    check_arg(angle_index >= 0 && angle_index <= 3,
              cat("make_rotation: angle index ", angle_index, " out of range"));
    return RotationSample{rotate_quarter(image, angle_index), angle_index};
}

}  // namespace fewshot
