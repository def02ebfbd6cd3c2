#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fewshot/image.hpp"
#include "fewshot/permset.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

struct LabeledImage {
    ImageTensor image;
    long class_id = 0;
    std::string source_path;
};

struct ClassSplit {
    std::set<long> base;
    std::set<long> val;
    std::set<long> novel;
};

// One N-way K-shot task. Support and query are class-major: local class l
// owns support[l*K .. (l+1)*K) and query[l*M .. (l+1)*M).
struct Episode {
    long n_way = 0, k_shot = 0, m_query = 0;
    std::vector<LabeledImage> support;
    std::vector<LabeledImage> query;
    std::map<long, long> class_map;  // global class id -> local index
};

struct JigsawSample {
    std::vector<ImageTensor> tiles;  // 9 tiles, each 64 x 64 x C, raster order permuted
    long perm_index = 0;
};

struct RotationSample {
    ImageTensor image;
    int angle_index = 0;  // quarter-turns counter-clockwise
};

// Loads root/<class>/<image files>; class ids follow lexicographic directory
// order, files within a class are read in lexicographic order. Every image is
// resized so its shorter edge equals image_size, then center-cropped square.
std::vector<LabeledImage> load_dataset(const std::string& root_dir, long image_size);

// Sorted class directory names under root (the id -> name mapping).
std::vector<std::string> list_class_names(const std::string& root_dir);

// Deterministic ratio partition: class ids are shuffled with the seed, sizes
// are floor(ratio-proportional) with the remainder assigned base-first.
ClassSplit split_classes(const std::vector<long>& class_ids,
                         const std::array<long, 3>& ratio, uint64_t seed);

// Split file: {"base": [names], "val": [names], "novel": [names]}.
void save_split(const ClassSplit& split, const std::vector<std::string>& class_names,
                const std::string& path);
ClassSplit load_split(const std::vector<std::string>& class_names,
                      const std::string& path);

std::vector<LabeledImage> filter_by_classes(const std::vector<LabeledImage>& images,
                                            const std::set<long>& classes);

Episode sample_episode(const std::vector<LabeledImage>& images, long n_way, long k_shot,
                       long m_query, Rng& rng);

// Jigsaw input: random-scale 255x255 crop (images with a shorter edge under
// 255 are upscaled first), 3x3 grid of 85x85 cells, one 64x64 crop per cell,
// tiles reordered by a permutation drawn from the set.
JigsawSample make_jigsaw(const ImageTensor& image, const PermutationSet& perm_set,
                         Rng& rng);

RotationSample make_rotation(const ImageTensor& image, int angle_index);

constexpr long kJigsawRegion = 255;
constexpr long kJigsawCell = 85;
constexpr long kJigsawTile = 64;
constexpr long kJigsawOffsets = 21;  // per-axis valid offsets sampled per tile

}  // namespace fewshot
