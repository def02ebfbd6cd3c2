#pragma once

#include <string>

#include "fewshot/image.hpp"

namespace fewshot {

// Decodes a PNG/JPEG file to an RGB image in [0,1]. Throws with the path on failure.
ImageTensor read_image(const std::string& path);

// Writes an H x W map of values in [0,1] as an 8-bit greyscale PNG.
void write_png_grey8(const std::string& path, const Tensor& map);

// Writes an H x W x 3 image in [0,1] as an 8-bit RGB PNG.
void write_png_rgb8(const std::string& path, const ImageTensor& img);

}  // namespace fewshot
