#pragma once

#include "fewshot/tensor.hpp"

namespace fewshot {

// Images are Tensors of shape {height, width, channels} with values in [0,1].
using ImageTensor = Tensor;

ImageTensor resize_to(const ImageTensor& img, long out_h, long out_w);

// Scales so the shorter edge equals `size`, preserving aspect ratio
// (longer edge rounded to nearest).
ImageTensor resize_shorter_edge(const ImageTensor& img, long size);

ImageTensor crop(const ImageTensor& img, long y0, long x0, long h, long w);
ImageTensor center_crop(const ImageTensor& img, long size);

// Exact 90-degree-multiple rotation, counter-clockwise, as a pixel permutation.
ImageTensor rotate_quarter(const ImageTensor& img, int times);

// Luminance 0.299 R + 0.587 G + 0.114 B replicated to three channels;
// single-channel input is returned unchanged.
ImageTensor to_greyscale(const ImageTensor& img);

// Down-sample by `factor`, then bilinearly up-sample back to the input size.
ImageTensor degrade_low_resolution(const ImageTensor& img, long factor = 4);

}  // namespace fewshot
