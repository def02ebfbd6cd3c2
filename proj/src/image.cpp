#include "fewshot/image.hpp"

#include <cmath>

#include "fewshot/common.hpp"
#include "fewshot/kernels.hpp"

namespace fewshot {

namespace {

void check_image(const ImageTensor& img) {
    check_arg(img.ndim() == 3, "image: expected H x W x C tensor");
    check_arg(img.dim(0) >= 1 && img.dim(1) >= 1, "image: empty spatial dims");
    check_arg(img.dim(2) == 1 || img.dim(2) == 3, "image: channels must be 1 or 3");
}

}  // namespace

ImageTensor resize_to(const ImageTensor& img, long out_h, long out_w) {
    check_image(img);
    check_arg(out_h >= 1 && out_w >= 1, "resize_to: output dims must be positive");
    ImageTensor out({out_h, out_w, img.dim(2)});
    kern::resize_bilinear_hwc(img.ptr(), img.dim(0), img.dim(1), img.dim(2), out.ptr(),
                              out_h, out_w);
    return out;
}

ImageTensor resize_shorter_edge(const ImageTensor& img, long size) {
    check_image(img);
    check_arg(size >= 1, "resize_shorter_edge: size must be positive");
    const long h = img.dim(0), w = img.dim(1);
    long nh, nw;
    if (h <= w) {
        nh = size;
        nw = w * size / h;  // truncate: 448x300 at 224 -> 334x224
    } else {
        nw = size;
        nh = h * size / w;
    }
    return resize_to(img, nh, nw);
}

ImageTensor crop(const ImageTensor& img, long y0, long x0, long h, long w) {
    check_image(img);
    check_arg(y0 >= 0 && x0 >= 0 && h >= 1 && w >= 1 && y0 + h <= img.dim(0) &&
                  x0 + w <= img.dim(1),
              "crop: window out of bounds");
    const long c = img.dim(2);
    ImageTensor out({h, w, c});
    for (long y = 0; y < h; ++y) {
        const double* src = img.ptr() + ((y0 + y) * img.dim(1) + x0) * c;
        double* dst = out.ptr() + y * w * c;
        std::copy(src, src + w * c, dst);
    }
    return out;
}

ImageTensor center_crop(const ImageTensor& img, long size) {
    check_arg(img.dim(0) >= size && img.dim(1) >= size,
              "center_crop: image smaller than crop size");
    const long y0 = (img.dim(0) - size) / 2;
    const long x0 = (img.dim(1) - size) / 2;
    return crop(img, y0, x0, size, size);
}

ImageTensor rotate_quarter(const ImageTensor& img, int times) {
    check_image(img);
    check_arg(times >= 0 && times <= 3, "rotate_quarter: index must be in {0,1,2,3}");
    const long h = img.dim(0), w = img.dim(1), c = img.dim(2);
    ImageTensor out(times % 2 == 0 ? std::vector<long>{h, w, c}
                                   : std::vector<long>{w, h, c});
    kern::rotate90_hwc(img.ptr(), h, w, c, times, out.ptr());
    return out;
}

ImageTensor to_greyscale(const ImageTensor& img) {
    check_image(img);
    if (img.dim(2) == 1) return img;
    const long h = img.dim(0), w = img.dim(1);
    ImageTensor out({h, w, 3});
    const double* src = img.ptr();
    double* dst = out.ptr();
    const long pixels = h * w;
    for (long i = 0; i < pixels; ++i) {
        const double lum =
            0.299 * src[i * 3] + 0.587 * src[i * 3 + 1] + 0.114 * src[i * 3 + 2];
        dst[i * 3] = dst[i * 3 + 1] = dst[i * 3 + 2] = lum;
    }
    return out;
}

ImageTensor degrade_low_resolution(const ImageTensor& img, long factor) {
    check_image(img);
    check_arg(factor >= 1, "degrade_low_resolution: factor must be >= 1");
    if (factor == 1) return img;
    const long h = img.dim(0), w = img.dim(1);
    const long lh = std::max<long>(1, std::lround(static_cast<double>(h) /
                                                  static_cast<double>(factor)));
    const long lw = std::max<long>(1, std::lround(static_cast<double>(w) /
                                                  static_cast<double>(factor)));
    ImageTensor low = resize_to(img, lh, lw);
    return resize_to(low, h, w);
}

}  // namespace fewshot
