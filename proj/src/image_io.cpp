#include "fewshot/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "fewshot/common.hpp"

namespace fewshot {

ImageTensor read_image(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
    check(!mat.empty(), cat("read_image: cannot decode '", path, "'"));
    const long h = mat.rows, w = mat.cols;
    ImageTensor img({h, w, 3});
    double* dst = img.ptr();
    for (long y = 0; y < h; ++y) {
        const uchar* row = mat.ptr<uchar>(static_cast<int>(y));
        for (long x = 0; x < w; ++x) {
            // OpenCV decodes BGR
            dst[(y * w + x) * 3 + 0] = row[x * 3 + 2] / 255.0;
            dst[(y * w + x) * 3 + 1] = row[x * 3 + 1] / 255.0;
            dst[(y * w + x) * 3 + 2] = row[x * 3 + 0] / 255.0;
        }
    }
    return img;
}

void write_png_grey8(const std::string& path, const Tensor& map) {
    check_arg(map.ndim() == 2, "write_png_grey8: expected H x W map");
    const long h = map.dim(0), w = map.dim(1);
    cv::Mat mat(static_cast<int>(h), static_cast<int>(w), CV_8UC1);
    for (long y = 0; y < h; ++y) {
        uchar* row = mat.ptr<uchar>(static_cast<int>(y));
        for (long x = 0; x < w; ++x) {
            double v = std::clamp(map.at(y, x), 0.0, 1.0);
            row[x] = static_cast<uchar>(std::lround(v * 255.0));
        }
    }
    check(cv::imwrite(path, mat), cat("write_png_grey8: cannot write '", path, "'"));
}

void write_png_rgb8(const std::string& path, const ImageTensor& img) {
    check_arg(img.ndim() == 3 && img.dim(2) == 3, "write_png_rgb8: expected H x W x 3");
    const long h = img.dim(0), w = img.dim(1);
    cv::Mat mat(static_cast<int>(h), static_cast<int>(w), CV_8UC3);
    const double* src = img.ptr();
    for (long y = 0; y < h; ++y) {
        uchar* row = mat.ptr<uchar>(static_cast<int>(y));
        for (long x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                double v = std::clamp(src[(y * w + x) * 3 + (2 - ch)], 0.0, 1.0);
                row[x * 3 + ch] = static_cast<uchar>(std::lround(v * 255.0));
            }
        }
    }
    check(cv::imwrite(path, mat), cat("write_png_rgb8: cannot write '", path, "'"));
}

}  // namespace fewshot
