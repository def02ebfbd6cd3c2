#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fewshot/image.hpp"
#include "fewshot/rng.hpp"

using namespace fewshot;

namespace {

ImageTensor random_image(long h, long w, long c, uint64_t seed) {
    Rng rng(seed);
    ImageTensor img({h, w, c});
    for (double& v : img.data) v = rng.uniform_real();
    return img;
}

}  // namespace

TEST_CASE("resize_shorter_edge keeps aspect ratio with rounding") {
    // 448x300 -> shorter edge 300 scales to 224, long edge 448 -> 334
    ImageTensor img = random_image(448, 300, 3, 1);
    ImageTensor out = resize_shorter_edge(img, 224);
    CHECK(out.dim(0) == 334);
    CHECK(out.dim(1) == 224);

    ImageTensor wide = random_image(300, 448, 3, 2);
    ImageTensor wout = resize_shorter_edge(wide, 224);
    CHECK(wout.dim(0) == 224);
    CHECK(wout.dim(1) == 334);
}

TEST_CASE("resize to the same size is the identity") {
    ImageTensor img = random_image(224, 224, 3, 3);
    ImageTensor out = resize_shorter_edge(img, 224);
    CHECK(out.dim(0) == 224);
    CHECK(out.dim(1) == 224);
    CHECK(out.data == img.data);
}

TEST_CASE("center_crop takes the middle window") {
    ImageTensor img({4, 6, 1});
    for (long i = 0; i < img.numel(); ++i) img.at(i) = static_cast<double>(i);
    ImageTensor out = center_crop(img, 2);
    // rows 1..2, cols 2..3
    CHECK(out.at(0, 0, 0) == img.at(1, 2, 0));
    CHECK(out.at(1, 1, 0) == img.at(2, 3, 0));
    CHECK_THROWS(center_crop(img, 7));
}

TEST_CASE("to_greyscale: fixed point, formula, replicated channels") {
    ImageTensor grey = random_image(5, 7, 3, 4);
    for (long y = 0; y < 5; ++y)
        for (long x = 0; x < 7; ++x) {
            const double v = grey.at(y, x, 0);
            grey.at(y, x, 1) = v;
            grey.at(y, x, 2) = v;
        }
    ImageTensor out = to_greyscale(grey);
    for (long i = 0; i < out.numel(); ++i)
        CHECK(out.at(i) == doctest::Approx(grey.at(i)).epsilon(1e-12));

    ImageTensor red({1, 1, 3});
    red.at(0, 0, 0) = 1.0;
    ImageTensor red_grey = to_greyscale(red);
    for (long ch = 0; ch < 3; ++ch)
        CHECK(red_grey.at(0, 0, ch) == doctest::Approx(0.299));

    ImageTensor any = random_image(6, 6, 3, 5);
    ImageTensor g = to_greyscale(any);
    for (long y = 0; y < 6; ++y)
        for (long x = 0; x < 6; ++x) {
            CHECK(g.at(y, x, 0) == g.at(y, x, 1));
            CHECK(g.at(y, x, 1) == g.at(y, x, 2));
        }

    ImageTensor single = random_image(3, 3, 1, 6);
    ImageTensor same = to_greyscale(single);
    CHECK(same.data == single.data);
}

TEST_CASE("degrade_low_resolution: dims, constants, identity, errors") {
    ImageTensor img = random_image(224, 224, 3, 7);
    ImageTensor out = degrade_low_resolution(img, 4);
    CHECK(out.dim(0) == 224);
    CHECK(out.dim(1) == 224);

    // the op is exactly down-to-56 then back up
    ImageTensor manual = resize_to(resize_to(img, 56, 56), 224, 224);
    CHECK(out.data == manual.data);

    ImageTensor constant({32, 32, 3});
    constant.fill(0.33);
    ImageTensor cout_ = degrade_low_resolution(constant, 4);
    for (double v : cout_.data) CHECK(v == doctest::Approx(0.33).epsilon(1e-12));

    ImageTensor same = degrade_low_resolution(img, 1);
    CHECK(same.data == img.data);

    CHECK_THROWS(degrade_low_resolution(img, 0));
}

TEST_CASE("rotate_quarter: identity, 180 involution, hand-checked 90") {
    ImageTensor img = random_image(9, 5, 3, 8);
    CHECK(rotate_quarter(img, 0).data == img.data);

    ImageTensor twice = rotate_quarter(rotate_quarter(img, 2), 2);
    CHECK(twice.data == img.data);

    // 2x1 column [[a],[b]] rotated 90 CCW becomes [[a, b]]
    ImageTensor col({2, 1, 1});
    col.at(0, 0, 0) = 0.25;  // a
    col.at(1, 0, 0) = 0.75;  // b
    ImageTensor row = rotate_quarter(col, 1);
    CHECK(row.dim(0) == 1);
    CHECK(row.dim(1) == 2);
    CHECK(row.at(0, 0, 0) == 0.25);
    CHECK(row.at(0, 1, 0) == 0.75);

    CHECK_THROWS(rotate_quarter(img, 4));
    CHECK_THROWS(rotate_quarter(img, -1));
}

TEST_CASE("rotate_quarter is a pixel bijection: i then (4-i)%4 restores input") {
    ImageTensor img = random_image(7, 11, 3, 9);
    for (int i = 0; i < 4; ++i) {
        ImageTensor back = rotate_quarter(rotate_quarter(img, i), (4 - i) % 4);
        CHECK(back.data == img.data);
        // swapped dims for odd turns
        ImageTensor r = rotate_quarter(img, i);
        if (i % 2 == 1) {
            CHECK(r.dim(0) == img.dim(1));
            CHECK(r.dim(1) == img.dim(0));
        } else {
            CHECK(r.dim(0) == img.dim(0));
            CHECK(r.dim(1) == img.dim(1));
        }
    }
}
