#pragma once

#include <string>
#include <vector>

#include "qnerf/common.hpp"

namespace qnerf::img {

// Interleaved RGB, values in [0,1], row-major from the top-left pixel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(std::size_t(w) * std::size_t(h) * 3, 0.0) {}

    double& at(int x, int y, int c) { return rgb[(std::size_t(y) * width + x) * 3 + std::size_t(c)]; }
    double at(int x, int y, int c) const {
        return rgb[(std::size_t(y) * width + x) * 3 + std::size_t(c)];
    }
    bool empty() const { return rgb.empty(); }
};

// PNG or JPEG, detected from the file magic.
Image load_image(const std::string& path);
// 8-bit RGB PNG.
void save_png(const std::string& path, const Image& image);

// Exact float dump for regression tests: magic "QNRFIMGF", u32 width, u32
// height (little endian), then row-major RGB float32.
void save_float_dump(const std::string& path, const Image& image);
Image load_float_dump(const std::string& path);

// Box-filter downsample to the exact target size.
Image downsample(const Image& image, int new_width, int new_height);

// Max abs per-channel difference.
double max_abs_diff(const Image& a, const Image& b);

}  // namespace qnerf::img
