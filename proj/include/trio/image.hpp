#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace trio {

// 8-bit image, row-major, interleaved channels, RGB channel order.
struct Image {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<uint8_t> px;

    Image() = default;
    Image(int h_, int w_, int c_, uint8_t fill = 0)
        : h(h_), w(w_), c(c_), px(static_cast<size_t>(h_) * w_ * c_, fill) {}

    uint8_t& at(int y, int x, int ch) {
        return px[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    uint8_t at(int y, int x, int ch) const {
        return px[(static_cast<size_t>(y) * w + x) * c + ch];
    }

    bool empty() const { return px.empty(); }

    bool operator==(const Image& o) const {
        return h == o.h && w == o.w && c == o.c && px == o.px;
    }
};

// Decoded with channels converted to RGB regardless of on-disk layout.
Image load_image(const std::filesystem::path& path);

void save_png(const std::filesystem::path& path, const Image& img);

// Luminance with fixed weights (0.299, 0.587, 0.114), rounded half-up.
// Grayscale inputs pass through.
Image to_gray(const Image& img);

} // namespace trio
