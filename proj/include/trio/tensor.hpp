#pragma once

#include "trio/image.hpp"
#include "trio/imgproc.hpp"

#include <vector>

namespace trio::nets {

// Channel-major (CHW) float tensor, pixel values scaled to [0,1].
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, float fill = 0.0f)
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

    float& at(int ch, int y, int x) {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    float at(int ch, int y, int x) const {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }

    size_t size() const { return v.size(); }
};

Tensor tensor_from_image(const Image& img);

// 10-channel stage-1 input: RGB(3) + sobel(1) + posterized(3) + embossed(3).
Tensor tensor_from_stack(const imgproc::FilteredStack& stack);

} // namespace trio::nets
