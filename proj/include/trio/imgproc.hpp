#pragma once

#include "trio/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

namespace trio::imgproc {

using trio::Image;

// ---------------------------------------------------------------------------
// Filter bank parameters (stage-1 manual feature extraction)
// ---------------------------------------------------------------------------

enum class PosterizeMode { truncate, nearest };

struct FilterSpec {
    // Sobel kernels fixed: kx = [[-1,0,1],[-2,0,2],[-1,0,1]], ky = kx^T.
    int posterize_bits = 3;
    PosterizeMode posterize_mode = PosterizeMode::truncate;
    // Emboss kernel fixed: [[-1,-1,0],[-1,0,1],[0,1,1]], bias 128.
    static constexpr int emboss_bias = 128;
};

struct FilteredStack {
    Image original;   // H x W x 3
    Image sobel_mag;  // H x W x 1
    Image posterized; // H x W x 3
    Image embossed;   // H x W x 3
};

struct ClaheParams {
    int tiles = 8;       // grid is tiles x tiles
    double clip = 2.0;   // clip limit as a multiple of the uniform bin count
};

// Sampling ranges for the nine augmentations. Degenerate ranges at the
// identity value reproduce the input bit-exactly (after resize).
struct AugmentSpec {
    std::pair<double, double> rotation_deg{-20.0, 20.0};
    std::pair<double, double> crop_fraction{0.85, 1.0};
    std::pair<double, double> shear_deg{-10.0, 10.0};
    std::pair<double, double> gauss_sigma{0.0, 2.0};
    std::pair<double, double> pixel_noise_frac{0.0, 0.01};
    std::pair<double, double> blur_radius{0.0, 1.5};
    std::pair<double, double> zoom_factor{0.9, 1.1};
    double flip_prob = 0.5;
    std::pair<double, double> brightness_delta{-0.15, 0.15};

    static AugmentSpec identity() {
        AugmentSpec s;
        s.rotation_deg = {0.0, 0.0};
        s.crop_fraction = {1.0, 1.0};
        s.shear_deg = {0.0, 0.0};
        s.gauss_sigma = {0.0, 0.0};
        s.pixel_noise_frac = {0.0, 0.0};
        s.blur_radius = {0.0, 0.0};
        s.zoom_factor = {1.0, 1.0};
        s.flip_prob = 0.0;
        s.brightness_delta = {0.0, 0.0};
        return s;
    }
};

// ---------------------------------------------------------------------------
// Operations. All pure and deterministic: (input, spec, seed) -> identical
// bytes regardless of thread count.
// ---------------------------------------------------------------------------

// Tight bounding box of pixels whose max channel exceeds border_threshold,
// padded to square with black.
Image crop_fundus(const Image& img, uint8_t border_threshold);

// Contrast-limited adaptive equalization on the luminance channel; RGB is
// rescaled by the luminance ratio so hue is preserved.
Image balance_histogram(const Image& img, const ClaheParams& params = {});

// Gradient magnitude on the luminance plane: sqrt(Gx^2 + Gy^2), replicate
// border, clipped to [0,255], rounded half-up.
Image sobel_magnitude(const Image& img);

Image posterize(const Image& img, int bits,
                PosterizeMode mode = PosterizeMode::truncate);

Image emboss(const Image& img);

FilteredStack make_stack(const Image& img, const FilterSpec& spec = {});

// Geometric warp (rotation/shear/zoom/flip/crop) then resize to
// out_size x out_size, then brightness, Gaussian noise, salt-and-pepper
// noise and blur, all with parameters drawn from `seed`.
Image augment(const Image& img, const AugmentSpec& spec, uint64_t seed, int out_size);

// Bilinear resize (pixel-center aligned); same-size input is copied verbatim.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Tagged binary container for the four stack planes (magic FSTK1; per plane:
// u32 name length, name bytes, u32 h, u32 w, u32 c, raw pixels, little-endian).
void write_stack(const std::filesystem::path& path, const FilteredStack& stack);
FilteredStack read_stack(const std::filesystem::path& path);

} // namespace trio::imgproc
