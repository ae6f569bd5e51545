#include "trio/imgproc.hpp"

#include "trio/error.hpp"
#include "trio/rng.hpp"
#include "trio/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace trio::imgproc {

namespace {

uint8_t clip_round(double v) {
    v = std::floor(v + 0.5);
    if (v < 0.0) return 0;
    if (v > 255.0) return 255;
    return static_cast<uint8_t>(v);
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

} // namespace

// ---------------------------------------------------------------------------
// crop_fundus
// ---------------------------------------------------------------------------

Image crop_fundus(const Image& img, uint8_t border_threshold) {
    int min_x = img.w, max_x = -1, min_y = img.h, max_y = -1;
#pragma omp parallel for schedule(static) reduction(min : min_x, min_y) reduction(max : max_x, max_y)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            uint8_t m = 0;
            for (int ch = 0; ch < img.c; ++ch) m = std::max(m, img.at(y, x, ch));
            if (m > border_threshold) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    if (max_x < 0) fail_data("crop_fundus: no pixel exceeds the border threshold");

    const int bw = max_x - min_x + 1;
    const int bh = max_y - min_y + 1;
    const int side = std::max(bw, bh);
    Image out(side, side, img.c, 0);
    const int off_x = (side - bw) / 2;
    const int off_y = (side - bh) / 2;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < bh; ++y) {
        for (int x = 0; x < bw; ++x) {
            for (int ch = 0; ch < img.c; ++ch) {
                out.at(y + off_y, x + off_x, ch) = img.at(y + min_y, x + min_x, ch);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// balance_histogram — CLAHE on the luminance plane
// ---------------------------------------------------------------------------

namespace {

// Per-tile clipped-histogram equalization mapping. Excess above the clip
// count is redistributed uniformly; the remainder is handed out one per bin
// from bin 0 upward so the total pixel count is preserved exactly.
void tile_mapping(const std::vector<int>& hist, int npix, double clip, uint8_t map[256]) {
    const int clip_count = std::max(1, static_cast<int>(clip * npix / 256.0));
    int bins[256];
    long long excess = 0;
    for (int i = 0; i < 256; ++i) {
        if (hist[i] > clip_count) {
            excess += hist[i] - clip_count;
            bins[i] = clip_count;
        } else {
            bins[i] = hist[i];
        }
    }
    const long long per_bin = excess / 256;
    long long rem = excess % 256;
    for (int i = 0; i < 256; ++i) {
        bins[i] += static_cast<int>(per_bin);
        if (rem > 0) {
            ++bins[i];
            --rem;
        }
    }
    long long cdf = 0;
    for (int i = 0; i < 256; ++i) {
        cdf += bins[i];
        map[i] = clip_round(255.0 * static_cast<double>(cdf) / npix);
    }
}

} // namespace

Image balance_histogram(const Image& img, const ClaheParams& params) {
    const int g = std::max(1, params.tiles);
    const Image gray = to_gray(img);

    // Tile pixel ranges and center coordinates.
    std::vector<int> tx0(g + 1), ty0(g + 1);
    for (int i = 0; i <= g; ++i) {
        tx0[i] = static_cast<int>(static_cast<long long>(i) * img.w / g);
        ty0[i] = static_cast<int>(static_cast<long long>(i) * img.h / g);
    }
    std::vector<double> cx(g), cy(g);
    for (int i = 0; i < g; ++i) {
        cx[i] = (tx0[i] + tx0[i + 1] - 1) / 2.0;
        cy[i] = (ty0[i] + ty0[i + 1] - 1) / 2.0;
    }

    std::vector<std::array<uint8_t, 256>> maps(static_cast<size_t>(g) * g);
#pragma omp parallel for schedule(static) collapse(2)
    for (int ty = 0; ty < g; ++ty) {
        for (int tx = 0; tx < g; ++tx) {
            std::vector<int> hist(256, 0);
            for (int y = ty0[ty]; y < ty0[ty + 1]; ++y) {
                for (int x = tx0[tx]; x < tx0[tx + 1]; ++x) {
                    ++hist[gray.at(y, x, 0)];
                }
            }
            const int npix = (ty0[ty + 1] - ty0[ty]) * (tx0[tx + 1] - tx0[tx]);
            if (npix > 0) tile_mapping(hist, npix, params.clip, maps[static_cast<size_t>(ty) * g + tx].data());
        }
    }

    auto map_at = [&](int ty, int tx, uint8_t v) -> double {
        return maps[static_cast<size_t>(ty) * g + tx][v];
    };

    Image out(img.h, img.w, img.c);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y) {
        // vertical tile interval
        int iy = 0;
        while (iy + 1 < g && cy[iy + 1] <= y) ++iy;
        double wy = 0.0;
        int iy1 = iy;
        if (y >= cy[g - 1]) {
            iy = g - 1;
        } else if (y > cy[iy] && iy + 1 < g) {
            iy1 = iy + 1;
            wy = (y - cy[iy]) / (cy[iy1] - cy[iy]);
        }
        for (int x = 0; x < img.w; ++x) {
            int ix = 0;
            while (ix + 1 < g && cx[ix + 1] <= x) ++ix;
            double wx = 0.0;
            int ix1 = ix;
            if (x >= cx[g - 1]) {
                ix = g - 1;
                ix1 = ix;
            } else if (x > cx[ix] && ix + 1 < g) {
                ix1 = ix + 1;
                wx = (x - cx[ix]) / (cx[ix1] - cx[ix]);
            }
            const uint8_t v = gray.at(y, x, 0);
            const double m00 = map_at(iy, ix, v), m01 = map_at(iy, ix1, v);
            const double m10 = map_at(iy1, ix, v), m11 = map_at(iy1, ix1, v);
            const double mapped = (1 - wy) * ((1 - wx) * m00 + wx * m01) +
                                  wy * ((1 - wx) * m10 + wx * m11);
            const uint8_t yp = clip_round(mapped);
            if (img.c == 1) {
                out.at(y, x, 0) = yp;
                continue;
            }
            const uint8_t yv = v;
            for (int ch = 0; ch < img.c; ++ch) {
                if (yv == 0) {
                    out.at(y, x, ch) = img.at(y, x, ch); // no luminance to rescale
                } else {
                    out.at(y, x, ch) =
                        clip_round(img.at(y, x, ch) * static_cast<double>(yp) / yv);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Filter bank
// ---------------------------------------------------------------------------

Image sobel_magnitude(const Image& img) {
    const Image gray = to_gray(img);
    Image out(img.h, img.w, 1);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            int gx = 0, gy = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = clampi(y + dy, 0, img.h - 1);
                    const int xx = clampi(x + dx, 0, img.w - 1);
                    const int v = gray.at(yy, xx, 0);
                    // kx = [[-1,0,1],[-2,0,2],[-1,0,1]], ky = kx^T
                    const int kx = dx * (dy == 0 ? 2 : 1);
                    const int ky = dy * (dx == 0 ? 2 : 1);
                    gx += kx * v;
                    gy += ky * v;
                }
            }
            const double mag = std::sqrt(static_cast<double>(gx) * gx +
                                         static_cast<double>(gy) * gy);
            out.at(y, x, 0) = clip_round(std::min(mag, 255.0));
        }
    }
    return out;
}

Image posterize(const Image& img, int bits, PosterizeMode mode) {
    if (bits < 1 || bits > 8) {
        fail_data("posterize: bits must be in [1,8], got " + std::to_string(bits));
    }
    const int step = 1 << (8 - bits);
    const uint8_t mask = static_cast<uint8_t>(~(step - 1));
    Image out(img.h, img.w, img.c);
    const size_t n = img.px.size();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        const uint8_t v = img.px[static_cast<size_t>(i)];
        if (mode == PosterizeMode::truncate) {
            out.px[static_cast<size_t>(i)] = v & mask;
        } else {
            const double q = std::floor(static_cast<double>(v) / step + 0.5) * step;
            out.px[static_cast<size_t>(i)] = static_cast<uint8_t>(std::min(q, 255.0));
        }
    }
    return out;
}

Image emboss(const Image& img) {
    static constexpr int kernel[3][3] = {{-1, -1, 0}, {-1, 0, 1}, {0, 1, 1}};
    Image out(img.h, img.w, img.c);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int ch = 0; ch < img.c; ++ch) {
                int acc = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = clampi(y + dy, 0, img.h - 1);
                        const int xx = clampi(x + dx, 0, img.w - 1);
                        acc += kernel[dy + 1][dx + 1] * img.at(yy, xx, ch);
                    }
                }
                acc += FilterSpec::emboss_bias;
                out.at(y, x, ch) = static_cast<uint8_t>(clampi(acc, 0, 255));
            }
        }
    }
    return out;
}

FilteredStack make_stack(const Image& img, const FilterSpec& spec) {
    FilteredStack stack;
    stack.original = img;
    stack.sobel_mag = sobel_magnitude(img);
    stack.posterized = posterize(img, spec.posterize_bits, spec.posterize_mode);
    stack.embossed = emboss(img);
    return stack;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h == img.h && out_w == img.w) return img;
    Image out(out_h, out_w, img.c);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.h - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.w - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < img.c; ++ch) {
                const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch)) +
                                 wy * ((1 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch));
                out.at(y, x, ch) = clip_round(v);
            }
        }
    }
    return out;
}

namespace {

Image mirror_horizontal(const Image& img) {
    Image out(img.h, img.w, img.c);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int ch = 0; ch < img.c; ++ch) {
                out.at(y, x, ch) = img.at(y, img.w - 1 - x, ch);
            }
        }
    }
    return out;
}

// Inverse-mapped affine warp about the image center, bilinear sampling,
// black fill outside. Sample coordinates within 1e-9 of an integer are
// snapped so exact-angle warps stay on the pixel grid.
Image warp_affine(const Image& img, double rot_deg, double shear_deg, double zoom) {
    const double th = rot_deg * 3.14159265358979323846 / 180.0;
    const double sh = std::tan(shear_deg * 3.14159265358979323846 / 180.0);
    // forward A = R(th) * Shear(sh) * zoom; work with the inverse
    const double a00 = std::cos(th) * zoom, a01 = (std::cos(th) * sh - std::sin(th)) * zoom;
    const double a10 = std::sin(th) * zoom, a11 = (std::sin(th) * sh + std::cos(th)) * zoom;
    const double det = a00 * a11 - a01 * a10;
    const double i00 = a11 / det, i01 = -a01 / det;
    const double i10 = -a10 / det, i11 = a00 / det;
    const double cx = (img.w - 1) / 2.0, cy = (img.h - 1) / 2.0;

    auto snap = [](double v) {
        const double r = std::floor(v + 0.5);
        return std::abs(v - r) < 1e-9 ? r : v;
    };

    Image out(img.h, img.w, img.c, 0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double sxf = snap(i00 * dx + i01 * dy + cx);
            const double syf = snap(i10 * dx + i11 * dy + cy);
            if (sxf < 0 || syf < 0 || sxf > img.w - 1 || syf > img.h - 1) continue;
            const int x0 = static_cast<int>(sxf), y0 = static_cast<int>(syf);
            const int x1 = std::min(x0 + 1, img.w - 1), y1 = std::min(y0 + 1, img.h - 1);
            const double wx = sxf - x0, wy = syf - y0;
            for (int ch = 0; ch < img.c; ++ch) {
                const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch)) +
                                 wy * ((1 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch));
                out.at(y, x, ch) = clip_round(v);
            }
        }
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    const int half = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<double> k(2 * half + 1);
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        k[i + half] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + half];
    }
    for (auto& v : k) v /= sum;

    // separable: horizontal into a double buffer, then vertical
    std::vector<double> tmp(img.px.size());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i) {
                    acc += k[i + half] * img.at(y, clampi(x + i, 0, img.w - 1), ch);
                }
                tmp[(static_cast<size_t>(y) * img.w + x) * img.c + ch] = acc;
            }
        }
    }
    Image out(img.h, img.w, img.c);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i) {
                    const int yy = clampi(y + i, 0, img.h - 1);
                    acc += k[i + half] * tmp[(static_cast<size_t>(yy) * img.w + x) * img.c + ch];
                }
                out.at(y, x, ch) = clip_round(acc);
            }
        }
    }
    return out;
}

} // namespace

Image augment(const Image& img, const AugmentSpec& spec, uint64_t seed, int out_size) {
    Rng rng(seed);
    // Parameter draw order is fixed; changing it would change every seeded run.
    const double rot = rng.uniform(spec.rotation_deg.first, spec.rotation_deg.second);
    const double crop = rng.uniform(spec.crop_fraction.first, spec.crop_fraction.second);
    const double shear = rng.uniform(spec.shear_deg.first, spec.shear_deg.second);
    const double gauss = rng.uniform(spec.gauss_sigma.first, spec.gauss_sigma.second);
    const double pixfrac = rng.uniform(spec.pixel_noise_frac.first, spec.pixel_noise_frac.second);
    const double blur = rng.uniform(spec.blur_radius.first, spec.blur_radius.second);
    const double zoom = rng.uniform(spec.zoom_factor.first, spec.zoom_factor.second);
    const bool flip = rng.bernoulli(spec.flip_prob);
    const double bright = rng.uniform(spec.brightness_delta.first, spec.brightness_delta.second);

    if (crop <= 0.0) fail_data("augment: crop fraction must be positive");

    Image work = img;
    if (flip) work = mirror_horizontal(work);
    if (rot != 0.0 || shear != 0.0 || zoom != 1.0) work = warp_affine(work, rot, shear, zoom);

    if (crop < 1.0) {
        const int side = std::max(1, static_cast<int>(std::floor(std::min(work.h, work.w) * crop + 0.5)));
        const int ox = rng.range_int(0, work.w - side);
        const int oy = rng.range_int(0, work.h - side);
        Image cropped(side, side, work.c);
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                for (int ch = 0; ch < work.c; ++ch) {
                    cropped.at(y, x, ch) = work.at(y + oy, x + ox, ch);
                }
            }
        }
        work = std::move(cropped);
    }

    work = resize_bilinear(work, out_size, out_size);

    if (bright != 0.0) {
        const double scale = 1.0 + bright;
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(work.px.size()); ++i) {
            work.px[static_cast<size_t>(i)] = clip_round(work.px[static_cast<size_t>(i)] * scale);
        }
    }

    if (gauss > 0.0) {
        // counter-based draws: per-pixel values independent of thread schedule
        const uint64_t nseed = rng.next();
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(work.px.size()); ++i) {
            const uint64_t h1 = hash_u64(nseed, static_cast<uint64_t>(i) * 2);
            const uint64_t h2 = hash_u64(nseed, static_cast<uint64_t>(i) * 2 + 1);
            double u1 = static_cast<double>(h1 >> 11) * 0x1.0p-53;
            const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
            if (u1 <= 1e-300) u1 = 1e-300;
            const double n = std::sqrt(-2.0 * std::log(u1)) *
                             std::cos(2.0 * 3.14159265358979323846 * u2);
            work.px[static_cast<size_t>(i)] =
                clip_round(work.px[static_cast<size_t>(i)] + n * gauss);
        }
    }

    if (pixfrac > 0.0) {
        const long long npix = static_cast<long long>(work.h) * work.w;
        const long long k = static_cast<long long>(std::floor(pixfrac * npix + 0.5));
        for (long long i = 0; i < k; ++i) {
            const int x = rng.range_int(0, work.w - 1);
            const int y = rng.range_int(0, work.h - 1);
            const uint8_t v = rng.bernoulli(0.5) ? 255 : 0;
            for (int ch = 0; ch < work.c; ++ch) work.at(y, x, ch) = v;
        }
    }

    if (blur > 0.0) work = gaussian_blur(work, blur);

    return work;
}

// ---------------------------------------------------------------------------
// Stack container
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32(const std::string& buf, size_t& pos) {
    if (pos + 4 > buf.size()) fail_data("stack file truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
}

void put_plane(std::string& buf, const std::string& name, const Image& plane) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf += name;
    put_u32(buf, static_cast<uint32_t>(plane.h));
    put_u32(buf, static_cast<uint32_t>(plane.w));
    put_u32(buf, static_cast<uint32_t>(plane.c));
    buf.append(reinterpret_cast<const char*>(plane.px.data()), plane.px.size());
}

Image get_plane(const std::string& buf, size_t& pos, std::string& name) {
    const uint32_t nlen = get_u32(buf, pos);
    if (pos + nlen > buf.size()) fail_data("stack file truncated");
    name = buf.substr(pos, nlen);
    pos += nlen;
    const uint32_t h = get_u32(buf, pos);
    const uint32_t w = get_u32(buf, pos);
    const uint32_t c = get_u32(buf, pos);
    Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    if (pos + img.px.size() > buf.size()) fail_data("stack file truncated");
    std::memcpy(img.px.data(), buf.data() + pos, img.px.size());
    pos += img.px.size();
    return img;
}

constexpr char kStackMagic[] = "FSTK1";

} // namespace

void write_stack(const std::filesystem::path& path, const FilteredStack& stack) {
    std::string buf;
    buf += kStackMagic;
    put_plane(buf, "original", stack.original);
    put_plane(buf, "sobel", stack.sobel_mag);
    put_plane(buf, "posterized", stack.posterized);
    put_plane(buf, "embossed", stack.embossed);
    atomic_write_file(path, buf);
}

FilteredStack read_stack(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 5 || buf.compare(0, 5, kStackMagic) != 0) {
        fail_data("not a stack file (bad magic): " + path.string());
    }
    size_t pos = 5;
    FilteredStack stack;
    while (pos < buf.size()) {
        std::string name;
        Image plane = get_plane(buf, pos, name);
        if (name == "original") stack.original = std::move(plane);
        else if (name == "sobel") stack.sobel_mag = std::move(plane);
        else if (name == "posterized") stack.posterized = std::move(plane);
        else if (name == "embossed") stack.embossed = std::move(plane);
        else fail_data("unknown stack plane: " + name);
    }
    if (stack.original.empty() || stack.sobel_mag.empty() || stack.posterized.empty() ||
        stack.embossed.empty()) {
        fail_data("incomplete stack file: " + path.string());
    }
    return stack;
}

} // namespace trio::imgproc
