#include "trio/synth.hpp"

#include "trio/csv.hpp"
#include "trio/dataset.hpp"
#include "trio/error.hpp"
#include "trio/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace trio::cli {

namespace {

uint8_t clip_u8(double v) {
    if (v < 0.0) return 0;
    if (v > 255.0) return 255;
    return static_cast<uint8_t>(std::floor(v + 0.5));
}

void add_rgb(Image& img, int y, int x, double r, double g, double b) {
    if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
    img.at(y, x, 0) = clip_u8(img.at(y, x, 0) + r);
    img.at(y, x, 1) = clip_u8(img.at(y, x, 1) + g);
    img.at(y, x, 2) = clip_u8(img.at(y, x, 2) + b);
}

// Motif family: even ids are bright blob clusters, odd ids are dark streaks;
// position/angle vary with the id so all twelve stay distinguishable.
void draw_motif(Image& img, int motif, double cx, double cy, double radius, Rng& rng) {
    const int sz = img.w;
    if (motif % 2 == 0) {
        // bright blobs at canonical offsets rotated by the motif id
        const double base_angle = motif * 0.5236; // 30 degrees per id
        for (int b = 0; b < 3; ++b) {
            const double ang = base_angle + b * 2.094; // 120 degrees apart
            const double rr = radius * 0.45;
            const double bx = cx + rr * std::cos(ang) + rng.uniform(-2.0, 2.0);
            const double by = cy + rr * std::sin(ang) + rng.uniform(-2.0, 2.0);
            const double blob_r = 3.5 + rng.uniform(-0.5, 0.5);
            for (int y = 0; y < sz; ++y) {
                for (int x = 0; x < sz; ++x) {
                    const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                    const double fall = std::exp(-d2 / (2.0 * blob_r * blob_r));
                    if (fall > 0.01) add_rgb(img, y, x, 80.0 * fall, 72.0 * fall, 28.0 * fall);
                }
            }
        }
    } else {
        // dark streak through the disc
        const double ang = motif * 0.5236 + rng.uniform(-0.26, 0.26);
        const double nx = std::cos(ang), ny = std::sin(ang);
        const double width = 2.6 + rng.uniform(-0.4, 0.4);
        for (int y = 0; y < sz; ++y) {
            for (int x = 0; x < sz; ++x) {
                const double ddisc = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
                if (ddisc > radius * 0.95) continue;
                const double dist = std::abs((x - cx) * nx + (y - cy) * ny);
                if (dist < width) {
                    const double fall = 1.0 - dist / width;
                    add_rgb(img, y, x, -85.0 * fall, -62.0 * fall, -30.0 * fall);
                }
            }
        }
    }
}

} // namespace

Image render_synthetic_image(const SynthParams& params, uint64_t image_seed,
                             const std::vector<int>& motifs) {
    const int sz = params.size;
    Rng rng(image_seed);
    Image img(sz, sz, 3, 0);

    const double cx = sz / 2.0 + rng.uniform(-1.5, 1.5);
    const double cy = sz / 2.0 + rng.uniform(-1.5, 1.5);
    const double radius = sz * 0.42 + rng.uniform(-1.5, 1.5);
    const double bright = rng.uniform(-10.0, 10.0);

    // base disc with radial falloff
    for (int y = 0; y < sz; ++y) {
        for (int x = 0; x < sz; ++x) {
            const double d = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
            if (d > radius) continue;
            const double fall = 1.0 - 0.35 * (d / radius) * (d / radius);
            img.at(y, x, 0) = clip_u8((178.0 + bright) * fall);
            img.at(y, x, 1) = clip_u8((92.0 + bright * 0.5) * fall);
            img.at(y, x, 2) = clip_u8(34.0 * fall);
        }
    }

    // a few vessel-like dark chords for texture
    for (int v = 0; v < 3; ++v) {
        const double ang = rng.uniform(0.0, 3.14159265358979323846);
        const double off = rng.uniform(-radius * 0.4, radius * 0.4);
        const double nx = std::cos(ang), ny = std::sin(ang);
        for (int y = 0; y < sz; ++y) {
            for (int x = 0; x < sz; ++x) {
                const double ddisc = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
                if (ddisc > radius) continue;
                const double dist = std::abs((x - cx) * nx + (y - cy) * ny - off);
                if (dist < 0.8) add_rgb(img, y, x, -22.0, -12.0, -5.0);
            }
        }
    }

    for (int motif : motifs) draw_motif(img, motif, cx, cy, radius, rng);

    // mild sensor noise, counter-based so rendering stays order-independent
    const uint64_t nseed = rng.next();
    for (size_t i = 0; i < img.px.size(); ++i) {
        const double u = static_cast<double>(hash_u64(nseed, i) >> 11) * 0x1.0p-53;
        img.px[i] = clip_u8(img.px[i] + (u - 0.5) * 6.0);
    }
    return img;
}

void generate_synthetic(const std::filesystem::path& data_root, const SynthParams& params) {
    if (params.n < 20) fail_usage("synthetic generator needs n >= 20");
    if (params.diseases < 1 || params.diseases > dataset::kNumDiseases) {
        fail_usage("synthetic generator supports 1..12 diseases");
    }
    if (params.size < 32) fail_usage("synthetic image size must be >= 32");

    // label plan: dual-label images first, then normals, then singles round-robin
    const int n_dual = params.diseases >= 2
                           ? static_cast<int>(std::llround(params.n * params.co_occurrence))
                           : 0;
    const int n_normal = static_cast<int>(std::llround(params.n * params.normal_frac));
    if (n_dual + n_normal > params.n) fail_usage("co_occurrence + normal_frac exceed the dataset");

    std::vector<std::vector<int>> plan;
    for (int i = 0; i < n_dual; ++i) {
        const int a = i % params.diseases;
        const int b = (i + 1) % params.diseases;
        plan.push_back({a, b});
    }
    for (int i = 0; i < n_normal; ++i) plan.push_back({});
    int single = 0;
    while (static_cast<int>(plan.size()) < params.n) {
        plan.push_back({single % params.diseases});
        ++single;
    }
    Rng assign_rng(derive_seed(params.seed, "synth/assign"));
    assign_rng.shuffle(plan);

    std::filesystem::create_directories(data_root / "images");

    std::vector<std::string> header = {"ID", "Disease_Risk"};
    for (const char* name : dataset::kDiseaseNames) header.push_back(name);
    std::vector<std::vector<std::string>> rows;

    for (int i = 0; i < params.n; ++i) {
        const std::string id = std::to_string(i + 1);
        const auto& motifs = plan[static_cast<size_t>(i)];
        const Image img =
            render_synthetic_image(params, derive_seed(params.seed, "synth/image/" + id), motifs);
        save_png(data_root / "images" / (id + ".png"), img);

        std::vector<std::string> row = {id, motifs.empty() ? "0" : "1"};
        for (int d = 0; d < dataset::kNumDiseases; ++d) {
            const bool set = std::find(motifs.begin(), motifs.end(), d) != motifs.end();
            row.push_back(set ? "1" : "0");
        }
        rows.push_back(std::move(row));
    }
    write_csv(data_root / "labels.csv", header, rows);
}

} // namespace trio::cli
