#pragma once

#include "trio/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace trio::cli {

// Desk-scale synthetic dataset: procedurally rendered fundus-like discs with
// one distinct visual motif per synthetic disease (bright blobs, dark
// streaks, ...). Emits <root>/images/<ID>.png plus <root>/labels.csv in the
// standard labels format. Byte-identical for a fixed seed.
struct SynthParams {
    int n = 300;
    int diseases = 2;           // first k of the 12 codes get motifs
    double co_occurrence = 0.1; // fraction of images carrying two labels
    double normal_frac = 0.2;
    int size = 64;
    uint64_t seed = 42;
};

void generate_synthetic(const std::filesystem::path& data_root, const SynthParams& params);

// Exposed for tests: a single rendered image.
Image render_synthetic_image(const SynthParams& params, uint64_t image_seed,
                             const std::vector<int>& motifs);

} // namespace trio::cli
