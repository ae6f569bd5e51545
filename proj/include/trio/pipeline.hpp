#pragma once

#include "trio/config.hpp"
#include "trio/dataset.hpp"
#include "trio/eval.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trio::cli {

// Command implementations behind the CLI front end. All of them throw
// trio::Error; the CLI maps error kinds to exit codes.

void cmd_synth(const Config& cfg);

// When synthetic is set, the generator runs first and prepare consumes its
// output. Re-runs skip images whose source bytes and parameters are unchanged.
void cmd_prepare(const Config& cfg, bool synthetic);

// disease_arg: one acronym or "all"; component_arg: "1", "2", "3" or "all"
// ("all" trains the three components and fits PCA + ensemble into a bundle).
void cmd_train(const Config& cfg, const std::string& disease_arg,
               const std::string& component_arg);

struct EvalOutcome {
    int evaluated = 0;
    std::vector<std::string> errors; // per-disease failures (missing bundle, ...)
};

EvalOutcome cmd_eval(const Config& cfg, const std::string& split_arg,
                     const std::filesystem::path& benchmark_csv, bool plots);

void cmd_predict(const Config& cfg, const std::filesystem::path& image_path,
                 const std::string& disease_arg, const std::filesystem::path& jsonl_out,
                 std::ostream& out);

void cmd_search(const Config& cfg, const std::string& disease_arg);

// Records with split assignments restored from the cache's split manifest.
std::vector<dataset::ImageRecord> load_prepared_records(const Config& cfg);

// Score one disease's bundle on a split (used by eval and by the search
// leaderboard): fills the metrics row and the ROC curve.
struct DiseaseEvalResult {
    eval::MetricsRow row;
    eval::ROCCurve curve;
    long long n_eval = 0;
};

DiseaseEvalResult evaluate_one(const Config& cfg,
                               const std::vector<dataset::ImageRecord>& records,
                               dataset::Split split, const std::filesystem::path& bundle_dir);

} // namespace trio::cli
