#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trio::dataset {

// The 12 detectable diseases. Normal is never a detector target: an image is
// reported normal iff every detector says negative.
enum class Disease : int {
    DN = 0, ODC, TSLN, ARMD, RS, ODE, ODP, DR, MH, BRVO, MYA, CRVO,
};

inline constexpr int kNumDiseases = 12;

inline constexpr std::array<const char*, kNumDiseases> kDiseaseNames = {
    "DN", "ODC", "TSLN", "ARMD", "RS", "ODE", "ODP", "DR", "MH", "BRVO", "MYA", "CRVO",
};

const char* disease_name(Disease d);
std::optional<Disease> disease_from_name(const std::string& name);

enum class Split : int { train = 0, validation = 1, test = 2 };

inline constexpr std::array<const char*, 3> kSplitNames = {"train", "validation", "test"};

const char* split_name(Split s);
std::optional<Split> split_from_name(const std::string& name);

struct ImageRecord {
    std::string id;
    std::filesystem::path image_path;
    std::bitset<kNumDiseases> labels;
    std::optional<Split> split; // assigned exactly once, never reassigned

    bool positive_for(Disease d) const { return labels.test(static_cast<size_t>(d)); }
    bool is_normal() const { return labels.none(); }
};

struct BinaryTask {
    Disease disease;
    Split split;
    std::vector<std::string> positives; // record ids
    std::vector<std::string> negatives;
};

struct PairSample {
    std::string id_a;
    std::string id_b;
    bool same; // both positive or both negative for the task's disease
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Parse an RFMiD-format labels CSV (header with ID plus one 0/1 column per
// disease acronym; unrecognized columns are tolerated). Image paths are
// resolved lazily against image_dir as <ID>.png, falling back to <ID>.jpg.
// Unknown-column names are appended to *warnings when given.
std::vector<ImageRecord> load_labels(const std::filesystem::path& csv_path,
                                     const std::filesystem::path& image_dir = {},
                                     std::vector<std::string>* warnings = nullptr);

struct SplitRatios {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

// Per-disease stratification tolerance in percentage points, train/val/test.
inline constexpr std::array<double, 3> kSplitTolerancePP = {7.0, 7.0, 5.0};

// Fresh iterative stratified split. Every disease that occurs at all must
// have at least 3 positives (one per split); all ratios must be nonzero and
// sum to 1. Deterministic under seed.
void stratified_split(std::vector<ImageRecord>& records, const SplitRatios& ratios,
                      uint64_t seed);

// Alternate entry point for pre-split datasets: adopt the given assignment
// and validate it against the stratification tolerance.
void accept_given_split(std::vector<ImageRecord>& records,
                        const std::map<std::string, Split>& assignment);

// Tolerance report; empty means every observed disease is within bounds.
std::vector<std::string> split_tolerance_violations(const std::vector<ImageRecord>& records,
                                                    const SplitRatios& ratios);

BinaryTask make_binary_task(const std::vector<ImageRecord>& records, Disease disease,
                            Split split);

// Balance by duplicating minority-class ids with replacement until the class
// counts match. Train split only; originals are always retained.
BinaryTask oversample(const BinaryTask& task, uint64_t seed);

// Exactly n_pairs pairs with round(n_pairs * same_ratio) same-pairs.
// Same-pairs alternate between the positive and the negative class; members
// of a pair are always distinct records.
std::vector<PairSample> sample_pairs(const BinaryTask& task, int n_pairs,
                                     double same_ratio, uint64_t seed);

} // namespace trio::dataset
