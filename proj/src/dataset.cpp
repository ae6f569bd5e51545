#include "trio/dataset.hpp"

#include "trio/csv.hpp"
#include "trio/error.hpp"
#include "trio/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace trio::dataset {

const char* disease_name(Disease d) { return kDiseaseNames[static_cast<size_t>(d)]; }

std::optional<Disease> disease_from_name(const std::string& name) {
    for (int i = 0; i < kNumDiseases; ++i) {
        if (name == kDiseaseNames[static_cast<size_t>(i)]) return static_cast<Disease>(i);
    }
    return std::nullopt;
}

const char* split_name(Split s) { return kSplitNames[static_cast<size_t>(s)]; }

std::optional<Split> split_from_name(const std::string& name) {
    for (int i = 0; i < 3; ++i) {
        if (name == kSplitNames[static_cast<size_t>(i)]) return static_cast<Split>(i);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// load_labels
// ---------------------------------------------------------------------------

std::vector<ImageRecord> load_labels(const std::filesystem::path& csv_path,
                                     const std::filesystem::path& image_dir,
                                     std::vector<std::string>* warnings) {
    const CsvTable table = read_csv(csv_path);
    const int id_col = table.col("ID");
    if (id_col < 0) fail_data("labels CSV has no ID column: " + csv_path.string());

    std::array<int, kNumDiseases> disease_col{};
    disease_col.fill(-1);
    for (size_t i = 0; i < table.header.size(); ++i) {
        const std::string& name = table.header[i];
        if (static_cast<int>(i) == id_col || name == "Disease_Risk") continue;
        if (auto d = disease_from_name(name)) {
            disease_col[static_cast<size_t>(*d)] = static_cast<int>(i);
        } else if (warnings) {
            warnings->push_back("ignoring unknown label column: " + name);
        }
    }

    std::vector<ImageRecord> records;
    records.reserve(table.rows.size());
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (static_cast<size_t>(id_col) >= row.size()) {
            fail_data("row " + std::to_string(r + 2) + " is short in " + csv_path.string());
        }
        ImageRecord rec;
        rec.id = row[static_cast<size_t>(id_col)];
        for (int d = 0; d < kNumDiseases; ++d) {
            const int col = disease_col[static_cast<size_t>(d)];
            if (col < 0) continue;
            if (static_cast<size_t>(col) >= row.size()) {
                fail_data("row " + std::to_string(r + 2) + " is short in " + csv_path.string());
            }
            const std::string& cell = row[static_cast<size_t>(col)];
            if (cell == "1") {
                rec.labels.set(static_cast<size_t>(d));
            } else if (cell != "0") {
                fail_data("non-binary cell at row " + std::to_string(r + 2) + ", column " +
                          kDiseaseNames[static_cast<size_t>(d)] + ": '" + cell + "'");
            }
        }
        if (!image_dir.empty()) {
            auto png = image_dir / (rec.id + ".png");
            auto jpg = image_dir / (rec.id + ".jpg");
            rec.image_path = std::filesystem::exists(jpg) && !std::filesystem::exists(png) ? jpg : png;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

std::vector<std::string> split_tolerance_violations(const std::vector<ImageRecord>& records,
                                                    const SplitRatios& ratios) {
    const std::array<double, 3> target = {ratios.train, ratios.validation, ratios.test};
    std::vector<std::string> violations;
    for (int d = 0; d < kNumDiseases; ++d) {
        std::array<int, 3> count = {0, 0, 0};
        int total = 0;
        for (const auto& rec : records) {
            if (!rec.positive_for(static_cast<Disease>(d))) continue;
            if (!rec.split) fail_data("record without split assignment: " + rec.id);
            ++count[static_cast<size_t>(*rec.split)];
            ++total;
        }
        if (total == 0) continue;
        for (int s = 0; s < 3; ++s) {
            const double frac = static_cast<double>(count[static_cast<size_t>(s)]) / total;
            const double lim = kSplitTolerancePP[static_cast<size_t>(s)] / 100.0;
            if (std::abs(frac - target[static_cast<size_t>(s)]) > lim + 1e-12) {
                violations.push_back(std::string(kDiseaseNames[static_cast<size_t>(d)]) + " " +
                                     kSplitNames[static_cast<size_t>(s)] + " fraction " +
                                     std::to_string(frac) + " outside " +
                                     std::to_string(target[static_cast<size_t>(s)]) + " +/- " +
                                     std::to_string(lim));
            }
        }
    }
    return violations;
}

void stratified_split(std::vector<ImageRecord>& records, const SplitRatios& ratios,
                      uint64_t seed) {
    const std::array<double, 3> target = {ratios.train, ratios.validation, ratios.test};
    double sum = 0.0;
    for (double t : target) {
        if (t <= 0.0) fail_usage("stratified_split: all ratios must be positive "
                                 "(pre-split data goes through the given-split entry point)");
        sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail_usage("stratified_split: ratios must sum to 1");

    for (const auto& rec : records) {
        if (rec.split) fail_data("stratified_split: record already has a split: " + rec.id);
    }
    for (int d = 0; d < kNumDiseases; ++d) {
        int total = 0;
        for (const auto& rec : records) total += rec.positive_for(static_cast<Disease>(d));
        if (total > 0 && total < 3) {
            fail_data(std::string("stratified_split: disease ") +
                      kDiseaseNames[static_cast<size_t>(d)] + " has only " +
                      std::to_string(total) + " positives; cannot place one per split");
        }
    }

    // Iterative stratification: repeatedly take the rarest still-unassigned
    // label and hand its records to the split with the greatest remaining
    // demand for that label.
    const int n = static_cast<int>(records.size());
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(derive_seed(seed, "stratified_split"));
    rng.shuffle(order);

    std::array<std::array<double, 3>, kNumDiseases> desired{};
    for (int d = 0; d < kNumDiseases; ++d) {
        int total = 0;
        for (const auto& rec : records) total += rec.positive_for(static_cast<Disease>(d));
        for (int s = 0; s < 3; ++s) {
            desired[static_cast<size_t>(d)][static_cast<size_t>(s)] =
                total * target[static_cast<size_t>(s)];
        }
    }
    std::array<double, 3> desired_total = {n * target[0], n * target[1], n * target[2]};

    std::vector<bool> assigned(static_cast<size_t>(n), false);

    auto pick_split_for = [&](int rec_idx, int label) {
        int best = 0;
        for (int s = 1; s < 3; ++s) {
            const double cur = label >= 0 ? desired[static_cast<size_t>(label)][static_cast<size_t>(s)]
                                          : desired_total[static_cast<size_t>(s)];
            const double bst = label >= 0 ? desired[static_cast<size_t>(label)][static_cast<size_t>(best)]
                                          : desired_total[static_cast<size_t>(best)];
            if (cur > bst + 1e-12 ||
                (std::abs(cur - bst) <= 1e-12 &&
                 desired_total[static_cast<size_t>(s)] > desired_total[static_cast<size_t>(best)] + 1e-12)) {
                best = s;
            }
        }
        auto& rec = records[static_cast<size_t>(rec_idx)];
        rec.split = static_cast<Split>(best);
        assigned[static_cast<size_t>(rec_idx)] = true;
        for (int d = 0; d < kNumDiseases; ++d) {
            if (rec.positive_for(static_cast<Disease>(d))) {
                desired[static_cast<size_t>(d)][static_cast<size_t>(best)] -= 1.0;
            }
        }
        desired_total[static_cast<size_t>(best)] -= 1.0;
    };

    while (true) {
        // rarest label with unassigned positives
        int rare = -1;
        int rare_count = 0;
        for (int d = 0; d < kNumDiseases; ++d) {
            int cnt = 0;
            for (int idx : order) {
                if (!assigned[static_cast<size_t>(idx)] &&
                    records[static_cast<size_t>(idx)].positive_for(static_cast<Disease>(d))) {
                    ++cnt;
                }
            }
            if (cnt > 0 && (rare < 0 || cnt < rare_count)) {
                rare = d;
                rare_count = cnt;
            }
        }
        if (rare < 0) break;
        for (int idx : order) {
            if (!assigned[static_cast<size_t>(idx)] &&
                records[static_cast<size_t>(idx)].positive_for(static_cast<Disease>(rare))) {
                pick_split_for(idx, rare);
            }
        }
    }
    for (int idx : order) {
        if (!assigned[static_cast<size_t>(idx)]) pick_split_for(idx, -1);
    }

    const auto violations = split_tolerance_violations(records, ratios);
    if (!violations.empty()) {
        std::string msg = "stratified_split: tolerance violated:";
        for (const auto& v : violations) msg += "\n  " + v;
        fail_data(msg);
    }
}

void accept_given_split(std::vector<ImageRecord>& records,
                        const std::map<std::string, Split>& assignment) {
    for (auto& rec : records) {
        if (rec.split) fail_data("accept_given_split: record already has a split: " + rec.id);
        auto it = assignment.find(rec.id);
        if (it == assignment.end()) {
            fail_data("accept_given_split: no split given for record " + rec.id);
        }
        rec.split = it->second;
    }
    const auto violations = split_tolerance_violations(records, SplitRatios{});
    if (!violations.empty()) {
        std::string msg = "given split violates stratification tolerance:";
        for (const auto& v : violations) msg += "\n  " + v;
        fail_data(msg);
    }
}

// ---------------------------------------------------------------------------
// Binary tasks
// ---------------------------------------------------------------------------

BinaryTask make_binary_task(const std::vector<ImageRecord>& records, Disease disease,
                            Split split) {
    BinaryTask task;
    task.disease = disease;
    task.split = split;
    for (const auto& rec : records) {
        if (!rec.split) fail_data("make_binary_task: record without split: " + rec.id);
        if (*rec.split != split) continue;
        if (rec.positive_for(disease)) {
            task.positives.push_back(rec.id);
        } else {
            task.negatives.push_back(rec.id);
        }
    }
    return task;
}

BinaryTask oversample(const BinaryTask& task, uint64_t seed) {
    if (task.split != Split::train) {
        fail_usage("oversample applies to the train split only");
    }
    BinaryTask out = task;
    auto& minority = out.positives.size() < out.negatives.size() ? out.positives : out.negatives;
    const auto& majority = out.positives.size() < out.negatives.size() ? out.negatives : out.positives;
    if (minority.size() == majority.size()) return out;
    if (minority.empty()) fail_data("oversample: minority class is empty");

    const std::vector<std::string> originals = minority; // draw only from originals
    Rng rng(derive_seed(seed, std::string("oversample/") + disease_name(task.disease)));
    while (minority.size() < majority.size()) {
        minority.push_back(originals[static_cast<size_t>(rng.below(originals.size()))]);
    }
    return out;
}

std::vector<PairSample> sample_pairs(const BinaryTask& task, int n_pairs,
                                     double same_ratio, uint64_t seed) {
    if (task.positives.size() < 2 || task.negatives.size() < 2) {
        fail_data("sample_pairs: need at least 2 positives and 2 negatives");
    }
    if (n_pairs <= 0) fail_usage("sample_pairs: n_pairs must be positive");

    const int n_same = static_cast<int>(std::llround(n_pairs * same_ratio));
    Rng rng(derive_seed(seed, std::string("sample_pairs/") + disease_name(task.disease)));

    auto draw_two_distinct = [&](const std::vector<std::string>& pool) {
        const size_t a = static_cast<size_t>(rng.below(pool.size()));
        size_t b = static_cast<size_t>(rng.below(pool.size() - 1));
        if (b >= a) ++b;
        return std::pair<std::string, std::string>(pool[a], pool[b]);
    };

    std::set<std::pair<std::string, std::string>> seen;
    auto canon = [](std::string a, std::string b) {
        return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
    };

    std::vector<PairSample> pairs;
    pairs.reserve(static_cast<size_t>(n_pairs));
    for (int i = 0; i < n_same; ++i) {
        const auto& pool = (i % 2 == 0) ? task.positives : task.negatives;
        for (int attempt = 0;; ++attempt) {
            auto [a, b] = draw_two_distinct(pool);
            if (attempt < 20 && seen.count(canon(a, b))) continue;
            seen.insert(canon(a, b));
            pairs.push_back({a, b, true});
            break;
        }
    }
    for (int i = n_same; i < n_pairs; ++i) {
        for (int attempt = 0;; ++attempt) {
            const auto& a = task.positives[static_cast<size_t>(rng.below(task.positives.size()))];
            const auto& b = task.negatives[static_cast<size_t>(rng.below(task.negatives.size()))];
            if (attempt < 20 && seen.count(canon(a, b))) continue;
            seen.insert(canon(a, b));
            pairs.push_back({a, b, false});
            break;
        }
    }
    rng.shuffle(pairs);
    return pairs;
}

} // namespace trio::dataset
