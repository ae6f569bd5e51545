#include "doctest.h"

#include "trio/csv.hpp"
#include "trio/dataset.hpp"
#include "trio/error.hpp"
#include "trio/rng.hpp"
#include "trio/util.hpp"

#include <filesystem>
#include <map>
#include <set>

using namespace trio;
using namespace trio::dataset;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("trio_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Per-disease fixture counts: DN..CRVO training/validation/testing columns.
struct CountTriple {
    int train, val, test;
};
const std::map<std::string, CountTriple> kDiseaseCounts = {
    {"DN", {138, 46, 46}},   {"ODC", {282, 72, 91}},  {"TSLN", {186, 65, 53}},
    {"ARMD", {100, 38, 31}}, {"RS", {43, 14, 14}},    {"ODE", {58, 21, 17}},
    {"ODP", {65, 26, 24}},   {"DR", {376, 132, 124}}, {"MH", {317, 102, 104}},
    {"BRVO", {73, 23, 23}},  {"MYA", {101, 34, 32}},  {"CRVO", {28, 8, 9}},
};

// Single-label fixture with the reference per-split counts plus normals
// filling up to 1920/640/640 images.
void write_reference_fixture(const fs::path& dir) {
    std::vector<std::string> header = {"ID", "Disease_Risk"};
    for (const char* n : kDiseaseNames) header.push_back(n);

    std::vector<std::vector<std::string>> label_rows;
    std::vector<std::vector<std::string>> split_rows;
    int next_id = 1;
    auto emit = [&](const std::string& disease, const std::string& split, int count) {
        for (int i = 0; i < count; ++i) {
            std::vector<std::string> row = {std::to_string(next_id),
                                            disease.empty() ? "0" : "1"};
            for (const char* n : kDiseaseNames) row.push_back(n == disease ? "1" : "0");
            label_rows.push_back(row);
            split_rows.push_back({std::to_string(next_id), split});
            ++next_id;
        }
    };
    const int split_totals[3] = {1920, 640, 640};
    const char* split_names[3] = {"train", "validation", "test"};
    for (int s = 0; s < 3; ++s) {
        int labeled = 0;
        for (const char* n : kDiseaseNames) {
            const auto& c = kDiseaseCounts.at(n);
            const int count = s == 0 ? c.train : (s == 1 ? c.val : c.test);
            emit(n, split_names[s], count);
            labeled += count;
        }
        emit("", split_names[s], split_totals[s] - labeled); // normals
    }
    write_csv(dir / "labels.csv", header, label_rows);
    write_csv(dir / "split.csv", {"ID", "split"}, split_rows);
}

std::map<std::string, Split> read_split_map(const fs::path& path) {
    const auto table = read_csv(path);
    std::map<std::string, Split> out;
    for (const auto& row : table.rows) out[row[0]] = *split_from_name(row[1]);
    return out;
}

} // namespace

TEST_CASE("load_labels maps 0/1 columns onto the label bitset") {
    const auto dir = temp_dir("labels_basic");
    write_csv(dir / "labels.csv",
              {"ID", "Disease_Risk", "DN", "ODC", "TSLN", "ARMD", "RS", "ODE", "ODP", "DR",
               "MH", "BRVO", "MYA", "CRVO"},
              {{"7", "1", "1", "0", "0", "0", "0", "0", "0", "1", "0", "0", "0", "0"},
               {"8", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0"}});
    const auto records = load_labels(dir / "labels.csv");
    REQUIRE(records.size() == 2);
    CHECK(records[0].id == "7");
    CHECK(records[0].positive_for(Disease::DN));
    CHECK(records[0].positive_for(Disease::DR));
    CHECK(records[0].labels.count() == 2);
    CHECK(records[1].is_normal());
}

TEST_CASE("load_labels tolerates unknown columns with a warning") {
    const auto dir = temp_dir("labels_extra");
    write_csv(dir / "labels.csv", {"ID", "DN", "ODC", "WEIRD"},
              {{"1", "1", "0", "5"}, {"2", "0", "1", "9"}});
    std::vector<std::string> warnings;
    const auto records = load_labels(dir / "labels.csv", {}, &warnings);
    CHECK(records.size() == 2);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("WEIRD") != std::string::npos);
}

TEST_CASE("load_labels error paths") {
    const auto dir = temp_dir("labels_bad");
    write_csv(dir / "no_id.csv", {"name", "DN"}, {{"a", "1"}});
    CHECK_THROWS_AS(load_labels(dir / "no_id.csv"), Error);

    write_csv(dir / "bad_cell.csv", {"ID", "DN"}, {{"1", "2"}});
    try {
        load_labels(dir / "bad_cell.csv");
        FAIL("expected parse error");
    } catch (const Error& e) {
        // error names the row and the column
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        CHECK(std::string(e.what()).find("DN") != std::string::npos);
    }
}

TEST_CASE("reference fixture reproduces the published per-split counts") {
    const auto dir = temp_dir("labels_reference");
    write_reference_fixture(dir);
    auto records = load_labels(dir / "labels.csv");
    accept_given_split(records, read_split_map(dir / "split.csv"));

    // DN training positives
    const auto dn_train = make_binary_task(records, Disease::DN, Split::train);
    CHECK(dn_train.positives.size() == 138);

    // DN test positives
    const auto dn_test = make_binary_task(records, Disease::DN, Split::test);
    CHECK(dn_test.positives.size() == 46);

    // per-split image totals
    int n_train = 0, n_val = 0, n_test = 0;
    for (const auto& r : records) {
        if (*r.split == Split::train) ++n_train;
        if (*r.split == Split::validation) ++n_val;
        if (*r.split == Split::test) ++n_test;
    }
    CHECK(n_train == 1920);
    CHECK(n_val == 640);
    CHECK(n_test == 640);

    // independent tally: sum of the 12 train positive counts
    int expected_sum = 0;
    for (const auto& [name, c] : kDiseaseCounts) expected_sum += c.train;
    CHECK(expected_sum == 1767); // 3286 label rows minus 1519 normals

    int task_sum = 0;
    for (int d = 0; d < kNumDiseases; ++d) {
        task_sum += static_cast<int>(
            make_binary_task(records, static_cast<Disease>(d), Split::train).positives.size());
    }
    CHECK(task_sum == 1767);

    // the fixture's per-disease split fractions sit inside the tolerance
    CHECK(split_tolerance_violations(records, SplitRatios{}).empty());
}

TEST_CASE("stratified_split respects tolerance and determinism") {
    // 100 synthetic records, 50 positive for DN
    auto build = [] {
        std::vector<ImageRecord> records;
        for (int i = 0; i < 100; ++i) {
            ImageRecord rec;
            rec.id = std::to_string(i);
            if (i < 50) rec.labels.set(static_cast<size_t>(Disease::DN));
            records.push_back(rec);
        }
        return records;
    };

    auto a = build();
    stratified_split(a, SplitRatios{}, 9);
    auto b = build();
    stratified_split(b, SplitRatios{}, 9);
    for (size_t i = 0; i < a.size(); ++i) CHECK(*a[i].split == *b[i].split);

    auto c = build();
    stratified_split(c, SplitRatios{}, 10);
    CHECK(split_tolerance_violations(c, SplitRatios{}).empty());

    // partition: every record in exactly one split
    for (const auto& rec : c) CHECK(rec.split.has_value());
}

TEST_CASE("stratified_split rejects degenerate inputs") {
    std::vector<ImageRecord> records;
    for (int i = 0; i < 30; ++i) {
        ImageRecord rec;
        rec.id = std::to_string(i);
        if (i < 15) rec.labels.set(0);
        records.push_back(rec);
    }
    // zero ratio is only valid through the given-split entry point
    CHECK_THROWS_AS(stratified_split(records, SplitRatios{1.0, 0.0, 0.0}, 1), Error);
    CHECK_THROWS_AS(stratified_split(records, SplitRatios{0.5, 0.3, 0.3}, 1), Error);

    // a disease with fewer than 3 positives cannot give one per split
    std::vector<ImageRecord> few;
    for (int i = 0; i < 30; ++i) {
        ImageRecord rec;
        rec.id = std::to_string(i);
        if (i < 2) rec.labels.set(static_cast<size_t>(Disease::RS));
        few.push_back(rec);
    }
    CHECK_THROWS_AS(stratified_split(few, SplitRatios{}, 1), Error);
}

TEST_CASE("binary-relevance independence: tasks are per-disease functions") {
    std::vector<ImageRecord> records;
    for (int i = 0; i < 40; ++i) {
        ImageRecord rec;
        rec.id = std::to_string(i);
        rec.split = Split::train;
        if (i % 2 == 0) rec.labels.set(static_cast<size_t>(Disease::DN));
        if (i % 5 == 0) rec.labels.set(static_cast<size_t>(Disease::MH));
        records.push_back(rec);
    }
    const auto dn_before = make_binary_task(records, Disease::DN, Split::train);

    // flipping another disease's bits changes nothing for DN
    for (auto& rec : records) rec.labels.flip(static_cast<size_t>(Disease::CRVO));
    const auto dn_after = make_binary_task(records, Disease::DN, Split::train);
    CHECK(dn_before.positives == dn_after.positives);
    CHECK(dn_before.negatives == dn_after.negatives);

    // every record appears exactly once
    std::set<std::string> seen;
    for (const auto& id : dn_before.positives) CHECK(seen.insert(id).second);
    for (const auto& id : dn_before.negatives) CHECK(seen.insert(id).second);
    CHECK(seen.size() == records.size());

    // zero-positive disease: empty positives, no error
    const auto empty_task = make_binary_task(records, Disease::BRVO, Split::train);
    CHECK(empty_task.positives.empty());
    CHECK(empty_task.negatives.size() == records.size());
}

TEST_CASE("oversample balances to equality and keeps originals") {
    BinaryTask task;
    task.disease = Disease::DN;
    task.split = Split::train;
    for (int i = 0; i < 10; ++i) task.positives.push_back("p" + std::to_string(i));
    for (int i = 0; i < 90; ++i) task.negatives.push_back("n" + std::to_string(i));

    const auto balanced = oversample(task, 3);
    CHECK(balanced.positives.size() == 90);
    CHECK(balanced.negatives.size() == 90);

    // negatives untouched; originals retained in order; duplicates only from originals
    CHECK(balanced.negatives == task.negatives);
    for (size_t i = 0; i < task.positives.size(); ++i) {
        CHECK(balanced.positives[i] == task.positives[i]);
    }
    const std::set<std::string> originals(task.positives.begin(), task.positives.end());
    for (const auto& id : balanced.positives) CHECK(originals.count(id) == 1);

    // determinism
    const auto again = oversample(task, 3);
    CHECK(again.positives == balanced.positives);

    // 50/50 input unchanged
    BinaryTask even = task;
    even.positives.resize(10);
    even.negatives.resize(10);
    const auto same = oversample(even, 3);
    CHECK(same.positives == even.positives);
    CHECK(same.negatives == even.negatives);
}

TEST_CASE("oversample at the published DN train scale") {
    BinaryTask task;
    task.disease = Disease::DN;
    task.split = Split::train;
    for (int i = 0; i < 138; ++i) task.positives.push_back("p" + std::to_string(i));
    for (int i = 0; i < 1782; ++i) task.negatives.push_back("n" + std::to_string(i));
    const auto balanced = oversample(task, 11);
    CHECK(balanced.positives.size() == 1782);
    CHECK(balanced.negatives.size() == 1782);

    // independent tally: the duplicate multiset adds up and contains only originals
    std::map<std::string, int> tally;
    for (const auto& id : balanced.positives) ++tally[id];
    int total = 0;
    for (const auto& [id, count] : tally) {
        CHECK(id.substr(0, 1) == "p");
        CHECK(count >= 1);
        total += count;
    }
    CHECK(total == 1782);
    CHECK(tally.size() == 138); // every original still present
}

TEST_CASE("oversample error paths") {
    BinaryTask task;
    task.disease = Disease::DN;
    task.split = Split::validation;
    task.positives = {"a"};
    task.negatives = {"b", "c"};
    CHECK_THROWS_AS(oversample(task, 1), Error); // train split only

    BinaryTask empty;
    empty.disease = Disease::DN;
    empty.split = Split::train;
    empty.negatives = {"b", "c"};
    CHECK_THROWS_AS(oversample(empty, 1), Error); // empty minority class
}

TEST_CASE("sample_pairs hits the ratio and never pairs a record with itself") {
    BinaryTask task;
    task.disease = Disease::DN;
    task.split = Split::train;
    for (int i = 0; i < 12; ++i) task.positives.push_back("p" + std::to_string(i));
    for (int i = 0; i < 15; ++i) task.negatives.push_back("n" + std::to_string(i));

    const auto pairs = sample_pairs(task, 100, 0.5, 5);
    REQUIRE(pairs.size() == 100);
    int same = 0;
    for (const auto& pr : pairs) {
        CHECK(pr.id_a != pr.id_b);
        const bool a_pos = pr.id_a[0] == 'p';
        const bool b_pos = pr.id_b[0] == 'p';
        CHECK(pr.same == (a_pos == b_pos));
        if (pr.same) ++same;
    }
    CHECK(same == 50);

    // odd count: recount lands on 50 or 51
    const auto odd = sample_pairs(task, 101, 0.5, 5);
    int same_odd = 0;
    for (const auto& pr : odd) same_odd += pr.same ? 1 : 0;
    CHECK(same_odd >= 50);
    CHECK(same_odd <= 51);

    // determinism
    const auto again = sample_pairs(task, 100, 0.5, 5);
    for (size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].id_a == again[i].id_a);
        CHECK(pairs[i].id_b == again[i].id_b);
    }
}

TEST_CASE("sample_pairs forced case: 2+2 records, 4 pairs") {
    BinaryTask task;
    task.disease = Disease::DN;
    task.split = Split::train;
    task.positives = {"p1", "p2"};
    task.negatives = {"n1", "n2"};
    const auto pairs = sample_pairs(task, 4, 0.5, 17);
    REQUIRE(pairs.size() == 4);
    int same = 0;
    for (const auto& pr : pairs) {
        if (!pr.same) continue;
        ++same;
        const std::set<std::string> ids = {pr.id_a, pr.id_b};
        const bool is_pos_pair = ids == std::set<std::string>{"p1", "p2"};
        const bool is_neg_pair = ids == std::set<std::string>{"n1", "n2"};
        CHECK((is_pos_pair || is_neg_pair));
    }
    CHECK(same == 2);

    BinaryTask thin = task;
    thin.positives = {"p1"};
    CHECK_THROWS_AS(sample_pairs(thin, 4, 0.5, 1), Error);
}
