#include "doctest.h"

#include "trio/csv.hpp"
#include "trio/error.hpp"
#include "trio/eval.hpp"
#include "trio/rng.hpp"
#include "trio/util.hpp"

#include <array>
#include <cmath>
#include <filesystem>

using namespace trio;
using namespace trio::eval;

namespace {

// Published per-disease rows the report math must be consistent with:
// accuracy, precision, recall, f1, auc.
struct RefRow {
    const char* disease;
    double accuracy, precision, recall, f1, auc;
};
constexpr std::array<RefRow, 12> kReferenceRows = {{
    {"DN", 0.97344, 0.89189, 0.71739, 0.79518, 0.93698},
    {"ODC", 0.92500, 0.78667, 0.64835, 0.71084, 0.94069},
    {"TSLN", 0.95469, 0.87500, 0.52830, 0.65882, 0.95789},
    {"ARMD", 0.97188, 0.74074, 0.64516, 0.68966, 0.93130},
    {"RS", 0.99375, 0.91667, 0.78571, 0.84615, 0.98095},
    {"ODE", 0.99531, 1.00000, 0.82353, 0.90323, 0.97857},
    {"ODP", 0.97188, 0.68750, 0.45833, 0.55000, 0.92100},
    {"DR", 0.93750, 0.86207, 0.80645, 0.83333, 0.96488},
    {"MH", 0.93906, 0.82828, 0.78846, 0.80788, 0.96466},
    {"BRVO", 0.99219, 0.90909, 0.86957, 0.88889, 0.98901},
    {"MYA", 0.99063, 0.93333, 0.87500, 0.90323, 0.96993},
    {"CRVO", 0.99688, 1.00000, 0.77778, 0.87500, 0.98679},
}};

// naive O(P*N) pairwise statistic, ties counted one half
double mann_whitney_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long long pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

} // namespace

TEST_CASE("compute_metrics reproduces the DN reference row from integer counts") {
    const Confusion dn{33, 4, 590, 13};
    REQUIRE(dn.total() == 640);
    const MetricsRow m = compute_metrics(dn);
    CHECK(std::abs(m.accuracy - 0.97344) < 5e-6);
    CHECK(std::abs(m.precision - 0.89189) < 5e-6);
    CHECK(std::abs(m.recall - 0.71739) < 5e-6);
    CHECK(std::abs(m.f1 - 0.79518) < 5e-6);
}

TEST_CASE("compute_metrics conventions") {
    const MetricsRow perfect = compute_metrics({10, 0, 30, 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    const MetricsRow degenerate = compute_metrics({0, 0, 30, 10});
    CHECK(degenerate.precision == 0.0);
    CHECK(degenerate.recall == 0.0);
    CHECK(degenerate.f1 == 0.0);

    CHECK_THROWS_AS(compute_metrics({0, 0, 0, 0}), Error);
}

TEST_CASE("every reference row admits an integer confusion matrix at n=640") {
    for (const auto& row : kReferenceRows) {
        const auto c = reconstruct_confusion(row.accuracy, row.precision, row.recall, 640, 5e-6);
        REQUIRE_MESSAGE(c.has_value(), row.disease);
        CHECK(c->total() == 640);
        const MetricsRow m = compute_metrics(*c);
        CHECK(std::abs(m.accuracy - row.accuracy) < 5e-6);
        CHECK(std::abs(m.precision - row.precision) < 5e-6);
        CHECK(std::abs(m.recall - row.recall) < 5e-6);
        // accuracy * n is an integer (count arithmetic)
        const double an = m.accuracy * 640.0;
        CHECK(std::abs(an - std::llround(an)) < 1e-9);
    }
}

TEST_CASE("average row of the reference table matches the published means") {
    std::vector<MetricsRow> rows;
    for (const auto& r : kReferenceRows) {
        rows.push_back({r.disease, r.accuracy, r.precision, r.recall, r.f1, r.auc});
    }
    const MetricsRow avg = average_row(rows);
    CHECK(round5(avg.accuracy) == doctest::Approx(0.97018).epsilon(1e-9));
    CHECK(round5(avg.auc) == doctest::Approx(0.96022).epsilon(1e-9));

    // independent column-average
    double acc = 0.0;
    for (const auto& r : kReferenceRows) acc += r.accuracy;
    CHECK(avg.accuracy == doctest::Approx(acc / 12.0).epsilon(1e-12));
}

TEST_CASE("roc_auc frozen examples") {
    const ROCCurve perfect = roc_auc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0});
    CHECK(perfect.auc == doctest::Approx(1.0).epsilon(1e-12));

    // pairwise count: 3 of 4 positive-negative pairs ordered correctly
    const ROCCurve mixed = roc_auc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
    CHECK(mixed.auc == doctest::Approx(0.75).epsilon(1e-12));

    // antisymmetry for tie-free inputs
    const ROCCurve reversed = roc_auc({-0.9, -0.8, -0.3, -0.2}, {1, 0, 1, 0});
    CHECK(reversed.auc == doctest::Approx(1.0 - 0.75).epsilon(1e-12));

    CHECK_THROWS_AS(roc_auc({0.5, 0.3}, {1, 1}), Error); // single class
}

TEST_CASE("roc curve endpoints and monotonicity") {
    const ROCCurve curve = roc_auc({0.9, 0.7, 0.7, 0.4, 0.2}, {1, 0, 1, 1, 0});
    REQUIRE(curve.points.size() >= 2);
    CHECK(curve.points.front().fpr == 0.0);
    CHECK(curve.points.front().tpr == 0.0);
    CHECK(std::isinf(curve.points.front().threshold));
    CHECK(curve.points.back().fpr == 1.0);
    CHECK(curve.points.back().tpr == 1.0);
    for (size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
        CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
        CHECK(curve.points[i].threshold < curve.points[i - 1].threshold);
    }
}

TEST_CASE("trapezoid AUC equals the rank statistic and the naive pairwise oracle") {
    Rng rng(606);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(60));
        std::vector<double> scores;
        std::vector<int> labels;
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // quantized scores force ties regularly
            scores.push_back(rng.below(8) / 8.0);
            const int y = rng.bernoulli(0.4) ? 1 : 0;
            labels.push_back(y);
            pos += y;
        }
        if (pos == 0 || pos == n) {
            labels[0] = 1 - labels[0];
        }
        const ROCCurve curve = roc_auc(scores, labels);
        CHECK(std::abs(trapezoid_auc(curve) - curve.auc) < 1e-12);
        CHECK(std::abs(mann_whitney_oracle(scores, labels) - curve.auc) < 1e-12);
    }
}

TEST_CASE("benchmark_compare: published DN and ODP cases") {
    std::vector<MetricsRow> rows;
    rows.push_back({"DN", 0.97344, 0.89189, 0.71739, 0.79518, 0.93698});
    rows.push_back({"ODP", 0.97188, 0.68750, 0.45833, 0.55000, 0.92100});
    rows.push_back({"MH", 0.93906, 0.82828, 0.78846, 0.80788, 0.96466});

    const std::map<std::string, double> bench = {{"DN", 0.607}, {"ODP", 0.0}};
    const auto deltas = benchmark_compare(rows, bench);
    REQUIRE(deltas.size() == 3);

    CHECK(deltas[0].disease == "DN");
    REQUIRE(deltas[0].percent_diff.has_value());
    // 0.607 -> 0.79518 is the published 31% improvement
    CHECK(*deltas[0].percent_diff * 100.0 == doctest::Approx(31.0).epsilon(0.017));
    CHECK(deltas[0].flag.empty());

    CHECK(deltas[1].disease == "ODP");
    CHECK(!deltas[1].percent_diff.has_value());
    CHECK(deltas[1].flag == "zero_benchmark");
    CHECK(deltas[1].computed_f1 == doctest::Approx(0.55).epsilon(1e-9));

    CHECK(deltas[2].flag == "missing_benchmark");

    // equal computed and benchmark -> 0%
    const auto zero = benchmark_compare({{"DN", 0, 0, 0, 0.5, 0}}, {{"DN", 0.5}});
    CHECK(*zero[0].percent_diff == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("report writer emits 5-decimal half-up rows plus Average") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "trio_test_report";
    fs::create_directories(dir);

    std::vector<MetricsRow> rows;
    const Confusion dn{33, 4, 590, 13};
    MetricsRow m = compute_metrics(dn);
    m.name = "DN";
    m.auc = 0.936984;
    rows.push_back(m);
    auto all = rows;
    all.push_back(average_row(rows));
    write_report(dir / "report.csv", all, 640);

    const auto table = read_csv(dir / "report.csv");
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0][0] == "DN");
    CHECK(table.rows[0][1] == "0.97344");
    CHECK(table.rows[0][2] == "0.89189");
    CHECK(table.rows[0][3] == "0.71739");
    CHECK(table.rows[0][4] == "0.79518");
    CHECK(table.rows[0][5] == "0.93698");
    CHECK(table.rows[1][0] == "Average");

    // a fabricated row that no integer confusion matrix can produce must throw
    std::vector<MetricsRow> bogus = {{"DN", 0.5000037, 0.333217, 0.77777, 0.2, 0.5}};
    CHECK_THROWS_AS(write_report(dir / "bad.csv", bogus, 640), Error);
}

TEST_CASE("roc csv and benchmark csv writers") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "trio_test_roccsv";
    fs::create_directories(dir);
    const ROCCurve curve = roc_auc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
    write_roc_csv(dir / "roc.csv", curve);
    const auto table = read_csv(dir / "roc.csv");
    CHECK(table.header == std::vector<std::string>{"threshold", "fpr", "tpr"});
    CHECK(table.rows.front()[0] == "inf");
    CHECK(table.rows.back()[1] == "1");
    CHECK(table.rows.back()[2] == "1");

    write_roc_svg(dir / "roc.svg", curve, "DN");
    CHECK(fs::file_size(dir / "roc.svg") > 200);

    const auto deltas = benchmark_compare({{"DN", 0, 0, 0, 0.795, 0}}, {{"DN", 0.607}});
    write_benchmark_csv(dir / "delta.csv", deltas);
    const auto dtable = read_csv(dir / "delta.csv");
    CHECK(dtable.header ==
          std::vector<std::string>{"disease", "computed_f1", "benchmark_f1", "percent_diff",
                                   "flag"});
    REQUIRE(dtable.rows.size() == 1);
}

TEST_CASE("metrics are permutation-invariant over evaluation order") {
    Rng rng(31);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        scores.push_back(rng.uniform01());
        labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    labels[0] = 1;
    labels[1] = 0;
    const double base = roc_auc(scores, labels).auc;

    std::vector<size_t> perm(scores.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng shuffle_rng(32);
    shuffle_rng.shuffle(perm);
    std::vector<double> s2;
    std::vector<int> l2;
    for (size_t i : perm) {
        s2.push_back(scores[i]);
        l2.push_back(labels[i]);
    }
    CHECK(roc_auc(s2, l2).auc == doctest::Approx(base).epsilon(1e-15));
}
