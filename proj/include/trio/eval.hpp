#pragma once

#include "trio/dataset.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trio::eval {

struct Confusion {
    long long tp = 0, fp = 0, tn = 0, fn = 0;

    long long total() const { return tp + fp + tn + fn; }
};

struct MetricsRow {
    std::string name; // disease acronym or "Average"
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
};

struct ROCPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct ROCCurve {
    std::vector<ROCPoint> points; // threshold descending from +inf; (0,0) to (1,1)
    double auc = 0.0;             // exact Mann-Whitney statistic, ties count 1/2
};

// Zero-division conventions: precision 0 when tp+fp = 0, recall 0 when
// tp+fn = 0, f1 0 when precision+recall = 0. auc is left 0 (filled later).
MetricsRow compute_metrics(const Confusion& c);

// Threshold sweep over the distinct scores; auc via the rank statistic.
// Throws when only one class is present.
ROCCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Trapezoidal area under the swept curve; the tests require this to agree
// with the rank statistic to 1e-12.
double trapezoid_auc(const ROCCurve& curve);

struct BenchmarkDelta {
    std::string disease;
    double computed_f1 = 0.0;
    std::optional<double> benchmark_f1;
    std::optional<double> percent_diff; // (computed - benchmark) / benchmark
    std::string flag;                   // "", "zero_benchmark", "missing_benchmark"
};

std::vector<BenchmarkDelta> benchmark_compare(const std::vector<MetricsRow>& computed,
                                              const std::map<std::string, double>& benchmark_f1);

// disease,f1 CSV (header row expected).
std::map<std::string, double> load_benchmark_csv(const std::filesystem::path& path);

// Unweighted mean across rows, mirroring the reported Average row.
MetricsRow average_row(const std::vector<MetricsRow>& rows);

// report.csv with 5-decimal half-up rounding and a trailing Average row.
// Each emitted row is checked to admit an integer confusion matrix at the
// known evaluation count.
void write_report(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                  long long n_eval);

void write_roc_csv(const std::filesystem::path& path, const ROCCurve& curve);

void write_benchmark_csv(const std::filesystem::path& path,
                         const std::vector<BenchmarkDelta>& deltas);

// Minimal standalone ROC plot.
void write_roc_svg(const std::filesystem::path& path, const ROCCurve& curve,
                   const std::string& title);

// Search for integer (tp, fp, fn, tn) summing to n that reproduces the given
// accuracy/precision/recall within tol. Used both by report self-checks and
// by the metrics oracle.
std::optional<Confusion> reconstruct_confusion(double accuracy, double precision,
                                               double recall, long long n, double tol);

} // namespace trio::eval
