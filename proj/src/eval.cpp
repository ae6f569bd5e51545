#include "trio/eval.hpp"

#include "trio/csv.hpp"
#include "trio/error.hpp"
#include "trio/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace trio::eval {

MetricsRow compute_metrics(const Confusion& c) {
    const long long n = c.total();
    if (n <= 0) fail_data("compute_metrics: empty confusion matrix");
    if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) {
        fail_data("compute_metrics: negative count");
    }
    MetricsRow row;
    row.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
    row.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    row.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    const double pr = row.precision + row.recall;
    row.f1 = pr > 0.0 ? 2.0 * row.precision * row.recall / pr : 0.0;
    return row;
}

ROCCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        fail_data("roc_auc: scores/labels size mismatch or empty");
    }
    long long P = 0, N = 0;
    for (int v : labels) (v == 1 ? P : N)++;
    if (P == 0 || N == 0) fail_data("roc_auc: AUC undefined with single-class labels");

    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // rank-sum statistic with average ranks over ties
    double rank_pos = 0.0;
    for (size_t i = 0; i < n;) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t t = i; t < j; ++t) {
            if (labels[order[t]] == 1) rank_pos += avg_rank;
        }
        i = j;
    }
    ROCCurve curve;
    curve.auc = (rank_pos - static_cast<double>(P) * (P + 1) / 2.0) /
                (static_cast<double>(P) * static_cast<double>(N));

    // threshold sweep, descending; predict positive when score >= threshold
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long long tp = 0, fp = 0;
    for (size_t i = n; i > 0;) {
        size_t j = i; // walk one tie group from the top
        const double s = scores[order[i - 1]];
        while (j > 0 && scores[order[j - 1]] == s) {
            if (labels[order[j - 1]] == 1) ++tp;
            else ++fp;
            --j;
        }
        curve.points.push_back({s, static_cast<double>(fp) / N, static_cast<double>(tp) / P});
        i = j;
    }
    return curve;
}

double trapezoid_auc(const ROCCurve& curve) {
    double area = 0.0;
    for (size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return area;
}

std::vector<BenchmarkDelta> benchmark_compare(const std::vector<MetricsRow>& computed,
                                              const std::map<std::string, double>& benchmark_f1) {
    std::vector<BenchmarkDelta> deltas;
    for (const auto& row : computed) {
        if (row.name == "Average") continue;
        BenchmarkDelta d;
        d.disease = row.name;
        d.computed_f1 = row.f1;
        auto it = benchmark_f1.find(row.name);
        if (it == benchmark_f1.end()) {
            d.flag = "missing_benchmark";
        } else {
            d.benchmark_f1 = it->second;
            if (it->second == 0.0) {
                d.flag = "zero_benchmark";
            } else {
                d.percent_diff = (row.f1 - it->second) / it->second;
            }
        }
        deltas.push_back(std::move(d));
    }
    return deltas;
}

std::map<std::string, double> load_benchmark_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const int dcol = table.col("disease");
    const int fcol = table.col("f1");
    if (dcol < 0 || fcol < 0) fail_data("benchmark CSV needs disease,f1 columns: " + path.string());
    std::map<std::string, double> out;
    for (const auto& row : table.rows) {
        double v = 0.0;
        if (!parse_double(row.at(static_cast<size_t>(fcol)), v)) {
            fail_data("benchmark CSV: bad f1 value for " + row.at(static_cast<size_t>(dcol)));
        }
        out[row.at(static_cast<size_t>(dcol))] = v;
    }
    return out;
}

MetricsRow average_row(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) fail_data("average_row: no rows");
    MetricsRow avg;
    avg.name = "Average";
    for (const auto& r : rows) {
        avg.accuracy += r.accuracy;
        avg.precision += r.precision;
        avg.recall += r.recall;
        avg.f1 += r.f1;
        avg.auc += r.auc;
    }
    const double n = static_cast<double>(rows.size());
    avg.accuracy /= n;
    avg.precision /= n;
    avg.recall /= n;
    avg.f1 /= n;
    avg.auc /= n;
    return avg;
}

std::optional<Confusion> reconstruct_confusion(double accuracy, double precision,
                                               double recall, long long n, double tol) {
    auto check = [&](long long tp, long long fp, long long fn) -> std::optional<Confusion> {
        const long long tn = n - tp - fp - fn;
        if (tp < 0 || fp < 0 || fn < 0 || tn < 0) return std::nullopt;
        Confusion c{tp, fp, tn, fn};
        const MetricsRow m = compute_metrics(c);
        if (std::abs(m.accuracy - accuracy) <= tol && std::abs(m.precision - precision) <= tol &&
            std::abs(m.recall - recall) <= tol) {
            return c;
        }
        return std::nullopt;
    };

    if (precision <= tol && recall <= tol) {
        // no true positives; place the error mass in fn
        const long long tn = std::llround(accuracy * static_cast<double>(n));
        return check(0, 0, n - tn);
    }

    for (long long tp = 0; tp <= n; ++tp) {
        // candidate fn from recall, fp from precision, each within a +/-2 window
        long long fn_lo = 0, fn_hi = n;
        if (recall > tol) {
            const double fn0 = static_cast<double>(tp) * (1.0 - recall) / recall;
            fn_lo = std::max(0LL, static_cast<long long>(std::floor(fn0)) - 2);
            fn_hi = static_cast<long long>(std::ceil(fn0)) + 2;
        }
        long long fp_lo = 0, fp_hi = n;
        if (precision > tol) {
            const double fp0 = static_cast<double>(tp) * (1.0 - precision) / precision;
            fp_lo = std::max(0LL, static_cast<long long>(std::floor(fp0)) - 2);
            fp_hi = static_cast<long long>(std::ceil(fp0)) + 2;
        }
        if (fn_hi - fn_lo > 8 || fp_hi - fp_lo > 8) continue; // unconstrained; skip
        for (long long fn = fn_lo; fn <= fn_hi; ++fn) {
            for (long long fp = fp_lo; fp <= fp_hi; ++fp) {
                if (auto c = check(tp, fp, fn)) return c;
            }
        }
    }
    return std::nullopt;
}

void write_report(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                  long long n_eval) {
    std::vector<std::vector<std::string>> out_rows;
    for (const auto& r : rows) {
        if (r.name != "Average" && n_eval > 0) {
            // every emitted row must be realizable by integer counts
            if (!reconstruct_confusion(round5(r.accuracy), round5(r.precision),
                                       round5(r.recall), n_eval, 5e-6)) {
                fail_data("report row for " + r.name +
                          " is not consistent with any integer confusion matrix at n=" +
                          std::to_string(n_eval));
            }
        }
        out_rows.push_back({r.name, fmt_fixed5(r.accuracy), fmt_fixed5(r.precision),
                            fmt_fixed5(r.recall), fmt_fixed5(r.f1), fmt_fixed5(r.auc)});
    }
    write_csv(path, {"disease", "accuracy", "precision", "recall", "f1", "auc"}, out_rows);
}

void write_roc_csv(const std::filesystem::path& path, const ROCCurve& curve) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : curve.points) {
        rows.push_back({std::isinf(p.threshold) ? "inf" : fmt_sig9(p.threshold),
                        fmt_sig9(p.fpr), fmt_sig9(p.tpr)});
    }
    write_csv(path, {"threshold", "fpr", "tpr"}, rows);
}

void write_benchmark_csv(const std::filesystem::path& path,
                         const std::vector<BenchmarkDelta>& deltas) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& d : deltas) {
        rows.push_back({d.disease, fmt_sig9(d.computed_f1),
                        d.benchmark_f1 ? fmt_sig9(*d.benchmark_f1) : "",
                        d.percent_diff ? fmt_sig9(*d.percent_diff * 100.0) : "",
                        d.flag});
    }
    write_csv(path, {"disease", "computed_f1", "benchmark_f1", "percent_diff", "flag"}, rows);
}

void write_roc_svg(const std::filesystem::path& path, const ROCCurve& curve,
                   const std::string& title) {
    const int size = 420, margin = 30, plot = size - 2 * margin;
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size
        << "'>\n";
    svg << "<rect width='" << size << "' height='" << size << "' fill='white'/>\n";
    svg << "<text x='" << size / 2 << "' y='18' text-anchor='middle' font-size='13'>" << title
        << " (AUC " << fmt_fixed5(curve.auc) << ")</text>\n";
    svg << "<rect x='" << margin << "' y='" << margin << "' width='" << plot << "' height='"
        << plot << "' fill='none' stroke='black'/>\n";
    svg << "<line x1='" << margin << "' y1='" << margin + plot << "' x2='" << margin + plot
        << "' y2='" << margin << "' stroke='lightgray' stroke-dasharray='4'/>\n";
    svg << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
    for (const auto& p : curve.points) {
        const double x = margin + p.fpr * plot;
        const double y = margin + plot - p.tpr * plot;
        svg << fmt_sig9(x) << "," << fmt_sig9(y) << " ";
    }
    svg << "'/>\n</svg>\n";
    atomic_write_file(path, svg.str());
}

} // namespace trio::eval
