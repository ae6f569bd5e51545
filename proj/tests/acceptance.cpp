// Acceptance suite: one pass/fail line per criterion.
//
// Usage: trio_acceptance --cli /path/to/trio_fundus [--work DIR]
//
// Math criteria run in-process; workflow criteria drive the CLI binary the
// way a user would and inspect the files it leaves behind.

#include "trio/csv.hpp"
#include "trio/dataset.hpp"
#include "trio/error.hpp"
#include "trio/eval.hpp"
#include "trio/fusion.hpp"
#include "trio/imgproc.hpp"
#include "trio/nets.hpp"
#include "trio/pipeline.hpp"
#include "trio/ref_kernels.hpp"
#include "trio/rng.hpp"
#include "trio/util.hpp"

#include "json.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace trio;

namespace {

std::string g_cli;
fs::path g_work;

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = g_cli + " " + args + " >> " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return status < 0 ? status : WEXITSTATUS(status);
}

std::map<std::string, uint64_t> dir_hashes(const fs::path& dir) {
    std::map<std::string, uint64_t> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        out[fs::relative(entry.path(), dir).string()] = fnv1a64_file(entry.path());
    }
    return out;
}

void write_flat_config(const fs::path& path, const std::map<std::string, std::string>& kv) {
    std::string text;
    for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
    atomic_write_file(path, text);
}

std::map<std::string, std::string> base_run_config(const fs::path& root, int n, int epochs,
                                                   int pairs) {
    return {
        {"data_root", (root / "data").string()},
        {"cache_dir", (root / "cache").string()},
        {"bundles_dir", (root / "bundles").string()},
        {"reports_dir", (root / "reports").string()},
        {"seed", "20240501"},
        {"diseases", "DN,ODC"},
        {"synth.n", std::to_string(n)},
        {"synth.diseases", "2"},
        {"nets.component1.head_dims", "64,32"},
        {"nets.component2.head_dims", "48,24"},
        {"nets.component3.head_dims", "48,24"},
        {"nets.component1.epochs", std::to_string(epochs)},
        {"nets.component2.epochs", std::to_string(epochs)},
        {"nets.component3.epochs", std::to_string(epochs)},
        {"nets.component1.lr", "0.001"},
        {"nets.component2.lr", "0.001"},
        {"nets.component3.lr", "0.001"},
        {"nets.component1.patience", std::to_string(epochs)},
        {"nets.component2.patience", std::to_string(epochs)},
        {"nets.component3.patience", std::to_string(epochs)},
        {"nets.component3.pairs", std::to_string(pairs)},
        {"fusion.forest_trees", "50"},
    };
}

Image random_image(int h, int w, int c, Rng& rng) {
    Image img(h, w, c);
    for (auto& px : img.px) px = static_cast<uint8_t>(rng.below(256));
    return img;
}

// Jacobi rotations: the acceptance suite's own eigensolver route.
void jacobi(std::vector<double> a, int n, std::vector<double>& values,
            std::vector<double>& vectors) {
    std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
    auto A = [&](int r, int c) -> double& { return a[static_cast<size_t>(r) * n + c]; };
    auto V = [&](int r, int c) -> double& { return v[static_cast<size_t>(r) * n + c]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        }
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-30) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return A(x, x) > A(y, y); });
    values.clear();
    vectors.clear();
    for (int i : order) {
        values.push_back(A(i, i));
        for (int k = 0; k < n; ++k) vectors.push_back(V(k, i));
    }
}

#define REQUIRE_TRUE(cond, msg)                                    \
    do {                                                           \
        if (!(cond)) {                                             \
            detail = std::string(msg);                             \
            return false;                                          \
        }                                                          \
    } while (0)

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

bool c1_metrics_oracle(std::string& detail) {
    // DN row from the reconstructed integer confusion matrix
    const eval::Confusion dn{33, 4, 590, 13};
    const auto m = eval::compute_metrics(dn);
    REQUIRE_TRUE(std::abs(m.accuracy - 0.97344) < 5e-6, "DN accuracy mismatch");
    REQUIRE_TRUE(std::abs(m.precision - 0.89189) < 5e-6, "DN precision mismatch");
    REQUIRE_TRUE(std::abs(m.recall - 0.71739) < 5e-6, "DN recall mismatch");
    REQUIRE_TRUE(std::abs(m.f1 - 0.79518) < 5e-6, "DN f1 mismatch");

    // every reference row admits an integer solution at n = 640
    const struct {
        const char* name;
        double acc, prec, rec;
    } rows[12] = {
        {"DN", 0.97344, 0.89189, 0.71739},   {"ODC", 0.92500, 0.78667, 0.64835},
        {"TSLN", 0.95469, 0.87500, 0.52830}, {"ARMD", 0.97188, 0.74074, 0.64516},
        {"RS", 0.99375, 0.91667, 0.78571},   {"ODE", 0.99531, 1.00000, 0.82353},
        {"ODP", 0.97188, 0.68750, 0.45833},  {"DR", 0.93750, 0.86207, 0.80645},
        {"MH", 0.93906, 0.82828, 0.78846},   {"BRVO", 0.99219, 0.90909, 0.86957},
        {"MYA", 0.99063, 0.93333, 0.87500},  {"CRVO", 0.99688, 1.00000, 0.77778},
    };
    for (const auto& row : rows) {
        const auto c = eval::reconstruct_confusion(row.acc, row.prec, row.rec, 640, 5e-6);
        REQUIRE_TRUE(c.has_value(), std::string("no integer confusion matrix for ") + row.name);
        const auto check = eval::compute_metrics(*c);
        REQUIRE_TRUE(std::abs(check.accuracy - row.acc) < 5e-6 &&
                         std::abs(check.precision - row.prec) < 5e-6 &&
                         std::abs(check.recall - row.rec) < 5e-6,
                     std::string("reconstruction off for ") + row.name);
    }
    detail = "DN row exact; all 12 rows admit integer confusions at n=640";
    return true;
}

bool c2_bce_oracle(std::string& detail) {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(64));
        nets::LossBatch batch;
        double oracle = 0.0;
        for (int i = 0; i < n; ++i) {
            const double y = rng.bernoulli(0.5) ? 1.0 : 0.0;
            const double p = rng.uniform01();
            batch.y.push_back(y);
            batch.y_hat.push_back(p);
            const double pc = std::max(1e-7, std::min(1.0 - 1e-7, p));
            oracle += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        }
        oracle /= n;
        REQUIRE_TRUE(std::abs(nets::bce_loss(batch) - oracle) < 1e-9,
                     "bce mismatch at trial " + std::to_string(trial));
    }
    const double h = 1e-5;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        nets::LossBatch batch;
        for (int i = 0; i < n; ++i) {
            batch.y.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
            batch.y_hat.push_back(rng.uniform(0.05, 0.95));
        }
        const auto grad = nets::bce_grad(batch);
        for (int i = 0; i < n; ++i) {
            auto up = batch, dn = batch;
            up.y_hat[static_cast<size_t>(i)] += h;
            dn.y_hat[static_cast<size_t>(i)] -= h;
            const double fd = (nets::bce_loss(up) - nets::bce_loss(dn)) / (2.0 * h);
            REQUIRE_TRUE(std::abs(grad[static_cast<size_t>(i)] - fd) /
                                 std::max(std::abs(fd), 1e-8) <
                             1e-4,
                         "bce gradient mismatch");
        }
    }
    detail = "1000 batches within 1e-9; 100 gradient points within 1e-4";
    return true;
}

bool c3_filter_oracles(std::string& detail) {
    Rng rng(3003);
    for (int trial = 0; trial < 50; ++trial) {
        const Image img = random_image(8, 8, 3, rng);
        REQUIRE_TRUE(imgproc::sobel_magnitude(img).px == ref::sobel_magnitude_ref(img).px,
                     "sobel mismatch");
        REQUIRE_TRUE(imgproc::emboss(img).px == ref::emboss_ref(img).px, "emboss mismatch");
        for (int bits : {1, 3, 5, 8}) {
            REQUIRE_TRUE(imgproc::posterize(img, bits).px == ref::posterize_ref(img, bits).px,
                         "posterize mismatch");
        }
    }
    // trivial cases: constant and step images
    Image constant(8, 8, 3);
    std::fill(constant.px.begin(), constant.px.end(), 120);
    for (uint8_t v : imgproc::sobel_magnitude(constant).px) {
        REQUIRE_TRUE(v == 0, "sobel of constant image not zero");
    }
    for (uint8_t v : imgproc::emboss(constant).px) {
        REQUIRE_TRUE(v == 128, "emboss of constant image not bias");
    }
    Image step(8, 8, 1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) step.at(y, x, 0) = x < 4 ? 0 : 255;
    }
    REQUIRE_TRUE(imgproc::sobel_magnitude(step).at(4, 3, 0) == 255, "step clip not 255");
    detail = "sobel/posterize/emboss equal brute force exactly on 50 random 8x8 images";
    return true;
}

bool c4_pca_oracle(std::string& detail) {
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(4000 + static_cast<uint64_t>(trial));
        const int n = 10 + static_cast<int>(rng.below(41));
        const int d = 2 + static_cast<int>(rng.below(9));
        fusion::FeatureMatrix m;
        m.cols = d;
        m.column_spec = {{"f", d}};
        for (int r = 0; r < n; ++r) {
            m.ids.push_back(std::to_string(r));
            for (int c = 0; c < d; ++c) m.x.push_back(rng.normal() * (c + 1));
        }
        const auto pca = fusion::fit_pca(m, 1.0);
        const auto cov = ref::covariance_ref(m.x, n, d);
        std::vector<double> values, vectors;
        jacobi(cov, d, values, vectors);
        for (int i = 0; i < d; ++i) {
            REQUIRE_TRUE(std::abs(pca.explained_variance[static_cast<size_t>(i)] -
                                  values[static_cast<size_t>(i)]) < 1e-8,
                         "eigenvalue mismatch");
            double dot = 0.0;
            for (int j = 0; j < d; ++j) {
                dot += pca.component(i, j) * vectors[static_cast<size_t>(i) * d + j];
            }
            REQUIRE_TRUE(std::abs(std::abs(dot) - 1.0) < 1e-6, "component mismatch (up to sign)");
            if (i > 0) {
                REQUIRE_TRUE(pca.explained_variance[static_cast<size_t>(i)] <=
                                 pca.explained_variance[static_cast<size_t>(i - 1)] + 1e-12,
                             "variances not descending");
            }
            for (int j = i; j < d; ++j) {
                double ortho = 0.0;
                for (int c = 0; c < d; ++c) ortho += pca.component(i, c) * pca.component(j, c);
                REQUIRE_TRUE(std::abs(ortho - (i == j ? 1.0 : 0.0)) < 1e-6,
                             "components not orthonormal");
            }
        }
    }
    detail = "20 random matrices up to 50x10 match the Jacobi route";
    return true;
}

bool c5_auc_oracle(std::string& detail) {
    const auto worked = eval::roc_auc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
    REQUIRE_TRUE(worked.auc == 0.75, "worked example is not exactly 0.75");

    Rng rng(5005);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(80));
        std::vector<double> scores;
        std::vector<int> labels;
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            scores.push_back(rng.below(10) / 10.0); // ties guaranteed
            const int y = rng.bernoulli(0.4) ? 1 : 0;
            labels.push_back(y);
            pos += y;
        }
        if (pos == 0) labels[0] = 1;
        if (pos == n) labels[0] = 0;
        const auto curve = eval::roc_auc(scores, labels);
        REQUIRE_TRUE(std::abs(eval::trapezoid_auc(curve) - curve.auc) < 1e-12,
                     "trapezoid and rank statistic disagree at trial " + std::to_string(trial));
    }
    detail = "500 tied score sets: trapezoid == Mann-Whitney within 1e-12; example 0.75 exact";
    return true;
}

bool c6_binary_relevance_independence(std::string& detail) {
    const fs::path root = g_work / "c6";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path log = root / "log.txt";
    const fs::path cfg_path = root / "run.cfg";
    write_flat_config(cfg_path, base_run_config(root, 80, 4, 100));
    const std::string base = "--config " + cfg_path.string() + " ";

    REQUIRE_TRUE(run_cli(base + "prepare --synthetic", log) == 0, "prepare failed (see log)");
    REQUIRE_TRUE(run_cli(base + "train --disease all --component all", log) == 0,
                 "train failed (see log)");

    // 50-image probe set: first 50 cached images by id
    std::vector<fs::path> probes;
    for (int i = 1; i <= 50; ++i) {
        probes.push_back(root / "data" / "images" / (std::to_string(i) + ".png"));
    }
    auto predict_all = [&](const fs::path& out_file) {
        fs::remove(out_file);
        for (const auto& img : probes) {
            const std::string cmd = g_cli + " --config " + cfg_path.string() +
                                    " predict --disease DN " + img.string() + " >> " +
                                    out_file.string() + " 2>> " + log.string();
            if (WEXITSTATUS(std::system(cmd.c_str())) != 0) return false;
        }
        return true;
    };

    const auto dn_before = dir_hashes(root / "bundles" / "DN");
    REQUIRE_TRUE(predict_all(root / "probe_before.txt"), "predict failed (see log)");

    REQUIRE_TRUE(run_cli(base + "train --disease ODC --component all", log) == 0,
                 "retrain of ODC failed (see log)");

    const auto dn_after = dir_hashes(root / "bundles" / "DN");
    REQUIRE_TRUE(dn_before == dn_after, "DN bundle bytes changed after retraining ODC");
    REQUIRE_TRUE(predict_all(root / "probe_after.txt"), "second predict failed (see log)");
    REQUIRE_TRUE(read_file(root / "probe_before.txt") == read_file(root / "probe_after.txt"),
                 "DN probe predictions changed after retraining ODC");
    detail = "DN bundle bytes and 50-image probe predictions bit-identical across ODC retrain";
    return true;
}

bool c7_end_to_end(std::string& detail) {
    const fs::path root = g_work / "c7";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path log = root / "log.txt";
    const fs::path cfg_path = root / "run.cfg";
    write_flat_config(cfg_path, base_run_config(root, 300, 12, 400));
    const std::string base = "--config " + cfg_path.string() + " ";

    REQUIRE_TRUE(run_cli(base + "prepare --synthetic", log) == 0, "prepare failed (see log)");
    REQUIRE_TRUE(run_cli(base + "train --disease all --component all", log) == 0,
                 "train failed (see log)");
    REQUIRE_TRUE(run_cli(base + "eval --split test", log) == 0, "eval failed (see log)");

    const auto report = read_csv(root / "reports" / "report.csv");
    REQUIRE_TRUE(report.rows.size() == 3, "report should have 2 disease rows plus Average");
    std::string seen;
    for (const auto& row : report.rows) {
        if (row[0] == "Average") continue;
        double f1 = 0.0, auc = 0.0;
        REQUIRE_TRUE(parse_double(row[4], f1) && parse_double(row[5], auc),
                     "report row unparsable");
        seen += row[0] + " f1=" + row[4] + " auc=" + row[5] + "  ";
        REQUIRE_TRUE(auc >= 0.90, row[0] + " AUC below 0.90 (" + row[5] + ")");
        REQUIRE_TRUE(f1 >= 0.80, row[0] + " F1 below 0.80 (" + row[4] + ")");
    }
    detail = seen;
    return true;
}

bool c8_siamese_property(std::string& detail) {
    // reuse the criterion-7 artifacts: bundle plus cached test split
    const fs::path root = g_work / "c7";
    REQUIRE_TRUE(fs::exists(root / "bundles" / "DN" / "component3" / "arch.json"),
                 "criterion 7 artifacts missing (run order)");
    auto siamese = nets::load_siamese(root / "bundles" / "DN" / "component3");

    cli::Config cfg = cli::Config::defaults();
    for (const auto& [k, v] : base_run_config(root, 300, 12, 400)) cfg.set(k, v);
    const auto records = cli::load_prepared_records(cfg);

    const auto task = dataset::make_binary_task(records, dataset::Disease::DN,
                                                dataset::Split::test);
    const auto pairs = dataset::sample_pairs(task, 200, 0.5, 424242);

    auto tensor_of = [&](const std::string& id) {
        for (const auto& rec : records) {
            if (rec.id != id) continue;
            const fs::path png = root / "cache" / dataset::split_name(*rec.split) /
                                 (rec.id + ".png");
            const Image img = load_image(png);
            return nets::tensor_from_image(imgproc::resize_bilinear(
                img, siamese.twin.input_size, siamese.twin.input_size));
        }
        fail_data("record not found: " + id);
    };

    double same_sum = 0.0, diff_sum = 0.0;
    int same_n = 0, diff_n = 0;
    for (const auto& pr : pairs) {
        const auto a = tensor_of(pr.id_a);
        const auto b = tensor_of(pr.id_b);
        const double d_ab = siamese.distance(a, b);
        const double d_ba = siamese.distance(b, a);
        REQUIRE_TRUE(d_ab == d_ba, "distance not exactly symmetric");
        if (pr.same) {
            same_sum += d_ab;
            ++same_n;
        } else {
            diff_sum += d_ab;
            ++diff_n;
        }
    }
    const auto probe = tensor_of(pairs[0].id_a);
    REQUIRE_TRUE(siamese.distance(probe, probe) == 0.0, "identical-input distance not zero");

    const double mean_same = same_sum / same_n;
    const double mean_diff = diff_sum / diff_n;
    REQUIRE_TRUE(mean_same < 0.5 * mean_diff,
                 "held-out mean same distance " + std::to_string(mean_same) +
                     " not below half of " + std::to_string(mean_diff));
    detail = "mean same " + fmt_sig9(mean_same) + " vs different " + fmt_sig9(mean_diff) +
             "; symmetry and zero self-distance exact";
    return true;
}

bool c9_benchmark_delta(std::string& detail) {
    const fs::path root = g_work / "c9";
    fs::remove_all(root);
    fs::create_directories(root);

    // user-supplied benchmark file
    write_csv(root / "benchmark_f1.csv", {"disease", "f1"}, {{"DN", "0.607"}, {"ODP", "0"}});
    const auto bench = eval::load_benchmark_csv(root / "benchmark_f1.csv");

    // computed rows from the integer confusion reconstructions
    const auto dn = eval::compute_metrics({33, 4, 590, 13});
    const auto odp = eval::compute_metrics({11, 5, 611, 13});
    std::vector<eval::MetricsRow> rows = {
        {"DN", dn.accuracy, dn.precision, dn.recall, dn.f1, 0.93698},
        {"ODP", odp.accuracy, odp.precision, odp.recall, odp.f1, 0.92100},
    };
    const auto deltas = eval::benchmark_compare(rows, bench);
    REQUIRE_TRUE(deltas.size() == 2, "expected two delta rows");
    REQUIRE_TRUE(deltas[0].percent_diff.has_value(), "DN delta missing");
    const double pct = *deltas[0].percent_diff * 100.0;
    REQUIRE_TRUE(std::abs(pct - 31.0) <= 0.5, "DN improvement " + fmt_sig9(pct) +
                                                  "% not within 31% +/- 0.5pp");
    REQUIRE_TRUE(!deltas[1].percent_diff.has_value(), "ODP percent should be undefined");
    REQUIRE_TRUE(deltas[1].flag == "zero_benchmark", "ODP flag missing");
    REQUIRE_TRUE(std::abs(deltas[1].computed_f1 - 0.55) < 5e-6,
                 "ODP computed F1 should be 0.55");

    eval::write_benchmark_csv(root / "delta.csv", deltas);
    const auto table = read_csv(root / "delta.csv");
    REQUIRE_TRUE(table.rows.size() == 2 && table.rows[1][4] == "zero_benchmark",
                 "delta CSV flag column wrong");
    detail = "DN +" + fmt_sig9(pct) + "%; ODP flagged zero_benchmark at f1 0.55";
    return true;
}

bool c10_reproducibility(std::string& detail) {
    const fs::path root = g_work / "c10";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path log = root / "log.txt";

    // --- synth: run, snapshot, wipe, rerun from the snapshot ---
    auto kv = base_run_config(root, 60, 2, 60);
    const fs::path cfg_path = root / "run.cfg";
    write_flat_config(cfg_path, kv);
    const std::string base = "--config " + cfg_path.string() + " --single-threaded ";

    REQUIRE_TRUE(run_cli(base + "synth", log) == 0, "synth failed");
    const auto data_before = dir_hashes(root / "data");
    const fs::path snapshot = root / "synth_snapshot.json";
    fs::copy_file(root / "data" / "run.json", snapshot);
    fs::remove_all(root / "data");
    REQUIRE_TRUE(run_cli("--config " + snapshot.string() + " --single-threaded synth", log) == 0,
                 "synth rerun failed");
    REQUIRE_TRUE(dir_hashes(root / "data") == data_before,
                 "synth outputs differ after rerun from snapshot");

    // --- eval: full prepare/train/eval, then rerun eval from its snapshot ---
    REQUIRE_TRUE(run_cli(base + "prepare", log) == 0, "prepare failed");
    REQUIRE_TRUE(run_cli(base + "train --disease all --component all", log) == 0,
                 "train failed");
    REQUIRE_TRUE(run_cli(base + "eval --split validation", log) == 0, "eval failed");
    const auto reports_before = dir_hashes(root / "reports");

    const fs::path eval_snapshot = root / "eval_snapshot.json";
    fs::copy_file(root / "reports" / "run.json", eval_snapshot);

    // reconstruct the command from the snapshot alone
    const auto j = nlohmann::json::parse(read_file(eval_snapshot));
    REQUIRE_TRUE(j.at("command") == "eval", "snapshot command mismatch");
    const std::string split = j.at("args").at("split").get<std::string>();

    fs::remove_all(root / "reports");
    REQUIRE_TRUE(run_cli("--config " + eval_snapshot.string() + " --single-threaded eval --split " +
                             split,
                         log) == 0,
                 "eval rerun failed");
    REQUIRE_TRUE(dir_hashes(root / "reports") == reports_before,
                 "eval outputs differ after rerun from snapshot");

    detail = "synth and eval reruns from run.json are byte-identical";
    return true;
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--cli") g_cli = argv[i + 1];
        if (std::string(argv[i]) == "--work") g_work = argv[i + 1];
    }
    if (g_cli.empty()) {
        std::cerr << "usage: trio_acceptance --cli /path/to/trio_fundus [--work DIR]\n";
        return 2;
    }
    if (g_work.empty()) g_work = fs::temp_directory_path() / "trio_acceptance";
    fs::create_directories(g_work);

    struct Criterion {
        std::string name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {"C1 metrics oracle (reference confusion rows)", c1_metrics_oracle},
        {"C2 binary cross-entropy oracle + gradient check", c2_bce_oracle},
        {"C3 filter kernels equal brute-force references", c3_filter_oracles},
        {"C4 PCA equals covariance eigendecomposition", c4_pca_oracle},
        {"C5 AUC: trapezoid equals Mann-Whitney", c5_auc_oracle},
        {"C6 binary-relevance independence across retrains", c6_binary_relevance_independence},
        {"C7 end-to-end synthetic run (AUC>=0.90, F1>=0.80)", c7_end_to_end},
        {"C8 siamese distance property on held-out pairs", c8_siamese_property},
        {"C9 benchmark deltas (+31% DN, ODP zero flag)", c9_benchmark_delta},
        {"C10 byte-identical rerun from run.json snapshot", c10_reproducibility},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = criterion.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL", criterion.name.c_str(),
                    detail.c_str(), secs);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures == 0) {
        std::printf("acceptance: all %zu criteria passed\n", criteria.size());
    } else {
        std::printf("acceptance: %d criteria FAILED\n", failures);
    }
    return failures;
}
