#include "trio/fusion.hpp"

#include "trio/csv.hpp"
#include "trio/error.hpp"
#include "trio/rng.hpp"
#include "trio/util.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace trio::fusion {

using nlohmann::ordered_json;

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

void validate_feature_matrix(const FeatureMatrix& m) {
    int spec_cols = 0;
    for (const auto& [tag, width] : m.column_spec) spec_cols += width;
    if (!m.column_spec.empty() && spec_cols != m.cols) {
        fail_data("feature matrix schema mismatch: column_spec sums to " +
                  std::to_string(spec_cols) + " but matrix has " + std::to_string(m.cols));
    }
    if (m.x.size() != static_cast<size_t>(m.rows()) * m.cols) {
        fail_data("feature matrix storage size mismatch");
    }
    for (double v : m.x) {
        if (!std::isfinite(v)) fail_data("feature matrix contains a non-finite entry");
    }
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
    std::vector<std::string> header = {"id"};
    for (const auto& [tag, width] : m.column_spec) {
        for (int i = 0; i < width; ++i) header.push_back(tag + "_" + std::to_string(i));
    }
    std::vector<std::vector<std::string>> rows;
    rows.reserve(m.ids.size());
    for (int r = 0; r < m.rows(); ++r) {
        std::vector<std::string> row = {m.ids[static_cast<size_t>(r)]};
        for (int c = 0; c < m.cols; ++c) row.push_back(fmt_sig9(m.at(r, c)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] != "id") {
        fail_data("feature CSV must start with an id column: " + path.string());
    }
    FeatureMatrix m;
    m.cols = static_cast<int>(table.header.size()) - 1;
    // recover column_spec from header tags (<tag>_<i> runs)
    std::string cur_tag;
    int cur_width = 0;
    for (size_t i = 1; i < table.header.size(); ++i) {
        const auto pos = table.header[i].rfind('_');
        const std::string tag = pos == std::string::npos ? table.header[i]
                                                         : table.header[i].substr(0, pos);
        if (tag != cur_tag) {
            if (cur_width > 0) m.column_spec.emplace_back(cur_tag, cur_width);
            cur_tag = tag;
            cur_width = 0;
        }
        ++cur_width;
    }
    if (cur_width > 0) m.column_spec.emplace_back(cur_tag, cur_width);

    for (const auto& row : table.rows) {
        if (static_cast<int>(row.size()) != m.cols + 1) {
            fail_data("feature CSV row width mismatch: " + path.string());
        }
        m.ids.push_back(row[0]);
        for (int c = 0; c < m.cols; ++c) {
            double v = 0.0;
            if (!parse_double(row[static_cast<size_t>(c) + 1], v)) {
                fail_data("feature CSV non-numeric cell in " + path.string());
            }
            m.x.push_back(v);
        }
    }
    validate_feature_matrix(m);
    return m;
}

void write_column_spec(const std::filesystem::path& path, const FeatureMatrix& m) {
    ordered_json j = ordered_json::array();
    for (const auto& [tag, width] : m.column_spec) j.push_back({{"tag", tag}, {"dim", width}});
    atomic_write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

PCATransform fit_pca(const FeatureMatrix& train, double variance_target) {
    if (train.rows() < 2) fail_data("fit_pca: need at least 2 rows");
    if (!(variance_target > 0.0 && variance_target <= 1.0)) {
        fail_usage("fit_pca: variance_target must be in (0, 1]");
    }
    validate_feature_matrix(train);

    const int n = train.rows();
    const int d = train.cols;

    PCATransform pca;
    pca.d = d;
    pca.mean.assign(static_cast<size_t>(d), 0.0);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) pca.mean[static_cast<size_t>(c)] += train.at(r, c);
    }
    for (auto& v : pca.mean) v /= n;

    // covariance upper triangle; each (a,b) cell is one serial accumulation
    Eigen::MatrixXd cov(d, d);
#pragma omp parallel for schedule(dynamic)
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
            double acc = 0.0;
            for (int r = 0; r < n; ++r) {
                acc += (train.at(r, a) - pca.mean[static_cast<size_t>(a)]) *
                       (train.at(r, b) - pca.mean[static_cast<size_t>(b)]);
            }
            cov(a, b) = acc / (n - 1);
            cov(b, a) = cov(a, b);
        }
    }

    double total = 0.0;
    for (int a = 0; a < d; ++a) total += cov(a, a);
    if (total <= 1e-30) fail_data("fit_pca: degenerate input (all rows identical)");
    pca.total_variance = total;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) fail_data("fit_pca: eigendecomposition failed");

    // Eigen returns eigenvalues ascending; take them in descending order.
    std::vector<double> eigvals(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        eigvals[static_cast<size_t>(i)] = std::max(0.0, solver.eigenvalues()(d - 1 - i));
    }

    int k = d;
    double cum = 0.0;
    for (int i = 0; i < d; ++i) {
        cum += eigvals[static_cast<size_t>(i)];
        if (cum / total >= variance_target - 1e-12) {
            k = i + 1;
            break;
        }
    }

    pca.k = k;
    pca.explained_variance.assign(eigvals.begin(), eigvals.begin() + k);
    pca.components.assign(static_cast<size_t>(k) * d, 0.0);
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - i);
        // sign convention: the largest-magnitude entry is nonnegative
        int arg = 0;
        for (int j = 1; j < d; ++j) {
            if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
        }
        if (v(arg) < 0.0) v = -v;
        for (int j = 0; j < d; ++j) pca.components[static_cast<size_t>(i) * d + j] = v(j);
    }
    return pca;
}

std::vector<double> project_row(const PCATransform& pca, const std::vector<double>& row) {
    if (static_cast<int>(row.size()) != pca.d) {
        fail_data("project: row has " + std::to_string(row.size()) + " columns, PCA expects " +
                  std::to_string(pca.d));
    }
    std::vector<double> z(static_cast<size_t>(pca.k), 0.0);
    for (int i = 0; i < pca.k; ++i) {
        double acc = 0.0;
        for (int j = 0; j < pca.d; ++j) {
            acc += (row[static_cast<size_t>(j)] - pca.mean[static_cast<size_t>(j)]) *
                   pca.component(i, j);
        }
        z[static_cast<size_t>(i)] = acc;
    }
    return z;
}

FeatureMatrix project(const PCATransform& pca, const FeatureMatrix& m) {
    if (m.cols != pca.d) {
        fail_data("project: matrix has " + std::to_string(m.cols) + " columns, PCA expects " +
                  std::to_string(pca.d));
    }
    FeatureMatrix out;
    out.ids = m.ids;
    out.cols = pca.k;
    out.column_spec = {{"pca", pca.k}};
    out.x.assign(static_cast<size_t>(m.rows()) * pca.k, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m.rows(); ++r) {
        const auto z = project_row(pca, m.row(r));
        for (int i = 0; i < pca.k; ++i) out.at(r, i) = z[static_cast<size_t>(i)];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decision tree
// ---------------------------------------------------------------------------

class SubsampleRng {
public:
    explicit SubsampleRng(uint64_t seed) : rng_(seed) {}

    // distinct sorted feature subset of size m out of d
    std::vector<int> pick(int d, int m) {
        std::vector<int> all(static_cast<size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        rng_.shuffle(all);
        all.resize(static_cast<size_t>(std::min(m, d)));
        std::sort(all.begin(), all.end());
        return all;
    }

private:
    Rng rng_;
};

namespace {

double gini(int pos, int total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(pos) / total;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

} // namespace

int DecisionTree::build(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                        std::vector<int>& idx, int depth, int mtry, SubsampleRng* rng) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    int pos = 0;
    for (int i : idx) pos += y[static_cast<size_t>(i)];
    const int total = static_cast<int>(idx.size());
    nodes[static_cast<size_t>(node_id)].p_pos = static_cast<double>(pos) / total;

    if (depth >= max_depth_ || pos == 0 || pos == total ||
        total < 2 * min_leaf_) {
        return node_id;
    }

    const int d = static_cast<int>(X[0].size());
    std::vector<int> feats;
    if (rng && mtry > 0 && mtry < d) {
        feats = rng->pick(d, mtry);
    } else {
        feats.resize(static_cast<size_t>(d));
        std::iota(feats.begin(), feats.end(), 0);
    }

    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feat = -1;
    double best_thr = 0.0;

    std::vector<std::pair<double, int>> vals(idx.size());
    for (int f : feats) {
        for (size_t i = 0; i < idx.size(); ++i) {
            vals[i] = {X[static_cast<size_t>(idx[i])][static_cast<size_t>(f)],
                       y[static_cast<size_t>(idx[i])]};
        }
        std::sort(vals.begin(), vals.end());
        int left_pos = 0;
        for (size_t i = 0; i + 1 < vals.size(); ++i) {
            left_pos += vals[i].second;
            if (vals[i].first == vals[i + 1].first) continue;
            const int nl = static_cast<int>(i) + 1;
            const int nr = total - nl;
            if (nl < min_leaf_ || nr < min_leaf_) continue;
            const double imp =
                (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / total;
            if (imp < best_impurity - 1e-15) {
                best_impurity = imp;
                best_feat = f;
                best_thr = (vals[i].first + vals[i + 1].first) / 2.0;
            }
        }
    }
    if (best_feat < 0) return node_id; // no informative split

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
        if (X[static_cast<size_t>(i)][static_cast<size_t>(best_feat)] <= best_thr) {
            left_idx.push_back(i);
        } else {
            right_idx.push_back(i);
        }
    }
    if (left_idx.empty() || right_idx.empty()) return node_id;

    nodes[static_cast<size_t>(node_id)].feature = best_feat;
    nodes[static_cast<size_t>(node_id)].threshold = best_thr;
    const int left = build(X, y, left_idx, depth + 1, mtry, rng);
    nodes[static_cast<size_t>(node_id)].left = left;
    const int right = build(X, y, right_idx, depth + 1, mtry, rng);
    nodes[static_cast<size_t>(node_id)].right = right;
    return node_id;
}

void DecisionTree::fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                       uint64_t) {
    if (X.empty() || X.size() != y.size()) fail_data("decision tree: bad training data");
    nodes.clear();
    std::vector<int> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    build(X, y, idx, 0, 0, nullptr);
}

void DecisionTree::fit_subsampled(const std::vector<std::vector<double>>& X,
                                  const std::vector<int>& y, int mtry, uint64_t seed) {
    if (X.empty() || X.size() != y.size()) fail_data("decision tree: bad training data");
    nodes.clear();
    SubsampleRng rng(seed);
    std::vector<int> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    build(X, y, idx, 0, mtry, &rng);
}

double DecisionTree::predict_proba(const std::vector<double>& x) const {
    int cur = 0;
    while (nodes[static_cast<size_t>(cur)].feature >= 0) {
        const auto& nd = nodes[static_cast<size_t>(cur)];
        cur = x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(cur)].p_pos;
}

std::string DecisionTree::serialize() const {
    std::ostringstream out;
    out << "tree " << nodes.size() << " " << max_depth_ << " " << min_leaf_ << "\n";
    for (const auto& nd : nodes) {
        out << nd.feature << " " << fmt17(nd.threshold) << " " << nd.left << " " << nd.right
            << " " << fmt17(nd.p_pos) << "\n";
    }
    return out.str();
}

void DecisionTree::deserialize(const std::string& blob) {
    std::istringstream in(blob);
    std::string tag;
    size_t n = 0;
    in >> tag >> n >> max_depth_ >> min_leaf_;
    if (tag != "tree") fail_data("not a decision-tree blob");
    nodes.assign(n, {});
    for (auto& nd : nodes) {
        in >> nd.feature >> nd.threshold >> nd.left >> nd.right >> nd.p_pos;
    }
    if (!in) fail_data("truncated decision-tree blob");
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

void RandomForest::fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                       uint64_t seed) {
    if (X.empty() || X.size() != y.size()) fail_data("random forest: bad training data");
    const int n = static_cast<int>(X.size());
    const int d = static_cast<int>(X[0].size());
    const int mtry = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d)))));
    trees_.assign(static_cast<size_t>(n_trees_), DecisionTree(max_depth_));
    for (int t = 0; t < n_trees_; ++t) {
        Rng rng(derive_seed(seed, "forest_tree/" + std::to_string(t)));
        std::vector<std::vector<double>> Xb;
        std::vector<int> yb;
        Xb.reserve(static_cast<size_t>(n));
        yb.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            const auto pick = static_cast<size_t>(rng.below(static_cast<uint64_t>(n)));
            Xb.push_back(X[pick]);
            yb.push_back(y[pick]);
        }
        // bootstrap can be single-class; that tree degenerates to a leaf
        trees_[static_cast<size_t>(t)].fit_subsampled(
            Xb, yb, mtry, derive_seed(seed, "forest_feats/" + std::to_string(t)));
    }
}

double RandomForest::predict_proba(const std::vector<double>& x) const {
    double acc = 0.0;
    for (const auto& tree : trees_) acc += tree.predict_proba(x);
    return trees_.empty() ? 0.0 : acc / static_cast<double>(trees_.size());
}

std::string RandomForest::serialize() const {
    std::ostringstream out;
    out << "forest " << trees_.size() << " " << n_trees_ << " " << max_depth_ << "\n";
    for (const auto& tree : trees_) out << tree.serialize();
    return out.str();
}

void RandomForest::deserialize(const std::string& blob) {
    std::istringstream in(blob);
    std::string tag;
    size_t n = 0;
    in >> tag >> n >> n_trees_ >> max_depth_;
    if (tag != "forest") fail_data("not a random-forest blob");
    std::string line;
    std::getline(in, line); // rest of the header line
    trees_.assign(n, DecisionTree(max_depth_));
    for (auto& tree : trees_) {
        std::string sub;
        std::getline(in, line);
        sub = line + "\n";
        std::istringstream hdr(line);
        std::string t2;
        size_t nn = 0;
        hdr >> t2 >> nn;
        for (size_t i = 0; i < nn; ++i) {
            std::getline(in, line);
            sub += line + "\n";
        }
        tree.deserialize(sub);
    }
    if (!in) fail_data("truncated random-forest blob");
}

// ---------------------------------------------------------------------------
// Logistic regression (IRLS, L2)
// ---------------------------------------------------------------------------

void LogisticRegression::fit(const std::vector<std::vector<double>>& X,
                             const std::vector<int>& y, uint64_t) {
    if (X.empty() || X.size() != y.size()) fail_data("logistic regression: bad training data");
    const int n = static_cast<int>(X.size());
    const int d = static_cast<int>(X[0].size());
    const double lambda = 1.0 / c_;

    Eigen::MatrixXd A(n, d + 1);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) A(i, j) = X[static_cast<size_t>(i)][static_cast<size_t>(j)];
        A(i, d) = 1.0;
        t(i) = y[static_cast<size_t>(i)];
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd z = A * w;
        Eigen::VectorXd p(n), wt(n);
        for (int i = 0; i < n; ++i) {
            p(i) = sigmoid(z(i));
            wt(i) = std::max(p(i) * (1.0 - p(i)), 1e-9);
        }
        Eigen::VectorXd grad = A.transpose() * (p - t);
        for (int j = 0; j < d; ++j) grad(j) += lambda * w(j); // intercept unpenalized
        Eigen::MatrixXd H = A.transpose() * wt.asDiagonal() * A;
        for (int j = 0; j < d; ++j) H(j, j) += lambda;
        H.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = H.ldlt().solve(grad);
        w -= step;
        if (step.norm() < 1e-10) break;
    }
    w_.assign(w.data(), w.data() + d + 1);
}

double LogisticRegression::decision(const std::vector<double>& x) const {
    double z = w_.back();
    for (size_t j = 0; j + 1 < w_.size(); ++j) z += w_[j] * x[j];
    return z;
}

double LogisticRegression::predict_proba(const std::vector<double>& x) const {
    return sigmoid(decision(x));
}

std::string LogisticRegression::serialize() const {
    std::ostringstream out;
    out << "logreg " << w_.size() << " " << fmt17(c_) << "\n";
    for (double v : w_) out << fmt17(v) << "\n";
    return out.str();
}

void LogisticRegression::deserialize(const std::string& blob) {
    std::istringstream in(blob);
    std::string tag;
    size_t n = 0;
    in >> tag >> n >> c_;
    if (tag != "logreg") fail_data("not a logistic-regression blob");
    w_.assign(n, 0.0);
    for (auto& v : w_) in >> v;
    if (!in) fail_data("truncated logistic-regression blob");
}

// ---------------------------------------------------------------------------
// SVM (RBF, SMO) with Platt calibration on a held-out fifth
// ---------------------------------------------------------------------------

namespace {

double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return std::exp(-gamma * acc);
}

struct SmoResult {
    std::vector<double> alpha;
    double b = 0.0;
};

SmoResult smo_train(const std::vector<std::vector<double>>& X, const std::vector<int>& ypm,
                    double C, double gamma) {
    const int n = static_cast<int>(X.size());
    std::vector<double> K(static_cast<size_t>(n) * n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            K[static_cast<size_t>(i) * n + j] = rbf(X[static_cast<size_t>(i)],
                                                    X[static_cast<size_t>(j)], gamma);
        }
    }
    auto kk = [&](int i, int j) { return K[static_cast<size_t>(i) * n + j]; };

    SmoResult res;
    res.alpha.assign(static_cast<size_t>(n), 0.0);
    double& b = res.b;
    auto& alpha = res.alpha;

    auto f = [&](int i) {
        double acc = b;
        for (int t = 0; t < n; ++t) {
            if (alpha[static_cast<size_t>(t)] != 0.0) {
                acc += alpha[static_cast<size_t>(t)] * ypm[static_cast<size_t>(t)] * kk(t, i);
            }
        }
        return acc;
    };

    const double tol = 1e-3;
    int passes = 0;
    const int max_passes = 10;
    int guard = 0;
    while (passes < max_passes && guard < 10000) {
        ++guard;
        int changed = 0;
        for (int i = 0; i < n; ++i) {
            const double Ei = f(i) - ypm[static_cast<size_t>(i)];
            if (!((ypm[static_cast<size_t>(i)] * Ei < -tol && alpha[static_cast<size_t>(i)] < C) ||
                  (ypm[static_cast<size_t>(i)] * Ei > tol && alpha[static_cast<size_t>(i)] > 0))) {
                continue;
            }
            // second choice: maximize |Ei - Ej| (deterministic, lowest index wins ties)
            int j = -1;
            double best_gap = -1.0, Ej = 0.0;
            for (int cand = 0; cand < n; ++cand) {
                if (cand == i) continue;
                const double Ec = f(cand) - ypm[static_cast<size_t>(cand)];
                const double gap = std::abs(Ei - Ec);
                if (gap > best_gap + 1e-15) {
                    best_gap = gap;
                    j = cand;
                    Ej = Ec;
                }
            }
            if (j < 0) continue;

            const double ai_old = alpha[static_cast<size_t>(i)];
            const double aj_old = alpha[static_cast<size_t>(j)];
            double L, H;
            if (ypm[static_cast<size_t>(i)] != ypm[static_cast<size_t>(j)]) {
                L = std::max(0.0, aj_old - ai_old);
                H = std::min(C, C + aj_old - ai_old);
            } else {
                L = std::max(0.0, ai_old + aj_old - C);
                H = std::min(C, ai_old + aj_old);
            }
            if (L >= H) continue;
            const double eta = 2.0 * kk(i, j) - kk(i, i) - kk(j, j);
            if (eta >= 0.0) continue;
            double aj = aj_old - ypm[static_cast<size_t>(j)] * (Ei - Ej) / eta;
            aj = std::min(H, std::max(L, aj));
            if (std::abs(aj - aj_old) < 1e-5) continue;
            const double ai = ai_old + ypm[static_cast<size_t>(i)] * ypm[static_cast<size_t>(j)] *
                                           (aj_old - aj);
            alpha[static_cast<size_t>(i)] = ai;
            alpha[static_cast<size_t>(j)] = aj;

            const double b1 = b - Ei - ypm[static_cast<size_t>(i)] * (ai - ai_old) * kk(i, i) -
                              ypm[static_cast<size_t>(j)] * (aj - aj_old) * kk(i, j);
            const double b2 = b - Ej - ypm[static_cast<size_t>(i)] * (ai - ai_old) * kk(i, j) -
                              ypm[static_cast<size_t>(j)] * (aj - aj_old) * kk(j, j);
            if (ai > 0.0 && ai < C) {
                b = b1;
            } else if (aj > 0.0 && aj < C) {
                b = b2;
            } else {
                b = (b1 + b2) / 2.0;
            }
            ++changed;
        }
        passes = changed == 0 ? passes + 1 : 0;
    }
    return res;
}

// Platt scaling with the standard prior-smoothed targets; Newton iterations.
std::pair<double, double> platt_fit(const std::vector<double>& decisions,
                                    const std::vector<int>& y) {
    int np = 0, nn = 0;
    for (int v : y) (v == 1 ? np : nn)++;
    const double tp = (np + 1.0) / (np + 2.0);
    const double tn = 1.0 / (nn + 2.0);

    double A = 0.0, B = std::log((nn + 1.0) / (np + 1.0));
    for (int iter = 0; iter < 100; ++iter) {
        double g1 = 0.0, g2 = 0.0, h11 = 0.0, h12 = 0.0, h22 = 0.0;
        for (size_t i = 0; i < decisions.size(); ++i) {
            const double t = y[i] == 1 ? tp : tn;
            const double fApB = decisions[i] * A + B;
            const double p = fApB >= 0 ? std::exp(-fApB) / (1.0 + std::exp(-fApB))
                                       : 1.0 / (1.0 + std::exp(fApB));
            const double d2 = std::max(p * (1.0 - p), 1e-12);
            g1 += decisions[i] * (p - t);
            g2 += (p - t);
            h11 += decisions[i] * decisions[i] * d2;
            h12 += decisions[i] * d2;
            h22 += d2;
        }
        h11 += 1e-12;
        h22 += 1e-12;
        const double det = h11 * h22 - h12 * h12;
        const double dA = -(h22 * g1 - h12 * g2) / det;
        const double dB = -(h11 * g2 - h12 * g1) / det;
        A += dA;
        B += dB;
        if (std::abs(dA) < 1e-12 && std::abs(dB) < 1e-12) break;
    }
    return {A, B};
}

} // namespace

void SvmRbf::fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                 uint64_t seed) {
    if (X.empty() || X.size() != y.size()) fail_data("svm: bad training data");
    const int n = static_cast<int>(X.size());
    const int d = static_cast<int>(X[0].size());

    // gamma = 1 / (d * mean feature variance), the usual "scale" heuristic
    double var_sum = 0.0;
    for (int j = 0; j < d; ++j) {
        double m = 0.0, m2 = 0.0;
        for (int i = 0; i < n; ++i) {
            m += X[static_cast<size_t>(i)][static_cast<size_t>(j)];
            m2 += X[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                  X[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
        m /= n;
        var_sum += std::max(0.0, m2 / n - m * m);
    }
    const double mean_var = var_sum / d;
    gamma_ = mean_var > 1e-12 ? 1.0 / (d * mean_var) : 1.0 / d;

    // held-out fifth for the sigmoid fit (every 5th index, offset from seed)
    const size_t offset = seed % 5;
    std::vector<int> fit_idx, cal_idx;
    for (int i = 0; i < n; ++i) {
        ((static_cast<size_t>(i) % 5 == offset) ? cal_idx : fit_idx).push_back(i);
    }
    auto has_both = [&](const std::vector<int>& idx) {
        bool pos = false, neg = false;
        for (int i : idx) (y[static_cast<size_t>(i)] == 1 ? pos : neg) = true;
        return pos && neg;
    };
    if (!has_both(fit_idx) || !has_both(cal_idx)) {
        fit_idx.resize(static_cast<size_t>(n));
        std::iota(fit_idx.begin(), fit_idx.end(), 0);
        cal_idx = fit_idx; // degenerate split; calibrate in-sample
    }

    std::vector<std::vector<double>> Xf;
    std::vector<int> ypm;
    for (int i : fit_idx) {
        Xf.push_back(X[static_cast<size_t>(i)]);
        ypm.push_back(y[static_cast<size_t>(i)] == 1 ? 1 : -1);
    }
    const SmoResult res = smo_train(Xf, ypm, c_, gamma_);

    sv_.clear();
    alpha_y_.clear();
    for (size_t i = 0; i < Xf.size(); ++i) {
        if (res.alpha[i] > 1e-12) {
            sv_.push_back(Xf[i]);
            alpha_y_.push_back(res.alpha[i] * ypm[i]);
        }
    }
    b_ = res.b;

    std::vector<double> decisions;
    std::vector<int> ycal;
    for (int i : cal_idx) {
        decisions.push_back(decision(X[static_cast<size_t>(i)]));
        ycal.push_back(y[static_cast<size_t>(i)]);
    }
    std::tie(platt_a_, platt_b_) = platt_fit(decisions, ycal);
}

double SvmRbf::decision(const std::vector<double>& x) const {
    double acc = b_;
    for (size_t i = 0; i < sv_.size(); ++i) acc += alpha_y_[i] * rbf(sv_[i], x, gamma_);
    return acc;
}

double SvmRbf::predict_proba(const std::vector<double>& x) const {
    const double fApB = decision(x) * platt_a_ + platt_b_;
    return fApB >= 0 ? std::exp(-fApB) / (1.0 + std::exp(-fApB)) : 1.0 / (1.0 + std::exp(fApB));
}

std::string SvmRbf::serialize() const {
    std::ostringstream out;
    out << "svm " << sv_.size() << " " << (sv_.empty() ? 0 : sv_[0].size()) << " "
        << fmt17(c_) << " " << fmt17(gamma_) << " " << fmt17(b_) << " " << fmt17(platt_a_)
        << " " << fmt17(platt_b_) << "\n";
    for (size_t i = 0; i < sv_.size(); ++i) {
        out << fmt17(alpha_y_[i]);
        for (double v : sv_[i]) out << " " << fmt17(v);
        out << "\n";
    }
    return out.str();
}

void SvmRbf::deserialize(const std::string& blob) {
    std::istringstream in(blob);
    std::string tag;
    size_t nsv = 0, dim = 0;
    in >> tag >> nsv >> dim >> c_ >> gamma_ >> b_ >> platt_a_ >> platt_b_;
    if (tag != "svm") fail_data("not an svm blob");
    sv_.assign(nsv, std::vector<double>(dim, 0.0));
    alpha_y_.assign(nsv, 0.0);
    for (size_t i = 0; i < nsv; ++i) {
        in >> alpha_y_[i];
        for (size_t j = 0; j < dim; ++j) in >> sv_[i][j];
    }
    if (!in) fail_data("truncated svm blob");
}

// ---------------------------------------------------------------------------
// kNN
// ---------------------------------------------------------------------------

void KnnClassifier::fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                        uint64_t) {
    if (X.empty() || X.size() != y.size()) fail_data("knn: bad training data");
    X_ = X;
    y_ = y;
}

double KnnClassifier::predict_proba(const std::vector<double>& x) const {
    std::vector<std::pair<double, int>> dist(X_.size());
    for (size_t i = 0; i < X_.size(); ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < x.size(); ++j) {
            const double diff = X_[i][j] - x[j];
            acc += diff * diff;
        }
        dist[i] = {std::sqrt(acc), static_cast<int>(i)};
    }
    const size_t k = std::min(static_cast<size_t>(k_), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());

    // exact matches dominate: average their labels
    int zero_count = 0;
    double zero_sum = 0.0;
    for (size_t i = 0; i < k && dist[i].first < 1e-12; ++i) {
        ++zero_count;
        zero_sum += y_[static_cast<size_t>(dist[i].second)];
    }
    if (zero_count > 0) return zero_sum / zero_count;

    double wsum = 0.0, acc = 0.0;
    for (size_t i = 0; i < k; ++i) {
        const double w = 1.0 / (dist[i].first + 1e-12);
        wsum += w;
        acc += w * y_[static_cast<size_t>(dist[i].second)];
    }
    return acc / wsum;
}

std::string KnnClassifier::serialize() const {
    std::ostringstream out;
    out << "knn " << k_ << " " << X_.size() << " " << (X_.empty() ? 0 : X_[0].size()) << "\n";
    for (size_t i = 0; i < X_.size(); ++i) {
        out << y_[i];
        for (double v : X_[i]) out << " " << fmt17(v);
        out << "\n";
    }
    return out.str();
}

void KnnClassifier::deserialize(const std::string& blob) {
    std::istringstream in(blob);
    std::string tag;
    size_t n = 0, dim = 0;
    in >> tag >> k_ >> n >> dim;
    if (tag != "knn") fail_data("not a knn blob");
    X_.assign(n, std::vector<double>(dim, 0.0));
    y_.assign(n, 0);
    for (size_t i = 0; i < n; ++i) {
        in >> y_[i];
        for (size_t j = 0; j < dim; ++j) in >> X_[i][j];
    }
    if (!in) fail_data("truncated knn blob");
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

const char* voting_name(VotingMode mode) { return mode == VotingMode::hard ? "hard" : "soft"; }

VotingMode voting_from_name(const std::string& name) {
    if (name == "hard") return VotingMode::hard;
    if (name == "soft") return VotingMode::soft;
    fail_usage("unknown voting mode: " + name + " (expected hard or soft)");
}

namespace {

std::unique_ptr<Classifier> make_member(const std::string& kind, const EnsembleConfig& cfg) {
    if (kind == "decision_tree") return std::make_unique<DecisionTree>(cfg.tree_max_depth);
    if (kind == "random_forest") {
        return std::make_unique<RandomForest>(cfg.forest_trees, cfg.tree_max_depth);
    }
    if (kind == "logistic_regression") return std::make_unique<LogisticRegression>(cfg.logistic_c);
    if (kind == "support_vector_machine") return std::make_unique<SvmRbf>(cfg.svm_c);
    if (kind == "k_nearest_neighbors") return std::make_unique<KnnClassifier>(cfg.knn_k);
    fail_data("unknown ensemble member kind: " + kind);
}

const std::array<const char*, 5> kMemberOrder = {
    "decision_tree", "random_forest", "logistic_regression", "support_vector_machine",
    "k_nearest_neighbors",
};

} // namespace

EnsembleModel train_ensemble(const std::vector<std::vector<double>>& Z,
                             const std::vector<int>& y, const EnsembleConfig& cfg,
                             VotingMode voting, double threshold) {
    if (Z.empty() || Z.size() != y.size()) fail_data("train_ensemble: bad training data");
    if (!(threshold > 0.0 && threshold < 1.0)) fail_usage("ensemble threshold must be in (0,1)");
    bool pos = false, neg = false;
    for (int v : y) (v == 1 ? pos : neg) = true;
    if (!pos || !neg) fail_data("train_ensemble: single-class labels");

    EnsembleModel model;
    model.voting = voting;
    model.threshold = threshold;
    for (const char* kind : kMemberOrder) {
        auto member = make_member(kind, cfg);
        // independent member seeds: retraining one never touches another
        member->fit(Z, y, derive_seed(cfg.seed, std::string("member/") + kind));
        model.members.push_back(std::move(member));
    }
    return model;
}

Vote vote(const EnsembleModel& ensemble, const std::vector<double>& z) {
    Vote v;
    v.member_probs.reserve(ensemble.members.size());
    for (const auto& member : ensemble.members) {
        v.member_probs.push_back(member->predict_proba(z));
    }
    if (ensemble.voting == VotingMode::soft) {
        double acc = 0.0;
        for (double p : v.member_probs) acc += p;
        v.probability = acc / static_cast<double>(v.member_probs.size());
        v.label = v.probability >= ensemble.threshold ? 1 : 0;
    } else {
        int pos = 0;
        for (double p : v.member_probs) pos += p >= 0.5 ? 1 : 0;
        v.probability = static_cast<double>(pos) / static_cast<double>(v.member_probs.size());
        v.label = 2 * pos > static_cast<int>(v.member_probs.size()) ? 1 : 0;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Detector bundle
// ---------------------------------------------------------------------------

std::vector<double> trio_features(DetectorBundle& bundle, const nets::Tensor& x_rgb,
                                  const nets::Tensor& x_stack) {
    std::vector<double> row;
    const auto f1 = nets::extract_features(bundle.component1, x_rgb);
    const auto f2 = nets::extract_features(bundle.component2, x_stack);
    const auto f3 = nets::extract_siamese_features(bundle.component3, x_rgb);
    row.reserve(f1.size() + f2.size() + f3.size());
    for (float v : f1) row.push_back(v);
    for (float v : f2) row.push_back(v);
    for (float v : f3) row.push_back(v);
    return row;
}

Vote predict_disease(DetectorBundle& bundle, const Image& img) {
    const Image cropped = imgproc::crop_fundus(img, bundle.prep.crop_threshold);
    const Image balanced = imgproc::balance_histogram(cropped, bundle.prep.clahe);

    const Image rgb1 = imgproc::resize_bilinear(balanced, bundle.component1.input_size,
                                                bundle.component1.input_size);
    const Image rgb2 = imgproc::resize_bilinear(balanced, bundle.component2.input_size,
                                                bundle.component2.input_size);
    const Image rgb3 = imgproc::resize_bilinear(balanced, bundle.component3.twin.input_size,
                                                bundle.component3.twin.input_size);
    const auto stack = imgproc::make_stack(rgb2, bundle.prep.filters);

    const auto t1 = nets::tensor_from_image(rgb1);
    const auto t2 = nets::tensor_from_stack(stack);
    const auto t3 = nets::tensor_from_image(rgb3);

    std::vector<double> row;
    const auto f1 = nets::extract_features(bundle.component1, t1);
    const auto f2 = nets::extract_features(bundle.component2, t2);
    const auto f3 = nets::extract_siamese_features(bundle.component3, t3);
    for (float v : f1) row.push_back(v);
    for (float v : f2) row.push_back(v);
    for (float v : f3) row.push_back(v);

    const auto z = project_row(bundle.pca, row);
    return vote(bundle.ensemble, z);
}

void save_pca(const std::filesystem::path& dir, const PCATransform& pca) {
    std::filesystem::create_directories(dir);
    {
        std::vector<std::vector<std::string>> rows;
        for (double v : pca.mean) rows.push_back({fmt17(v)});
        write_csv(dir / "mean.csv", {"mean"}, rows);
    }
    {
        std::vector<std::string> header;
        for (int j = 0; j < pca.d; ++j) header.push_back("c" + std::to_string(j));
        std::vector<std::vector<std::string>> rows;
        for (int i = 0; i < pca.k; ++i) {
            std::vector<std::string> row;
            for (int j = 0; j < pca.d; ++j) row.push_back(fmt17(pca.component(i, j)));
            rows.push_back(std::move(row));
        }
        write_csv(dir / "components.csv", header, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (double v : pca.explained_variance) rows.push_back({fmt17(v)});
        rows.push_back({fmt17(pca.total_variance)}); // trailing total row
        write_csv(dir / "variance.csv", {"explained_variance"}, rows);
    }
}

PCATransform load_pca(const std::filesystem::path& dir) {
    PCATransform pca;
    {
        const auto table = read_csv(dir / "mean.csv");
        for (const auto& row : table.rows) {
            double v = 0.0;
            if (!parse_double(row.at(0), v)) fail_data("pca mean.csv: bad value");
            pca.mean.push_back(v);
        }
        pca.d = static_cast<int>(pca.mean.size());
    }
    {
        const auto table = read_csv(dir / "components.csv");
        pca.k = static_cast<int>(table.rows.size());
        for (const auto& row : table.rows) {
            if (static_cast<int>(row.size()) != pca.d) fail_data("pca components.csv: bad width");
            for (const auto& cell : row) {
                double v = 0.0;
                if (!parse_double(cell, v)) fail_data("pca components.csv: bad value");
                pca.components.push_back(v);
            }
        }
    }
    {
        const auto table = read_csv(dir / "variance.csv");
        if (table.rows.size() != static_cast<size_t>(pca.k) + 1) {
            fail_data("pca variance.csv: expected k+1 rows");
        }
        for (size_t i = 0; i + 1 < table.rows.size(); ++i) {
            double v = 0.0;
            if (!parse_double(table.rows[i].at(0), v)) fail_data("pca variance.csv: bad value");
            pca.explained_variance.push_back(v);
        }
        if (!parse_double(table.rows.back().at(0), pca.total_variance)) {
            fail_data("pca variance.csv: bad total row");
        }
    }
    return pca;
}

void save_bundle(const std::filesystem::path& dir, const DetectorBundle& bundle) {
    std::filesystem::create_directories(dir);

    ordered_json j;
    j["version"] = bundle.version;
    j["disease"] = dataset::disease_name(bundle.disease);
    j["voting"] = voting_name(bundle.ensemble.voting);
    j["threshold"] = bundle.ensemble.threshold;
    ordered_json spec = ordered_json::array();
    for (const auto& [tag, width] : bundle.column_spec) {
        spec.push_back({{"tag", tag}, {"dim", width}});
    }
    j["column_spec"] = spec;
    j["prep"] = {
        {"crop_threshold", bundle.prep.crop_threshold},
        {"clahe_tiles", bundle.prep.clahe.tiles},
        {"clahe_clip", bundle.prep.clahe.clip},
        {"posterize_bits", bundle.prep.filters.posterize_bits},
        {"posterize_mode",
         bundle.prep.filters.posterize_mode == imgproc::PosterizeMode::truncate ? "truncate"
                                                                                : "nearest"},
    };
    atomic_write_file(dir / "manifest.json", j.dump(2) + "\n");

    nets::save_component(dir / "component1", bundle.component1, nullptr);
    nets::save_component(dir / "component2", bundle.component2, nullptr);
    nets::save_siamese(dir / "component3", bundle.component3, nullptr);
    save_pca(dir / "pca", bundle.pca);

    std::filesystem::create_directories(dir / "ensemble");
    for (const auto& member : bundle.ensemble.members) {
        atomic_write_file(dir / "ensemble" / (member->kind() + ".txt"), member->serialize());
    }
}

DetectorBundle load_bundle(const std::filesystem::path& dir) {
    DetectorBundle bundle;
    const auto j = ordered_json::parse(read_file(dir / "manifest.json"));
    bundle.version = j.at("version").get<std::string>();
    const auto disease = dataset::disease_from_name(j.at("disease").get<std::string>());
    if (!disease) fail_data("bundle manifest: unknown disease");
    bundle.disease = *disease;
    bundle.ensemble.voting = voting_from_name(j.at("voting").get<std::string>());
    bundle.ensemble.threshold = j.at("threshold").get<double>();
    for (const auto& entry : j.at("column_spec")) {
        bundle.column_spec.emplace_back(entry.at("tag").get<std::string>(),
                                        entry.at("dim").get<int>());
    }
    const auto& prep = j.at("prep");
    bundle.prep.crop_threshold = static_cast<uint8_t>(prep.at("crop_threshold").get<int>());
    bundle.prep.clahe.tiles = prep.at("clahe_tiles").get<int>();
    bundle.prep.clahe.clip = prep.at("clahe_clip").get<double>();
    bundle.prep.filters.posterize_bits = prep.at("posterize_bits").get<int>();
    bundle.prep.filters.posterize_mode =
        prep.at("posterize_mode").get<std::string>() == "nearest" ? imgproc::PosterizeMode::nearest
                                                                  : imgproc::PosterizeMode::truncate;

    bundle.component1 = nets::load_component(dir / "component1");
    bundle.component2 = nets::load_component(dir / "component2");
    bundle.component3 = nets::load_siamese(dir / "component3");
    bundle.pca = load_pca(dir / "pca");

    for (const char* kind : kMemberOrder) {
        EnsembleConfig defaults;
        auto member = make_member(kind, defaults);
        member->deserialize(read_file(dir / "ensemble" / (std::string(kind) + ".txt")));
        bundle.ensemble.members.push_back(std::move(member));
    }
    return bundle;
}

} // namespace trio::fusion
