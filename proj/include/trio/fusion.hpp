#pragma once

#include "trio/dataset.hpp"
#include "trio/image.hpp"
#include "trio/imgproc.hpp"
#include "trio/nets.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace trio::fusion {

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

struct FeatureMatrix {
    std::vector<std::string> ids;                         // row index
    std::vector<double> x;                                // row-major n x d
    int cols = 0;
    std::vector<std::pair<std::string, int>> column_spec; // (component tag, width)

    int rows() const { return static_cast<int>(ids.size()); }
    double& at(int r, int c) { return x[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return x[static_cast<size_t>(r) * cols + c]; }
    std::vector<double> row(int r) const {
        return {x.begin() + static_cast<long>(r) * cols,
                x.begin() + (static_cast<long>(r) + 1) * cols};
    }
};

// CSV cache: header id,<tag>_0,... with 9-significant-digit floats.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);
void write_column_spec(const std::filesystem::path& path, const FeatureMatrix& m);

// Rejects non-finite entries and column_spec/width mismatches.
void validate_feature_matrix(const FeatureMatrix& m);

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct PCATransform {
    std::vector<double> mean;               // d
    std::vector<double> components;         // row-major k x d, orthonormal rows
    std::vector<double> explained_variance; // k, non-increasing
    double total_variance = 0.0;            // sum over all d eigenvalues
    int k = 0;
    int d = 0;

    double component(int i, int j) const { return components[static_cast<size_t>(i) * d + j]; }
};

// Smallest k whose cumulative explained-variance ratio reaches
// variance_target; covariance eigendecomposition on the train split only.
// Sign convention: each component's largest-magnitude entry is nonnegative.
PCATransform fit_pca(const FeatureMatrix& train, double variance_target);

FeatureMatrix project(const PCATransform& pca, const FeatureMatrix& m);
std::vector<double> project_row(const PCATransform& pca, const std::vector<double>& row);

// ---------------------------------------------------------------------------
// Ensemble members
// ---------------------------------------------------------------------------

struct EnsembleConfig {
    int tree_max_depth = 8;
    int forest_trees = 100;
    double logistic_c = 1.0;
    double svm_c = 1.0;
    int knn_k = 5;
    uint64_t seed = 1;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual void fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                     uint64_t seed) = 0;
    virtual double predict_proba(const std::vector<double>& x) const = 0;
    virtual std::string kind() const = 0;
    virtual std::string serialize() const = 0;
    virtual void deserialize(const std::string& blob) = 0;
};

// CART with Gini impurity; deterministic tie-breaking (lowest feature index,
// lowest threshold).
class DecisionTree final : public Classifier {
public:
    explicit DecisionTree(int max_depth = 8, int min_leaf = 1)
        : max_depth_(max_depth), min_leaf_(min_leaf) {}

    void fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
             uint64_t seed) override;
    double predict_proba(const std::vector<double>& x) const override;
    std::string kind() const override { return "decision_tree"; }
    std::string serialize() const override;
    void deserialize(const std::string& blob) override;

    // random-forest hooks: per-node feature subsampling
    void fit_subsampled(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                        int mtry, uint64_t seed);

    struct Node {
        int feature = -1;      // -1 -> leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        double p_pos = 0.0;    // leaf positive fraction
    };
    std::vector<Node> nodes;

private:
    int max_depth_;
    int min_leaf_;
    int build(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
              std::vector<int>& idx, int depth, int mtry, class SubsampleRng* rng);
};

class RandomForest final : public Classifier {
public:
    explicit RandomForest(int n_trees = 100, int max_depth = 8)
        : n_trees_(n_trees), max_depth_(max_depth) {}

    void fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
             uint64_t seed) override;
    double predict_proba(const std::vector<double>& x) const override;
    std::string kind() const override { return "random_forest"; }
    std::string serialize() const override;
    void deserialize(const std::string& blob) override;

private:
    int n_trees_;
    int max_depth_;
    std::vector<DecisionTree> trees_;
};

// L2-regularized logistic regression fit by iteratively reweighted least
// squares (ridge-stabilized Newton steps).
class LogisticRegression final : public Classifier {
public:
    explicit LogisticRegression(double c = 1.0) : c_(c) {}

    void fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
             uint64_t seed) override;
    double predict_proba(const std::vector<double>& x) const override;
    std::string kind() const override { return "logistic_regression"; }
    std::string serialize() const override;
    void deserialize(const std::string& blob) override;

    double decision(const std::vector<double>& x) const;

private:
    double c_;
    std::vector<double> w_; // last entry is the intercept
};

// RBF-kernel C-SVM trained by SMO; probabilities from a Platt sigmoid fit on
// a held-out fifth of the training data.
class SvmRbf final : public Classifier {
public:
    explicit SvmRbf(double c = 1.0) : c_(c) {}

    void fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
             uint64_t seed) override;
    double predict_proba(const std::vector<double>& x) const override;
    std::string kind() const override { return "support_vector_machine"; }
    std::string serialize() const override;
    void deserialize(const std::string& blob) override;

    double decision(const std::vector<double>& x) const;

private:
    double c_;
    double gamma_ = 1.0;
    double b_ = 0.0;
    double platt_a_ = -1.0, platt_b_ = 0.0;
    std::vector<std::vector<double>> sv_;
    std::vector<double> alpha_y_;
};

// Distance-weighted k-nearest-neighbours (weight 1/(d + 1e-12); exact-match
// neighbours short-circuit to the mean of their labels).
class KnnClassifier final : public Classifier {
public:
    explicit KnnClassifier(int k = 5) : k_(k) {}

    void fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
             uint64_t seed) override;
    double predict_proba(const std::vector<double>& x) const override;
    std::string kind() const override { return "k_nearest_neighbors"; }
    std::string serialize() const override;
    void deserialize(const std::string& blob) override;

private:
    int k_;
    std::vector<std::vector<double>> X_;
    std::vector<int> y_;
};

// ---------------------------------------------------------------------------
// Ensemble + voting
// ---------------------------------------------------------------------------

enum class VotingMode { hard, soft };

const char* voting_name(VotingMode mode);
VotingMode voting_from_name(const std::string& name);

struct EnsembleModel {
    std::vector<std::unique_ptr<Classifier>> members; // fixed order: dt, rf, lr, svm, knn
    VotingMode voting = VotingMode::soft;
    double threshold = 0.5;
};

// Trains the five members independently on the PCA-projected train matrix.
EnsembleModel train_ensemble(const std::vector<std::vector<double>>& Z,
                             const std::vector<int>& y, const EnsembleConfig& cfg,
                             VotingMode voting, double threshold);

struct Vote {
    double probability = 0.0;
    int label = 0;
    std::vector<double> member_probs;
};

// Soft: mean member probability vs threshold. Hard: majority of member
// labels (ties negative), probability = positive-vote fraction.
Vote vote(const EnsembleModel& ensemble, const std::vector<double>& z);

// ---------------------------------------------------------------------------
// Detector bundle
// ---------------------------------------------------------------------------

struct PreprocessParams {
    uint8_t crop_threshold = 10;
    imgproc::ClaheParams clahe;
    imgproc::FilterSpec filters;
};

struct DetectorBundle {
    dataset::Disease disease = dataset::Disease::DN;
    std::string version = "1";
    nets::ComponentHead component1;
    nets::ComponentHead component2;
    nets::SiameseModel component3;
    PCATransform pca;
    EnsembleModel ensemble;
    std::vector<std::pair<std::string, int>> column_spec;
    PreprocessParams prep;
};

// Concatenated trio feature row in column_spec order (component1, component2, siamese).
std::vector<double> trio_features(DetectorBundle& bundle, const nets::Tensor& x_rgb,
                                  const nets::Tensor& x_stack);

// Full pipeline on a raw image: preprocess, extract, project, vote.
Vote predict_disease(DetectorBundle& bundle, const Image& img);

void save_bundle(const std::filesystem::path& dir, const DetectorBundle& bundle);
DetectorBundle load_bundle(const std::filesystem::path& dir);

void save_pca(const std::filesystem::path& dir, const PCATransform& pca);
PCATransform load_pca(const std::filesystem::path& dir);

} // namespace trio::fusion
