#pragma once

#include "trio/dataset.hpp"
#include "trio/layers.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace trio::nets {

// ---------------------------------------------------------------------------
// Losses (double precision; analytic gradients are finite-difference checked)
// ---------------------------------------------------------------------------

inline constexpr double kProbEps = 1e-7;

struct LossBatch {
    std::vector<double> y;     // ground truth in {0,1}
    std::vector<double> y_hat; // predicted probabilities, clamped to [eps, 1-eps]
};

// Mean binary cross entropy, natural log.
double bce_loss(const LossBatch& batch);

// d(loss)/d(y_hat_i), evaluated at the clamped probabilities.
std::vector<double> bce_grad(const LossBatch& batch);

// Pair loss: same -> d^2, different -> max(0, margin - d)^2.
double contrastive_loss(double d, bool same, double margin);
double contrastive_grad_d(double d, bool same, double margin);

// ---------------------------------------------------------------------------
// Components
// ---------------------------------------------------------------------------

enum class BackboneId { tiny, small, large };

const char* backbone_name(BackboneId id);
std::optional<BackboneId> backbone_from_name(const std::string& name);
int backbone_default_input(BackboneId id);

struct BuildConfig {
    BackboneId backbone = BackboneId::tiny;
    std::array<int, 2> head_dims = {256, 128};
    int input_size = 0;   // 0 -> backbone default
    int in_channels = 3;  // 10 for the stage-1 filter stack
    double dropout = 0.3;
    uint64_t seed = 1;
    std::filesystem::path pretrained_dir; // required for small/large backbones
};

// Backbone + global pooling + two dense layers + sigmoid output unit.
// Features are tapped at the penultimate layer (width head_dims[1]).
struct ComponentHead {
    BackboneId backbone = BackboneId::tiny;
    std::array<int, 2> head_dims{};
    int feature_dim = 0;
    int input_size = 0;
    int in_channels = 3;
    double dropout = 0.3;
    uint64_t init_seed = 0;
    bool has_output_unit = true; // false for the Siamese embedding twin
    int backbone_layers = 0;     // leading layers belonging to the backbone
    bool pretrained = false;
    Net net;

    double predict_prob(const Tensor& x); // sigmoid of the output logit
    double logit(const Tensor& x);
    std::vector<float> features(const Tensor& x);
};

struct SiameseModel {
    ComponentHead twin; // weight sharing: both branches are this one network
    double margin = 1.0;
    std::vector<float> proto_pos; // mean training embedding per class,
    std::vector<float> proto_neg; // filled by compute_prototypes

    std::vector<float> embed(const Tensor& x) { return twin.features(x); }
    double distance(const Tensor& a, const Tensor& b);
};

ComponentHead build_component1(const BuildConfig& cfg);
ComponentHead build_component2(const BuildConfig& cfg); // expects in_channels = 10
SiameseModel build_siamese(const BuildConfig& cfg, double margin = 1.0);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 20;
    int batch_size = 16;
    double learning_rate = 1e-4;
    int early_stop_patience = 5;
    uint64_t seed = 1;
    std::string optimizer_name = "adam";
    int unfreeze_epoch = 3; // backbone freeze phase for pretrained backbones
};

struct History {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;

    bool empty() const { return train_loss.empty(); }
};

// Supplies the input tensor for a record id. Training passes distinct
// epoch values so augmentation redraws per epoch; evaluation passes -1 and
// must be deterministic.
using SampleLoader = std::function<Tensor(const std::string& id, int epoch)>;

struct LabeledItem {
    std::string id;
    int label; // 0/1
};

// Binary-cross-entropy training with early stopping on validation loss and
// best-epoch weight restore. Throws a training error on divergence
// (epoch loss > 10x the initial loss three epochs running).
History train_binary_head(ComponentHead& model, const std::vector<LabeledItem>& train_items,
                          const std::vector<LabeledItem>& val_items,
                          const SampleLoader& train_loader, const SampleLoader& val_loader,
                          const TrainConfig& cfg);

History train_siamese(SiameseModel& model, const std::vector<dataset::PairSample>& train_pairs,
                      const std::vector<dataset::PairSample>& val_pairs,
                      const SampleLoader& train_loader, const SampleLoader& val_loader,
                      const TrainConfig& cfg);

// Class prototypes = mean training embeddings (positive and negative).
void compute_prototypes(SiameseModel& model, const std::vector<Tensor>& positives,
                        const std::vector<Tensor>& negatives);

// Component 1/2: penultimate activations. Siamese: embedding plus Euclidean
// distances to the two class prototypes (feature length embedding_dim + 2).
std::vector<float> extract_features(ComponentHead& model, const Tensor& x);
std::vector<float> extract_siamese_features(SiameseModel& model, const Tensor& x);

// ---------------------------------------------------------------------------
// Persistence: <dir>/arch.json, <dir>/weights.bin, <dir>/history.csv
// ---------------------------------------------------------------------------

void save_component(const std::filesystem::path& dir, const ComponentHead& model,
                    const History* history);
ComponentHead load_component(const std::filesystem::path& dir);

void save_siamese(const std::filesystem::path& dir, const SiameseModel& model,
                  const History* history);
SiameseModel load_siamese(const std::filesystem::path& dir);

} // namespace trio::nets
