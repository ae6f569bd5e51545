#include "trio/nets.hpp"

#include "trio/csv.hpp"
#include "trio/error.hpp"
#include "trio/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace trio::nets {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace {

double clamp_prob(double p) {
    return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}

} // namespace

double bce_loss(const LossBatch& batch) {
    const size_t n = batch.y.size();
    if (n == 0 || batch.y_hat.size() != n) fail_usage("bce_loss: batch sizes mismatch or empty");
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double y = batch.y[i];
        if (y != 0.0 && y != 1.0) fail_usage("bce_loss: labels must be 0 or 1");
        const double p = clamp_prob(batch.y_hat[i]);
        acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(n);
}

std::vector<double> bce_grad(const LossBatch& batch) {
    const size_t n = batch.y.size();
    std::vector<double> g(n);
    for (size_t i = 0; i < n; ++i) {
        const double y = batch.y[i];
        const double p = clamp_prob(batch.y_hat[i]);
        g[i] = -(y / p - (1.0 - y) / (1.0 - p)) / static_cast<double>(n);
    }
    return g;
}

double contrastive_loss(double d, bool same, double margin) {
    if (d < 0.0 || margin <= 0.0) fail_usage("contrastive_loss: d >= 0 and margin > 0 required");
    if (same) return d * d;
    const double gap = margin - d;
    return gap > 0.0 ? gap * gap : 0.0;
}

double contrastive_grad_d(double d, bool same, double margin) {
    if (same) return 2.0 * d;
    const double gap = margin - d;
    return gap > 0.0 ? -2.0 * gap : 0.0;
}

// ---------------------------------------------------------------------------
// Architecture assembly
// ---------------------------------------------------------------------------

const char* backbone_name(BackboneId id) {
    switch (id) {
        case BackboneId::tiny: return "tiny";
        case BackboneId::small: return "small";
        case BackboneId::large: return "large";
    }
    return "tiny";
}

std::optional<BackboneId> backbone_from_name(const std::string& name) {
    if (name == "tiny") return BackboneId::tiny;
    if (name == "small") return BackboneId::small;
    if (name == "large") return BackboneId::large;
    return std::nullopt;
}

int backbone_default_input(BackboneId id) {
    switch (id) {
        case BackboneId::tiny: return 64;
        case BackboneId::small: return 224;
        case BackboneId::large: return 300;
    }
    return 64;
}

namespace {

std::vector<int> backbone_channels(BackboneId id) {
    switch (id) {
        case BackboneId::tiny: return {16, 32, 64, 128};
        case BackboneId::small: return {24, 40, 80, 112, 192};
        case BackboneId::large: return {24, 48, 96, 136, 232, 384};
    }
    return {16, 32, 64, 128};
}

void write_weights(const std::filesystem::path& path, Net& net) {
    std::string buf = "TRIOW1";
    std::vector<ParamTensor*> all;
    for (auto& layer : net.layers) {
        for (auto* p : layer->params()) all.push_back(p);
    }
    auto put_u32 = [&buf](uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put_u32(static_cast<uint32_t>(all.size()));
    for (auto* p : all) {
        put_u32(static_cast<uint32_t>(p->w.size()));
        buf.append(reinterpret_cast<const char*>(p->w.data()), p->w.size() * sizeof(float));
    }
    atomic_write_file(path, buf);
}

void read_weights(const std::filesystem::path& path, Net& net) {
    const std::string buf = read_file(path);
    if (buf.size() < 6 || buf.compare(0, 6, "TRIOW1") != 0) {
        fail_data("not a weights blob (bad magic): " + path.string());
    }
    size_t pos = 6;
    auto get_u32 = [&]() {
        if (pos + 4 > buf.size()) fail_data("weights blob truncated: " + path.string());
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    };
    std::vector<ParamTensor*> all;
    for (auto& layer : net.layers) {
        for (auto* p : layer->params()) all.push_back(p);
    }
    const uint32_t count = get_u32();
    if (count != all.size()) {
        fail_data("weights blob has " + std::to_string(count) + " arrays, architecture expects " +
                  std::to_string(all.size()) + ": " + path.string());
    }
    for (auto* p : all) {
        const uint32_t len = get_u32();
        if (len != p->w.size()) fail_data("weights array length mismatch: " + path.string());
        if (pos + len * sizeof(float) > buf.size()) fail_data("weights blob truncated: " + path.string());
        std::memcpy(p->w.data(), buf.data() + pos, len * sizeof(float));
        pos += len * sizeof(float);
    }
}

// Backbone-only sub-network used to load a pretrained blob into a freshly
// assembled head (the blob covers backbone layers, 3-channel input).
ComponentHead assemble(const BuildConfig& cfg, bool output_unit, bool attach_pretrained) {
    ComponentHead model;
    model.backbone = cfg.backbone;
    model.head_dims = cfg.head_dims;
    model.feature_dim = cfg.head_dims[1];
    model.input_size = cfg.input_size > 0 ? cfg.input_size : backbone_default_input(cfg.backbone);
    model.in_channels = cfg.in_channels;
    model.dropout = cfg.dropout;
    model.init_seed = cfg.seed;
    model.has_output_unit = output_unit;

    Rng rng(derive_seed(cfg.seed, std::string("net_init/") + backbone_name(cfg.backbone)));
    Net& net = model.net;

    const bool needs_pretrained = cfg.backbone != BackboneId::tiny;
    int backbone_in = cfg.in_channels;
    if (needs_pretrained && cfg.in_channels != 3) {
        // learned 1x1 projection keeps a 3-channel pretrained first layer usable
        auto proj = std::make_unique<Conv2d>(cfg.in_channels, 3, 1, 1, 0);
        proj->init_weights(rng);
        net.layers.push_back(std::move(proj));
        backbone_in = 3;
    }

    const int backbone_start = static_cast<int>(net.layers.size());
    int ch_in = backbone_in;
    for (int ch_out : backbone_channels(cfg.backbone)) {
        auto conv = std::make_unique<Conv2d>(ch_in, ch_out, 3, 2, 1);
        conv->init_weights(rng);
        net.layers.push_back(std::move(conv));
        net.layers.push_back(std::make_unique<ReLU>());
        ch_in = ch_out;
    }
    net.layers.push_back(std::make_unique<GlobalAvgPool>());
    model.backbone_layers = static_cast<int>(net.layers.size());

    if (needs_pretrained && attach_pretrained) {
        if (cfg.pretrained_dir.empty()) {
            fail_data(std::string("backbone '") + backbone_name(cfg.backbone) +
                      "' needs pretrained weights but no pretrained_dir is configured; "
                      "set nets.pretrained_dir or select the tiny backbone");
        }
        const auto blob = cfg.pretrained_dir /
                          (std::string(backbone_name(cfg.backbone)) + "_backbone.tnw");
        if (!std::filesystem::exists(blob)) {
            fail_data("pretrained weight blob not found: " + blob.string() +
                      "\nFetch/convert instructions: see README 'Pretrained backbone assets'; "
                      "weights are never downloaded implicitly.");
        }
        // the blob is backbone-shaped (3-channel input); read it into a
        // temporary net with identical layer shapes, then copy values over
        Net tmp;
        int tc = 3;
        for (int ch_out : backbone_channels(cfg.backbone)) {
            tmp.layers.push_back(std::make_unique<Conv2d>(tc, ch_out, 3, 2, 1));
            tmp.layers.push_back(std::make_unique<ReLU>());
            tc = ch_out;
        }
        tmp.layers.push_back(std::make_unique<GlobalAvgPool>());
        read_weights(blob, tmp);
        size_t src = 0;
        std::vector<ParamTensor*> srcs;
        for (auto& l : tmp.layers) {
            for (auto* p : l->params()) srcs.push_back(p);
        }
        for (int i = backbone_start; i < model.backbone_layers; ++i) {
            for (auto* p : net.layers[static_cast<size_t>(i)]->params()) {
                if (src >= srcs.size() || srcs[src]->w.size() != p->w.size()) {
                    fail_data("pretrained blob incompatible with backbone: " + blob.string());
                }
                p->w = srcs[src]->w;
                ++src;
            }
        }
        model.pretrained = true;
    }

    // head: two tuned dense layers, feature tap after the second ReLU
    auto d1 = std::make_unique<Dense>(ch_in, cfg.head_dims[0]);
    d1->init_weights(rng);
    net.layers.push_back(std::move(d1));
    net.layers.push_back(std::make_unique<ReLU>());
    if (output_unit && cfg.dropout > 0.0) {
        net.layers.push_back(std::make_unique<Dropout>(cfg.dropout));
    }
    auto d2 = std::make_unique<Dense>(cfg.head_dims[0], cfg.head_dims[1]);
    d2->init_weights(rng);
    net.layers.push_back(std::move(d2));
    if (output_unit) {
        net.layers.push_back(std::make_unique<ReLU>());
        net.feature_layer = static_cast<int>(net.layers.size()) - 1;
        if (cfg.dropout > 0.0) net.layers.push_back(std::make_unique<Dropout>(cfg.dropout));
        auto out = std::make_unique<Dense>(cfg.head_dims[1], 1);
        out->init_weights(rng);
        net.layers.push_back(std::move(out));
    } else {
        // embedding twin: linear output, no dropout so pair gradients are exact
        net.feature_layer = static_cast<int>(net.layers.size()) - 1;
    }
    return model;
}

} // namespace

double ComponentHead::logit(const Tensor& x) {
    Tensor out = net.forward(x, false, nullptr);
    return out.v.at(0);
}

double ComponentHead::predict_prob(const Tensor& x) {
    return 1.0 / (1.0 + std::exp(-logit(x)));
}

std::vector<float> ComponentHead::features(const Tensor& x) {
    return net.features(x);
}

double SiameseModel::distance(const Tensor& a, const Tensor& b) {
    const auto ea = embed(a);
    const auto eb = embed(b);
    double acc = 0.0;
    for (size_t i = 0; i < ea.size(); ++i) {
        const double diff = static_cast<double>(ea[i]) - eb[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

ComponentHead build_component1(const BuildConfig& cfg) {
    if (cfg.in_channels != 3) fail_usage("component 1 takes 3-channel input");
    return assemble(cfg, true, true);
}

ComponentHead build_component2(const BuildConfig& cfg) {
    if (cfg.in_channels != 10) fail_usage("component 2 takes the 10-channel filter stack");
    return assemble(cfg, true, true);
}

SiameseModel build_siamese(const BuildConfig& cfg, double margin) {
    if (margin <= 0.0) fail_usage("siamese margin must be positive");
    BuildConfig twin_cfg = cfg;
    twin_cfg.dropout = 0.0;
    SiameseModel model;
    model.twin = assemble(twin_cfg, false, true);
    model.margin = margin;
    return model;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<float>> snapshot_params(Net& net) {
    std::vector<std::vector<float>> snap;
    for (auto& layer : net.layers) {
        for (auto* p : layer->params()) snap.push_back(p->w);
    }
    return snap;
}

void restore_params(Net& net, const std::vector<std::vector<float>>& snap) {
    size_t i = 0;
    for (auto& layer : net.layers) {
        for (auto* p : layer->params()) p->w = snap.at(i++);
    }
}

void set_backbone_frozen(ComponentHead& model, bool frozen) {
    for (int i = 0; i < model.backbone_layers; ++i) {
        model.net.layers[static_cast<size_t>(i)]->frozen = frozen;
    }
}

// Fine-tuning phase 2: top 30% of the backbone's parameterized layers train
// at a 0.1x rate, the rest stay frozen.
void unfreeze_backbone_top(ComponentHead& model) {
    std::vector<Layer*> plist;
    for (int i = 0; i < model.backbone_layers; ++i) {
        Layer* l = model.net.layers[static_cast<size_t>(i)].get();
        if (!l->params().empty()) plist.push_back(l);
    }
    const int n_unfreeze = static_cast<int>(std::ceil(0.3 * static_cast<double>(plist.size())));
    for (int i = static_cast<int>(plist.size()) - n_unfreeze; i < static_cast<int>(plist.size()); ++i) {
        if (i < 0) continue;
        plist[static_cast<size_t>(i)]->frozen = false;
        plist[static_cast<size_t>(i)]->lr_scale = 0.1f;
    }
}

struct EpochDriver {
    const TrainConfig& cfg;
    History history;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<float>> best_weights;
    int patience_left;
    double initial_loss = 0.0;
    int diverge_streak = 0;

    explicit EpochDriver(const TrainConfig& c) : cfg(c), patience_left(c.early_stop_patience) {}

    // returns false when training should stop
    bool record(Net& net, int epoch, double train_loss, double val_loss) {
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            fail_train("training diverged: non-finite loss at epoch " + std::to_string(epoch));
        }
        history.train_loss.push_back(train_loss);
        history.val_loss.push_back(val_loss);
        if (epoch == 0) initial_loss = train_loss;
        if (epoch > 0 && train_loss > 10.0 * initial_loss) {
            if (++diverge_streak >= 3) {
                fail_train("training diverged: epoch loss " + std::to_string(train_loss) +
                           " exceeds 10x initial loss for 3 consecutive epochs");
            }
        } else {
            diverge_streak = 0;
        }
        if (val_loss < best_val - 1e-12) {
            best_val = val_loss;
            history.best_epoch = epoch;
            best_weights = snapshot_params(net);
            patience_left = cfg.early_stop_patience;
        } else if (--patience_left <= 0) {
            return false;
        }
        return true;
    }

    void finish(Net& net) {
        if (!best_weights.empty()) restore_params(net, best_weights);
    }
};

} // namespace

History train_binary_head(ComponentHead& model, const std::vector<LabeledItem>& train_items,
                          const std::vector<LabeledItem>& val_items,
                          const SampleLoader& train_loader, const SampleLoader& val_loader,
                          const TrainConfig& cfg) {
    if (cfg.epochs == 0) return {};
    if (cfg.optimizer_name != "adam") fail_usage("unknown optimizer: " + cfg.optimizer_name);
    if (train_items.empty()) fail_data("train_binary_head: empty training set");

    Adam opt(cfg.learning_rate);
    Rng shuffle_rng(derive_seed(cfg.seed, "train_binary/shuffle"));
    Rng dropout_rng(derive_seed(cfg.seed, "train_binary/dropout"));

    const bool phased = model.pretrained && cfg.unfreeze_epoch > 0;
    if (phased) set_backbone_frozen(model, true);

    EpochDriver driver(cfg);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (phased && epoch == cfg.unfreeze_epoch) unfreeze_backbone_top(model);

        std::vector<LabeledItem> items = train_items;
        shuffle_rng.shuffle(items);

        double loss_sum = 0.0;
        for (size_t start = 0; start < items.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(items.size(), start + static_cast<size_t>(cfg.batch_size));
            const double bn = static_cast<double>(end - start);
            model.net.zero_grads();
            for (size_t i = start; i < end; ++i) {
                const Tensor x = train_loader(items[i].id, epoch);
                const Tensor zt = model.net.forward(x, true, &dropout_rng);
                const double z = zt.v.at(0);
                const double p = 1.0 / (1.0 + std::exp(-z));
                const double y = items[i].label;
                const double pc = clamp_prob(p);
                loss_sum += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
                Tensor gz(1, 1, 1);
                gz.v[0] = static_cast<float>((p - y) / bn);
                model.net.backward(gz);
            }
            opt.step(model.net);
        }
        const double train_loss = loss_sum / static_cast<double>(items.size());

        double val_loss = train_loss;
        if (!val_items.empty()) {
            double acc = 0.0;
            for (const auto& item : val_items) {
                const Tensor x = val_loader(item.id, -1);
                const double p = clamp_prob(model.predict_prob(x));
                acc += -(item.label * std::log(p) + (1.0 - item.label) * std::log(1.0 - p));
            }
            val_loss = acc / static_cast<double>(val_items.size());
        }

        if (!driver.record(model.net, epoch, train_loss, val_loss)) break;
    }
    driver.finish(model.net);
    return driver.history;
}

History train_siamese(SiameseModel& model, const std::vector<dataset::PairSample>& train_pairs,
                      const std::vector<dataset::PairSample>& val_pairs,
                      const SampleLoader& train_loader, const SampleLoader& val_loader,
                      const TrainConfig& cfg) {
    if (cfg.epochs == 0) return {};
    if (cfg.optimizer_name != "adam") fail_usage("unknown optimizer: " + cfg.optimizer_name);
    if (train_pairs.empty()) fail_data("train_siamese: empty pair set");

    Net& net = model.twin.net;
    Adam opt(cfg.learning_rate);
    Rng shuffle_rng(derive_seed(cfg.seed, "train_siamese/shuffle"));

    const bool phased = model.twin.pretrained && cfg.unfreeze_epoch > 0;
    if (phased) set_backbone_frozen(model.twin, true);

    auto pair_loss_and_grads = [&](const Tensor& xa, const Tensor& xb, bool same, double bn,
                                   bool update) {
        // forward b last so its caches are live for the first backward
        Tensor ea = net.forward(xa, update, nullptr);
        const Tensor eb = net.forward(xb, update, nullptr);
        double d2 = 0.0;
        for (size_t i = 0; i < ea.v.size(); ++i) {
            const double diff = static_cast<double>(ea.v[i]) - eb.v[i];
            d2 += diff * diff;
        }
        const double d = std::sqrt(d2);
        const double loss = contrastive_loss(d, same, model.margin);
        if (update) {
            const double gd = contrastive_grad_d(d, same, model.margin);
            if (d > 1e-12 && gd != 0.0) {
                Tensor ga(ea.c, ea.h, ea.w);
                Tensor gb(ea.c, ea.h, ea.w);
                for (size_t i = 0; i < ea.v.size(); ++i) {
                    const double dir = (static_cast<double>(ea.v[i]) - eb.v[i]) / d;
                    ga.v[i] = static_cast<float>(gd * dir / bn);
                    gb.v[i] = static_cast<float>(-gd * dir / bn);
                }
                net.backward(gb);          // consumes the b-branch caches
                net.forward(xa, true, nullptr); // re-prime caches for the a branch
                net.backward(ga);
            }
        }
        return loss;
    };

    EpochDriver driver(cfg);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (phased && epoch == cfg.unfreeze_epoch) unfreeze_backbone_top(model.twin);

        std::vector<dataset::PairSample> pairs = train_pairs;
        shuffle_rng.shuffle(pairs);

        double loss_sum = 0.0;
        for (size_t start = 0; start < pairs.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(pairs.size(), start + static_cast<size_t>(cfg.batch_size));
            const double bn = static_cast<double>(end - start);
            net.zero_grads();
            for (size_t i = start; i < end; ++i) {
                const Tensor xa = train_loader(pairs[i].id_a, epoch);
                const Tensor xb = train_loader(pairs[i].id_b, epoch);
                loss_sum += pair_loss_and_grads(xa, xb, pairs[i].same, bn, true);
            }
            opt.step(net);
        }
        const double train_loss = loss_sum / static_cast<double>(pairs.size());

        double val_loss = train_loss;
        if (!val_pairs.empty()) {
            double acc = 0.0;
            for (const auto& pr : val_pairs) {
                const Tensor xa = val_loader(pr.id_a, -1);
                const Tensor xb = val_loader(pr.id_b, -1);
                acc += pair_loss_and_grads(xa, xb, pr.same, 1.0, false);
            }
            val_loss = acc / static_cast<double>(val_pairs.size());
        }

        if (!driver.record(net, epoch, train_loss, val_loss)) break;
    }
    driver.finish(net);
    return driver.history;
}

void compute_prototypes(SiameseModel& model, const std::vector<Tensor>& positives,
                        const std::vector<Tensor>& negatives) {
    if (positives.empty() || negatives.empty()) {
        fail_data("compute_prototypes: both classes must be non-empty");
    }
    auto mean_embedding = [&](const std::vector<Tensor>& xs) {
        std::vector<double> acc;
        for (const auto& x : xs) {
            const auto e = model.embed(x);
            if (acc.empty()) acc.assign(e.size(), 0.0);
            for (size_t i = 0; i < e.size(); ++i) acc[i] += e[i];
        }
        std::vector<float> out(acc.size());
        for (size_t i = 0; i < acc.size(); ++i) {
            out[i] = static_cast<float>(acc[i] / static_cast<double>(xs.size()));
        }
        return out;
    };
    model.proto_pos = mean_embedding(positives);
    model.proto_neg = mean_embedding(negatives);
}

std::vector<float> extract_features(ComponentHead& model, const Tensor& x) {
    return model.features(x);
}

std::vector<float> extract_siamese_features(SiameseModel& model, const Tensor& x) {
    if (model.proto_pos.empty() || model.proto_neg.empty()) {
        fail_data("siamese prototypes not computed; train the component first");
    }
    std::vector<float> emb = model.embed(x);
    auto dist_to = [&emb](const std::vector<float>& proto) {
        double acc = 0.0;
        for (size_t i = 0; i < emb.size(); ++i) {
            const double diff = static_cast<double>(emb[i]) - proto[i];
            acc += diff * diff;
        }
        return static_cast<float>(std::sqrt(acc));
    };
    emb.push_back(dist_to(model.proto_pos));
    emb.push_back(dist_to(model.proto_neg));
    return emb;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

ordered_json arch_json(const ComponentHead& model) {
    ordered_json j;
    j["type"] = model.has_output_unit ? "binary_head" : "embedding";
    j["backbone"] = backbone_name(model.backbone);
    j["head_dims"] = {model.head_dims[0], model.head_dims[1]};
    j["input_size"] = model.input_size;
    j["in_channels"] = model.in_channels;
    j["feature_dim"] = model.feature_dim;
    j["dropout"] = model.dropout;
    j["seed"] = model.init_seed;
    j["pretrained"] = model.pretrained;
    return j;
}

void write_history(const std::filesystem::path& path, const History& history) {
    std::vector<std::vector<std::string>> rows;
    for (size_t e = 0; e < history.train_loss.size(); ++e) {
        rows.push_back({std::to_string(e), fmt_sig9(history.train_loss[e]),
                        fmt_sig9(history.val_loss[e])});
    }
    write_csv(path, {"epoch", "train_loss", "val_loss"}, rows);
}

ComponentHead component_from_arch(const ordered_json& j) {
    BuildConfig cfg;
    const auto backbone = backbone_from_name(j.at("backbone").get<std::string>());
    if (!backbone) fail_data("arch.json: unknown backbone");
    cfg.backbone = *backbone;
    cfg.head_dims = {j.at("head_dims")[0].get<int>(), j.at("head_dims")[1].get<int>()};
    cfg.input_size = j.at("input_size").get<int>();
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    const bool output_unit = j.at("type").get<std::string>() == "binary_head";
    ComponentHead model = assemble(cfg, output_unit, false);
    model.pretrained = j.value("pretrained", false);
    return model;
}

} // namespace

void save_component(const std::filesystem::path& dir, const ComponentHead& model,
                    const History* history) {
    std::filesystem::create_directories(dir);
    atomic_write_file(dir / "arch.json", arch_json(model).dump(2) + "\n");
    write_weights(dir / "weights.bin", const_cast<ComponentHead&>(model).net);
    if (history && !history->empty()) write_history(dir / "history.csv", *history);
}

ComponentHead load_component(const std::filesystem::path& dir) {
    const auto j = ordered_json::parse(read_file(dir / "arch.json"));
    ComponentHead model = component_from_arch(j);
    read_weights(dir / "weights.bin", model.net);
    return model;
}

void save_siamese(const std::filesystem::path& dir, const SiameseModel& model,
                  const History* history) {
    std::filesystem::create_directories(dir);
    ordered_json j = arch_json(model.twin);
    j["margin"] = model.margin;
    j["proto_pos"] = model.proto_pos;
    j["proto_neg"] = model.proto_neg;
    atomic_write_file(dir / "arch.json", j.dump(2) + "\n");
    write_weights(dir / "weights.bin", const_cast<SiameseModel&>(model).twin.net);
    if (history && !history->empty()) write_history(dir / "history.csv", *history);
}

SiameseModel load_siamese(const std::filesystem::path& dir) {
    const auto j = ordered_json::parse(read_file(dir / "arch.json"));
    SiameseModel model;
    model.twin = component_from_arch(j);
    read_weights(dir / "weights.bin", model.twin.net);
    model.margin = j.at("margin").get<double>();
    model.proto_pos = j.at("proto_pos").get<std::vector<float>>();
    model.proto_neg = j.at("proto_neg").get<std::vector<float>>();
    return model;
}

} // namespace trio::nets
