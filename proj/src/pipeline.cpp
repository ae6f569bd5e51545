#include "trio/pipeline.hpp"

#include "trio/csv.hpp"
#include "trio/error.hpp"
#include "trio/fusion.hpp"
#include "trio/imgproc.hpp"
#include "trio/nets.hpp"
#include "trio/rng.hpp"
#include "trio/synth.hpp"
#include "trio/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace trio::cli {

using dataset::Disease;
using dataset::ImageRecord;
using dataset::Split;
using nets::Tensor;
using nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

fs::path data_root(const Config& cfg) { return cfg.get_str("data_root"); }
fs::path cache_dir(const Config& cfg) { return cfg.get_str("cache_dir"); }
fs::path bundles_dir(const Config& cfg) { return cfg.get_str("bundles_dir"); }
fs::path reports_dir(const Config& cfg) { return cfg.get_str("reports_dir"); }

std::vector<Disease> configured_diseases(const Config& cfg) {
    std::vector<Disease> out;
    for (const auto& name : cfg.get_list("diseases")) {
        const auto d = dataset::disease_from_name(name);
        if (!d) fail_usage("unknown disease in config 'diseases': " + name);
        out.push_back(*d);
    }
    if (out.empty()) fail_usage("config 'diseases' is empty");
    return out;
}

std::vector<Disease> parse_disease_arg(const Config& cfg, const std::string& arg) {
    if (arg == "all") return configured_diseases(cfg);
    const auto d = dataset::disease_from_name(arg);
    if (!d) {
        std::string codes;
        for (const char* n : dataset::kDiseaseNames) codes += std::string(n) + " ";
        fail_usage("unknown disease '" + arg + "'; valid codes: " + codes);
    }
    return {*d};
}

int component_input_size(const Config& cfg, const std::string& prefix) {
    const int configured = static_cast<int>(cfg.get_int(prefix + ".input_size"));
    if (configured > 0) return configured;
    const auto backbone = nets::backbone_from_name(cfg.get_str(prefix + ".backbone"));
    if (!backbone) fail_usage(prefix + ".backbone is not one of tiny/small/large");
    return nets::backbone_default_input(*backbone);
}

nets::BuildConfig build_config(const Config& cfg, const std::string& prefix, int in_channels,
                               uint64_t seed) {
    nets::BuildConfig bc;
    const auto backbone = nets::backbone_from_name(cfg.get_str(prefix + ".backbone"));
    if (!backbone) fail_usage(prefix + ".backbone is not one of tiny/small/large");
    bc.backbone = *backbone;
    const auto dims = cfg.get_int_list(prefix + ".head_dims");
    if (dims.size() != 2 || dims[0] <= 0 || dims[1] <= 0) {
        fail_usage(prefix + ".head_dims must be two positive integers");
    }
    bc.head_dims = {dims[0], dims[1]};
    bc.input_size = component_input_size(cfg, prefix);
    bc.in_channels = in_channels;
    if (cfg.has(prefix + ".dropout")) bc.dropout = cfg.get_double(prefix + ".dropout");
    bc.seed = seed;
    bc.pretrained_dir = cfg.get_str("nets.pretrained_dir");
    return bc;
}

nets::TrainConfig train_config(const Config& cfg, const std::string& prefix, uint64_t seed) {
    nets::TrainConfig tc;
    tc.epochs = static_cast<int>(cfg.get_int(prefix + ".epochs"));
    tc.batch_size = static_cast<int>(cfg.get_int(prefix + ".batch_size"));
    tc.learning_rate = cfg.get_double(prefix + ".lr");
    tc.early_stop_patience = static_cast<int>(cfg.get_int(prefix + ".patience"));
    tc.unfreeze_epoch = static_cast<int>(cfg.get_int(prefix + ".unfreeze_epoch"));
    tc.seed = seed;
    if (tc.epochs < 0 || tc.batch_size <= 0 || tc.learning_rate <= 0.0 ||
        tc.early_stop_patience <= 0) {
        fail_usage(prefix + ": epochs/batch_size/lr/patience must be positive");
    }
    return tc;
}

std::string hex64(uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// hash of every config value the preprocessed outputs depend on
std::string prepare_params_hash(const Config& cfg) {
    std::string s;
    for (const char* key :
         {"imgproc.crop_threshold", "imgproc.clahe_tiles", "imgproc.clahe_clip",
          "imgproc.posterize_bits", "imgproc.posterize_mode", "nets.component2.backbone",
          "nets.component2.input_size"}) {
        s += cfg.get_str(key) + ";";
    }
    s += std::to_string(component_input_size(cfg, "nets.component2"));
    return hex64(fnv1a64(s));
}

// ---------------------------------------------------------------------------
// Cached-image access shared by training, evaluation and feature extraction
// ---------------------------------------------------------------------------

struct CacheFeeder {
    fs::path cache;
    std::map<std::string, Split> split_of;
    imgproc::FilterSpec filters;

    fs::path png_path(const std::string& id) const {
        auto it = split_of.find(id);
        if (it == split_of.end()) fail_data("record not in split manifest: " + id);
        return cache / dataset::split_name(it->second) / (id + ".png");
    }

    Image image(const std::string& id) const { return load_image(png_path(id)); }

    Tensor rgb(const std::string& id, int input) const {
        return nets::tensor_from_image(imgproc::resize_bilinear(image(id), input, input));
    }

    Tensor stack(const std::string& id, int input) const {
        const fs::path sp = cache / dataset::split_name(split_of.at(id)) / (id + ".stack");
        if (fs::exists(sp)) {
            const auto st = imgproc::read_stack(sp);
            if (st.original.h == input && st.original.w == input) {
                return nets::tensor_from_stack(st);
            }
        }
        const Image img = imgproc::resize_bilinear(image(id), input, input);
        return nets::tensor_from_stack(imgproc::make_stack(img, filters));
    }
};

CacheFeeder make_feeder(const Config& cfg, const std::vector<ImageRecord>& records) {
    CacheFeeder feeder;
    feeder.cache = cache_dir(cfg);
    feeder.filters = cfg.filter_spec();
    for (const auto& rec : records) {
        if (!rec.split) fail_data("record without split: " + rec.id);
        feeder.split_of[rec.id] = *rec.split;
    }
    return feeder;
}

std::map<std::string, Split> read_split_manifest(const fs::path& path) {
    const CsvTable table = read_csv(path);
    const int idc = table.col("ID");
    const int spc = table.col("split");
    if (idc < 0 || spc < 0) fail_data("split manifest needs ID,split columns: " + path.string());
    std::map<std::string, Split> out;
    for (const auto& row : table.rows) {
        const auto s = dataset::split_from_name(row.at(static_cast<size_t>(spc)));
        if (!s) fail_data("split manifest has unknown split: " + row.at(static_cast<size_t>(spc)));
        out[row.at(static_cast<size_t>(idc))] = *s;
    }
    return out;
}

} // namespace

std::vector<ImageRecord> load_prepared_records(const Config& cfg) {
    const fs::path labels = data_root(cfg) / "labels.csv";
    if (!fs::exists(labels)) fail_data("labels CSV not found: " + labels.string() +
                                       " (run `synth` or point data_root at a dataset)");
    auto records = dataset::load_labels(labels, data_root(cfg) / "images");
    const fs::path manifest = cache_dir(cfg) / "split_manifest.csv";
    if (!fs::exists(manifest)) {
        fail_data("split manifest not found: " + manifest.string() + " (run `prepare` first)");
    }
    dataset::accept_given_split(records, read_split_manifest(manifest));
    return records;
}

// ---------------------------------------------------------------------------
// synth / prepare
// ---------------------------------------------------------------------------

void cmd_synth(const Config& cfg) {
    SynthParams params;
    params.n = static_cast<int>(cfg.get_int("synth.n"));
    params.diseases = static_cast<int>(cfg.get_int("synth.diseases"));
    params.co_occurrence = cfg.get_double("synth.co_occurrence");
    params.normal_frac = cfg.get_double("synth.normal_frac");
    params.size = static_cast<int>(cfg.get_int("synth.size"));
    params.seed = derive_seed(cfg.seed(), "synth");
    generate_synthetic(data_root(cfg), params);
    cfg.write_run_json(data_root(cfg), "synth");
    std::cout << "synth: wrote " << params.n << " images under " << data_root(cfg).string()
              << "\n";
}

void cmd_prepare(const Config& cfg, bool synthetic) {
    if (synthetic) cmd_synth(cfg);

    const fs::path labels_csv = data_root(cfg) / "labels.csv";
    if (!fs::exists(labels_csv)) {
        fail_data("labels CSV not found: " + labels_csv.string() +
                  " (use --synthetic or point data_root at a dataset)");
    }
    std::vector<std::string> warnings;
    auto records = dataset::load_labels(labels_csv, data_root(cfg) / "images", &warnings);
    for (const auto& w : warnings) std::cerr << "prepare: " << w << "\n";

    const fs::path given_split = data_root(cfg) / "split.csv";
    if (fs::exists(given_split)) {
        dataset::accept_given_split(records, read_split_manifest(given_split));
    } else {
        dataset::SplitRatios ratios{cfg.get_double("dataset.ratio_train"),
                                    cfg.get_double("dataset.ratio_validation"),
                                    cfg.get_double("dataset.ratio_test")};
        dataset::stratified_split(records, ratios, derive_seed(cfg.seed(), "split"));
    }

    const fs::path cache = cache_dir(cfg);
    fs::create_directories(cache);
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& rec : records) {
            rows.push_back({rec.id, dataset::split_name(*rec.split)});
        }
        write_csv(cache / "split_manifest.csv", {"ID", "split"}, rows);
    }

    // previous manifest for idempotent re-runs
    std::map<std::string, std::string> old_entries;
    const fs::path manifest_path = cache / "manifest.json";
    if (fs::exists(manifest_path)) {
        const auto j = ordered_json::parse(read_file(manifest_path));
        for (const auto& [id, entry] : j.items()) old_entries[id] = entry.get<std::string>();
    }

    const std::string params_hash = prepare_params_hash(cfg);
    const auto clahe = cfg.clahe_params();
    const auto filters = cfg.filter_spec();
    const uint8_t crop_thr = static_cast<uint8_t>(cfg.get_int("imgproc.crop_threshold"));
    const int stack_size = component_input_size(cfg, "nets.component2");

    std::vector<std::pair<std::string, std::string>> errors;
    std::map<std::string, std::string> new_entries;
    int processed = 0, skipped = 0;

    const int n = static_cast<int>(records.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        const auto& rec = records[static_cast<size_t>(i)];
        const fs::path out_png = cache / dataset::split_name(*rec.split) / (rec.id + ".png");
        const fs::path out_stack = cache / dataset::split_name(*rec.split) / (rec.id + ".stack");
        try {
            const std::string src_hash = hex64(fnv1a64_file(rec.image_path));
            const std::string entry = src_hash + ":" + params_hash + ":" +
                                      dataset::split_name(*rec.split);
            auto it = old_entries.find(rec.id);
            const bool unchanged = it != old_entries.end() && it->second == entry &&
                                   fs::exists(out_png) && fs::exists(out_stack);
            if (unchanged) {
#pragma omp critical(prepare_bookkeeping)
                {
                    ++skipped;
                    new_entries[rec.id] = entry;
                }
                continue;
            }
            const Image img = load_image(rec.image_path);
            const Image cropped = imgproc::crop_fundus(img, crop_thr);
            const Image balanced = imgproc::balance_histogram(cropped, clahe);
            save_png(out_png, balanced);
            const Image resized = imgproc::resize_bilinear(balanced, stack_size, stack_size);
            imgproc::write_stack(out_stack, imgproc::make_stack(resized, filters));
#pragma omp critical(prepare_bookkeeping)
            {
                ++processed;
                new_entries[rec.id] = entry;
            }
        } catch (const std::exception& e) {
#pragma omp critical(prepare_bookkeeping)
            errors.emplace_back(rec.id, e.what());
        }
    }

    {
        ordered_json j = ordered_json::object();
        for (const auto& [id, entry] : new_entries) j[id] = entry; // std::map: sorted
        atomic_write_file(manifest_path, j.dump(2) + "\n");
    }
    {
        std::sort(errors.begin(), errors.end());
        std::vector<std::vector<std::string>> rows;
        for (const auto& [id, what] : errors) {
            std::string msg = what;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            rows.push_back({id, msg});
        }
        write_csv(cache / "prepare_errors.csv", {"ID", "error"}, rows);
    }
    cfg.write_run_json(cache, "prepare",
                       {{"synthetic", synthetic ? "true" : "false"}});
    std::cout << "prepare: " << processed << " processed, " << skipped << " skipped, "
              << errors.size() << " errors\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

struct TrainedComponents {
    nets::ComponentHead c1;
    nets::ComponentHead c2;
    nets::SiameseModel c3;
};

std::vector<nets::LabeledItem> task_items(const dataset::BinaryTask& task) {
    std::vector<nets::LabeledItem> items;
    for (const auto& id : task.positives) items.push_back({id, 1});
    for (const auto& id : task.negatives) items.push_back({id, 0});
    return items;
}

// In-memory image cache: training touches each cached PNG hundreds of times.
struct ImagePool {
    std::map<std::string, Image> images;

    const Image& get(const CacheFeeder& feeder, const std::string& id) {
        auto it = images.find(id);
        if (it == images.end()) it = images.emplace(id, feeder.image(id)).first;
        return it->second;
    }
};

nets::SampleLoader make_loader(const Config& cfg, const CacheFeeder& feeder,
                               std::shared_ptr<ImagePool> pool, const std::string& stage_tag,
                               int input, bool as_stack, uint64_t root_seed) {
    const auto aug = cfg.augment_spec();
    const auto filters = cfg.filter_spec();
    return [=, &feeder](const std::string& id, int epoch) -> Tensor {
        const Image& base = pool->get(feeder, id);
        Image img;
        if (epoch >= 0) {
            const uint64_t seed = derive_seed(
                root_seed, "aug/" + stage_tag + "/" + std::to_string(epoch) + "/" + id);
            img = imgproc::augment(base, aug, seed, input);
        } else {
            img = imgproc::resize_bilinear(base, input, input);
        }
        if (as_stack) return nets::tensor_from_stack(imgproc::make_stack(img, filters));
        return nets::tensor_from_image(img);
    };
}

void train_component12(const Config& cfg, const CacheFeeder& feeder,
                       std::shared_ptr<ImagePool> pool, const dataset::BinaryTask& train_task,
                       const dataset::BinaryTask& val_task, const std::string& scope,
                       int which, const fs::path& out_dir, nets::ComponentHead& out_model) {
    const std::string prefix = "nets.component" + std::to_string(which);
    const uint64_t seed = derive_seed(cfg.seed(), scope + "/component" + std::to_string(which));
    const int in_channels = which == 2 ? 10 : 3;
    auto bc = build_config(cfg, prefix, in_channels, seed);
    out_model = which == 2 ? nets::build_component2(bc) : nets::build_component1(bc);

    const auto balanced = dataset::oversample(train_task, seed);
    const auto loader = make_loader(cfg, feeder, pool, scope + "/c" + std::to_string(which),
                                    out_model.input_size, which == 2, seed);
    const auto history =
        nets::train_binary_head(out_model, task_items(balanced), task_items(val_task), loader,
                                loader, train_config(cfg, prefix, seed));
    nets::save_component(out_dir, out_model, &history);
}

void train_component3(const Config& cfg, const CacheFeeder& feeder,
                      std::shared_ptr<ImagePool> pool, const dataset::BinaryTask& train_task,
                      const dataset::BinaryTask& val_task, const std::string& scope,
                      const fs::path& out_dir, nets::SiameseModel& out_model) {
    const std::string prefix = "nets.component3";
    const uint64_t seed = derive_seed(cfg.seed(), scope + "/component3");
    auto bc = build_config(cfg, prefix, 3, seed);
    out_model = nets::build_siamese(bc, cfg.get_double(prefix + ".margin"));

    const int n_pairs = static_cast<int>(cfg.get_int(prefix + ".pairs"));
    const int n_val_pairs = static_cast<int>(cfg.get_int(prefix + ".val_pairs"));
    const double same_ratio = cfg.get_double(prefix + ".same_ratio");

    const auto pairs = dataset::sample_pairs(train_task, n_pairs, same_ratio, seed);
    std::vector<dataset::PairSample> val_pairs;
    if (val_task.positives.size() >= 2 && val_task.negatives.size() >= 2 && n_val_pairs > 0) {
        val_pairs = dataset::sample_pairs(val_task, n_val_pairs, same_ratio,
                                          derive_seed(seed, "val_pairs"));
    }

    const auto loader = make_loader(cfg, feeder, pool, scope + "/c3",
                                    out_model.twin.input_size, false, seed);
    const auto history = nets::train_siamese(out_model, pairs, val_pairs, loader, loader,
                                             train_config(cfg, prefix, seed));

    // prototypes from the (non-oversampled) train task, inference transforms
    std::vector<Tensor> pos, neg;
    for (const auto& id : train_task.positives) pos.push_back(loader(id, -1));
    for (const auto& id : train_task.negatives) neg.push_back(loader(id, -1));
    nets::compute_prototypes(out_model, pos, neg);
    nets::save_siamese(out_dir, out_model, &history);
}

fusion::FeatureMatrix extract_split_features(const CacheFeeder& feeder,
                                             const std::vector<ImageRecord>& records,
                                             Split split, TrainedComponents& comps) {
    fusion::FeatureMatrix m;
    const int d1 = comps.c1.feature_dim;
    const int d2 = comps.c2.feature_dim;
    const int d3 = comps.c3.twin.feature_dim + 2;
    m.column_spec = {{"c1", d1}, {"c2", d2}, {"siamese", d3}};
    m.cols = d1 + d2 + d3;
    for (const auto& rec : records) {
        if (*rec.split != split) continue;
        m.ids.push_back(rec.id);
        const auto f1 = nets::extract_features(comps.c1, feeder.rgb(rec.id, comps.c1.input_size));
        const auto f2 =
            nets::extract_features(comps.c2, feeder.stack(rec.id, comps.c2.input_size));
        const auto f3 = nets::extract_siamese_features(
            comps.c3, feeder.rgb(rec.id, comps.c3.twin.input_size));
        for (float v : f1) m.x.push_back(v);
        for (float v : f2) m.x.push_back(v);
        for (float v : f3) m.x.push_back(v);
    }
    fusion::validate_feature_matrix(m);
    return m;
}

double tune_threshold_f1(const std::vector<double>& probs, const std::vector<int>& labels) {
    std::vector<double> cands(probs.begin(), probs.end());
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    double best_f1 = -1.0, best_thr = 0.5;
    for (double t : cands) {
        if (!(t > 0.0 && t < 1.0)) continue;
        eval::Confusion c;
        for (size_t i = 0; i < probs.size(); ++i) {
            const int pred = probs[i] >= t ? 1 : 0;
            if (pred && labels[i]) ++c.tp;
            else if (pred && !labels[i]) ++c.fp;
            else if (!pred && labels[i]) ++c.fn;
            else ++c.tn;
        }
        const double f1 = eval::compute_metrics(c).f1;
        if (f1 > best_f1 + 1e-12) {
            best_f1 = f1;
            best_thr = t;
        }
    }
    return best_thr;
}

void fit_fusion(const Config& cfg, const CacheFeeder& feeder,
                const std::vector<ImageRecord>& records, Disease disease,
                TrainedComponents& comps, const fs::path& bundle_dir) {
    const uint64_t seed = derive_seed(cfg.seed(),
                                      std::string(dataset::disease_name(disease)) + "/fusion");

    fusion::FeatureMatrix train_m = extract_split_features(feeder, records, Split::train, comps);
    fusion::FeatureMatrix val_m =
        extract_split_features(feeder, records, Split::validation, comps);
    fusion::FeatureMatrix test_m = extract_split_features(feeder, records, Split::test, comps);

    const fs::path feat_dir = bundle_dir / "features";
    fusion::write_feature_csv(feat_dir / "features_train.csv", train_m);
    fusion::write_feature_csv(feat_dir / "features_validation.csv", val_m);
    fusion::write_feature_csv(feat_dir / "features_test.csv", test_m);
    fusion::write_column_spec(feat_dir / "column_spec.json", train_m);

    const auto pca = fusion::fit_pca(train_m, cfg.get_double("fusion.variance_target"));
    const auto Ztrain = fusion::project(pca, train_m);

    std::map<std::string, int> label_of;
    for (const auto& rec : records) label_of[rec.id] = rec.positive_for(disease) ? 1 : 0;

    std::vector<std::vector<double>> Z;
    std::vector<int> y;
    for (int r = 0; r < Ztrain.rows(); ++r) {
        Z.push_back(Ztrain.row(r));
        y.push_back(label_of.at(Ztrain.ids[static_cast<size_t>(r)]));
    }

    fusion::EnsembleConfig ec;
    ec.tree_max_depth = static_cast<int>(cfg.get_int("fusion.tree_depth"));
    ec.forest_trees = static_cast<int>(cfg.get_int("fusion.forest_trees"));
    ec.logistic_c = cfg.get_double("fusion.logistic_c");
    ec.svm_c = cfg.get_double("fusion.svm_c");
    ec.knn_k = static_cast<int>(cfg.get_int("fusion.knn_k"));
    ec.seed = seed;

    const auto voting = fusion::voting_from_name(cfg.get_str("fusion.voting"));
    double threshold = cfg.get_double("fusion.threshold");
    auto ensemble = fusion::train_ensemble(Z, y, ec, voting, threshold);

    const std::string policy = cfg.get_str("fusion.threshold_policy");
    if (policy == "tune_f1") {
        if (voting == fusion::VotingMode::soft && val_m.rows() > 0) {
            const auto Zval = fusion::project(pca, val_m);
            std::vector<double> probs;
            std::vector<int> yval;
            bool both = false, seen_pos = false, seen_neg = false;
            for (int r = 0; r < Zval.rows(); ++r) {
                probs.push_back(fusion::vote(ensemble, Zval.row(r)).probability);
                const int label = label_of.at(Zval.ids[static_cast<size_t>(r)]);
                yval.push_back(label);
                (label ? seen_pos : seen_neg) = true;
            }
            both = seen_pos && seen_neg;
            if (both) ensemble.threshold = tune_threshold_f1(probs, yval);
        } else if (voting == fusion::VotingMode::hard) {
            std::cerr << "train: threshold_policy=tune_f1 has no effect with hard voting\n";
        }
    } else if (policy != "fixed") {
        fail_usage("fusion.threshold_policy must be fixed or tune_f1");
    }

    fusion::DetectorBundle bundle;
    bundle.disease = disease;
    bundle.component1 = std::move(comps.c1);
    bundle.component2 = std::move(comps.c2);
    bundle.component3 = std::move(comps.c3);
    bundle.pca = pca;
    bundle.ensemble = std::move(ensemble);
    bundle.column_spec = train_m.column_spec;
    bundle.prep.crop_threshold = static_cast<uint8_t>(cfg.get_int("imgproc.crop_threshold"));
    bundle.prep.clahe = cfg.clahe_params();
    bundle.prep.filters = cfg.filter_spec();
    fusion::save_bundle(bundle_dir, bundle);
}

void copy_dir_replace(const fs::path& from, const fs::path& to) {
    fs::remove_all(to);
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive);
}

// Any-disease task used when components 1-2 are shared across detectors.
dataset::BinaryTask any_disease_task(const std::vector<ImageRecord>& records, Split split) {
    dataset::BinaryTask task;
    task.disease = Disease::DN; // tag only; membership is any-label
    task.split = split;
    for (const auto& rec : records) {
        if (*rec.split != split) continue;
        (rec.is_normal() ? task.negatives : task.positives).push_back(rec.id);
    }
    return task;
}

void train_one_disease(const Config& cfg, const std::vector<ImageRecord>& records,
                       const CacheFeeder& feeder, Disease disease,
                       const std::string& component_arg) {
    const std::string name = dataset::disease_name(disease);
    const fs::path bundle_dir = bundles_dir(cfg) / name;
    auto pool = std::make_shared<ImagePool>();

    const auto train_task = dataset::make_binary_task(records, disease, Split::train);
    const auto val_task = dataset::make_binary_task(records, disease, Split::validation);
    if (train_task.positives.empty() || train_task.negatives.empty()) {
        fail_data(std::string("cannot train ") + name + ": train split lacks a class");
    }

    const bool share12 = cfg.get_bool("nets.share_components12");
    const bool want_all = component_arg == "all";
    TrainedComponents comps;

    auto train12 = [&](int which, const fs::path& dir, nets::ComponentHead& out) {
        if (share12) {
            const fs::path shared = bundles_dir(cfg) / "_shared" /
                                    ("component" + std::to_string(which));
            if (!fs::exists(shared / "arch.json")) {
                const auto shared_train = any_disease_task(records, Split::train);
                const auto shared_val = any_disease_task(records, Split::validation);
                nets::ComponentHead model;
                train_component12(cfg, feeder, pool, shared_train, shared_val, "_shared",
                                  which, shared, model);
            }
            copy_dir_replace(shared, dir);
            out = nets::load_component(dir);
        } else {
            train_component12(cfg, feeder, pool, train_task, val_task, name, which, dir, out);
        }
    };

    if (want_all || component_arg == "1") train12(1, bundle_dir / "component1", comps.c1);
    if (want_all || component_arg == "2") train12(2, bundle_dir / "component2", comps.c2);
    if (want_all || component_arg == "3") {
        train_component3(cfg, feeder, pool, train_task, val_task, name,
                         bundle_dir / "component3", comps.c3);
    }
    if (want_all) fit_fusion(cfg, feeder, records, disease, comps, bundle_dir);
}

} // namespace

void cmd_train(const Config& cfg, const std::string& disease_arg,
               const std::string& component_arg) {
    if (component_arg != "1" && component_arg != "2" && component_arg != "3" &&
        component_arg != "all") {
        fail_usage("--component must be 1, 2, 3 or all");
    }
    const auto records = load_prepared_records(cfg);
    const auto feeder = make_feeder(cfg, records);
    for (Disease d : parse_disease_arg(cfg, disease_arg)) {
        std::cout << "train: " << dataset::disease_name(d) << " component " << component_arg
                  << "\n";
        train_one_disease(cfg, records, feeder, d, component_arg);
    }
    cfg.write_run_json(bundles_dir(cfg), "train",
                       {{"disease", disease_arg}, {"component", component_arg}});
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

DiseaseEvalResult evaluate_one(const Config& cfg, const std::vector<ImageRecord>& records,
                               Split split, const fs::path& bundle_dir) {
    auto bundle = fusion::load_bundle(bundle_dir);
    const auto feeder = make_feeder(cfg, records);

    std::vector<double> scores;
    std::vector<int> labels;
    eval::Confusion confusion;
    for (const auto& rec : records) {
        if (*rec.split != split) continue;
        const auto f1 = nets::extract_features(bundle.component1,
                                               feeder.rgb(rec.id, bundle.component1.input_size));
        const auto f2 = nets::extract_features(bundle.component2,
                                               feeder.stack(rec.id, bundle.component2.input_size));
        const auto f3 = nets::extract_siamese_features(
            bundle.component3, feeder.rgb(rec.id, bundle.component3.twin.input_size));
        std::vector<double> row;
        for (float v : f1) row.push_back(v);
        for (float v : f2) row.push_back(v);
        for (float v : f3) row.push_back(v);
        const auto z = fusion::project_row(bundle.pca, row);
        const auto v = fusion::vote(bundle.ensemble, z);

        const int truth = rec.positive_for(bundle.disease) ? 1 : 0;
        scores.push_back(v.probability);
        labels.push_back(truth);
        if (v.label && truth) ++confusion.tp;
        else if (v.label && !truth) ++confusion.fp;
        else if (!v.label && truth) ++confusion.fn;
        else ++confusion.tn;
    }
    if (scores.empty()) fail_data("evaluate: split is empty");

    DiseaseEvalResult result;
    result.n_eval = static_cast<long long>(scores.size());
    result.curve = eval::roc_auc(scores, labels); // throws on single-class labels
    result.row = eval::compute_metrics(confusion);
    result.row.name = dataset::disease_name(bundle.disease);
    result.row.auc = result.curve.auc;
    return result;
}

EvalOutcome cmd_eval(const Config& cfg, const std::string& split_arg,
                     const fs::path& benchmark_csv, bool plots) {
    const auto split = dataset::split_from_name(split_arg);
    if (!split) fail_usage("--split must be train, validation or test");
    const auto records = load_prepared_records(cfg);

    EvalOutcome outcome;
    std::vector<eval::MetricsRow> rows;
    long long n_eval = 0;
    const fs::path reports = reports_dir(cfg);
    fs::create_directories(reports);

    for (Disease d : configured_diseases(cfg)) {
        const std::string name = dataset::disease_name(d);
        const fs::path bundle_dir = bundles_dir(cfg) / name;
        try {
            if (!fs::exists(bundle_dir / "manifest.json")) {
                fail_data("bundle not found: " + bundle_dir.string());
            }
            auto result = evaluate_one(cfg, records, *split, bundle_dir);
            n_eval = result.n_eval;
            eval::write_roc_csv(reports / ("roc_" + name + ".csv"), result.curve);
            if (plots) {
                eval::write_roc_svg(reports / ("roc_" + name + ".svg"), result.curve, name);
            }
            rows.push_back(result.row);
            ++outcome.evaluated;
        } catch (const std::exception& e) {
            outcome.errors.push_back(name + ": " + e.what());
        }
    }

    if (!rows.empty()) {
        auto all_rows = rows;
        all_rows.push_back(eval::average_row(rows));
        eval::write_report(reports / "report.csv", all_rows, n_eval);
    }
    if (!benchmark_csv.empty()) {
        const auto benchmarks = eval::load_benchmark_csv(benchmark_csv);
        eval::write_benchmark_csv(reports / "benchmark_delta.csv",
                                  eval::benchmark_compare(rows, benchmarks));
    }
    if (!outcome.errors.empty()) {
        std::vector<std::vector<std::string>> err_rows;
        for (const auto& e : outcome.errors) {
            const auto colon = e.find(':');
            std::string msg = e.substr(colon + 1);
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            err_rows.push_back({e.substr(0, colon), msg});
        }
        write_csv(reports / "eval_errors.csv", {"disease", "error"}, err_rows);
        for (const auto& e : outcome.errors) std::cerr << "eval: " << e << "\n";
    }
    cfg.write_run_json(reports, "eval",
                       {{"split", split_arg},
                        {"benchmark", benchmark_csv.string()},
                        {"plots", plots ? "true" : "false"}});
    return outcome;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

void cmd_predict(const Config& cfg, const fs::path& image_path, const std::string& disease_arg,
                 const fs::path& jsonl_out, std::ostream& out) {
    const Image img = load_image(image_path); // data error on unreadable input

    double p_norm = 1.0;
    bool all_negative = true;
    std::ostringstream jsonl;
    for (Disease d : parse_disease_arg(cfg, disease_arg)) {
        const std::string name = dataset::disease_name(d);
        const fs::path bundle_dir = bundles_dir(cfg) / name;
        if (!fs::exists(bundle_dir / "manifest.json")) {
            fail_data("bundle not found: " + bundle_dir.string() + " (train it first)");
        }
        auto bundle = fusion::load_bundle(bundle_dir);
        const auto v = fusion::predict_disease(bundle, img);
        out << name << "," << fmt_sig9(v.probability) << "," << v.label << "\n";
        ordered_json j = {{"disease", name}, {"probability", v.probability}, {"label", v.label}};
        jsonl << j.dump() << "\n";
        p_norm *= 1.0 - v.probability;
        if (v.label) all_negative = false;
    }
    out << "NORMAL," << fmt_sig9(p_norm) << "," << (all_negative ? 1 : 0) << "\n";
    ordered_json j = {{"disease", "NORMAL"}, {"probability", p_norm},
                      {"label", all_negative ? 1 : 0}};
    jsonl << j.dump() << "\n";

    if (!jsonl_out.empty()) atomic_write_file(jsonl_out, jsonl.str());
    cfg.write_run_json(reports_dir(cfg) / "predict", "predict",
                       {{"image", image_path.string()},
                        {"disease", disease_arg},
                        {"jsonl", jsonl_out.string()}});
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

namespace {

std::vector<std::array<int, 2>> parse_head_dim_choices(const std::string& raw) {
    std::vector<std::array<int, 2>> out;
    for (const auto& group : split(raw, ';')) {
        const auto parts = split(group, ',');
        if (parts.size() != 2) fail_usage("search.head_dims entries must be 'a,b;c,d;...'");
        long long a = 0, b = 0;
        if (!parse_int(trim(parts[0]), a) || !parse_int(trim(parts[1]), b)) {
            fail_usage("search.head_dims entries must be integer pairs");
        }
        out.push_back({static_cast<int>(a), static_cast<int>(b)});
    }
    return out;
}

} // namespace

void cmd_search(const Config& cfg, const std::string& disease_arg) {
    const auto diseases = parse_disease_arg(cfg, disease_arg);
    if (diseases.size() != 1) fail_usage("search runs one disease at a time");
    const std::string name = dataset::disease_name(diseases[0]);

    const auto head_choices = parse_head_dim_choices(cfg.get_str("search.head_dims"));
    const auto lr_choices = cfg.get_list("search.lr");
    const auto var_choices = cfg.get_list("search.variance_target");
    const auto vote_choices = cfg.get_list("search.voting");
    if (head_choices.empty() || lr_choices.empty() || var_choices.empty() ||
        vote_choices.empty()) {
        fail_usage("search space is empty");
    }

    const auto records = load_prepared_records(cfg);
    const fs::path search_dir = reports_dir(cfg) / "search";
    fs::create_directories(search_dir);

    struct Candidate {
        std::string head_dims, lr, variance, voting;
        double f1 = 0.0, auc = 0.0;

        std::string config_string() const {
            return "head_dims=" + head_dims + ";lr=" + lr + ";variance_target=" + variance +
                   ";voting=" + voting;
        }
    };

    std::vector<Candidate> leaderboard;
    int index = 0;
    for (const auto& hd : head_choices) {
        for (const auto& lr : lr_choices) {
            for (const auto& vt : var_choices) {
                for (const auto& vote_mode : vote_choices) {
                    Candidate cand;
                    cand.head_dims = std::to_string(hd[0]) + "," + std::to_string(hd[1]);
                    cand.lr = lr;
                    cand.variance = vt;
                    cand.voting = vote_mode;

                    Config cc = cfg;
                    cc.set("nets.component1.head_dims", cand.head_dims);
                    cc.set("nets.component1.lr", lr);
                    cc.set("nets.component2.lr", lr);
                    cc.set("nets.component3.lr", lr);
                    cc.set("fusion.variance_target", vt);
                    cc.set("fusion.voting", vote_mode);
                    const fs::path cand_bundles =
                        search_dir / ("cand_" + std::to_string(index)) / "bundles";
                    cc.set("bundles_dir", cand_bundles.string());

                    const auto feeder = make_feeder(cc, records);
                    train_one_disease(cc, records, feeder, diseases[0], "all");
                    const auto result =
                        evaluate_one(cc, records, Split::validation, cand_bundles / name);
                    cand.f1 = result.row.f1;
                    cand.auc = result.row.auc;
                    leaderboard.push_back(cand);
                    ++index;
                }
            }
        }
    }

    std::sort(leaderboard.begin(), leaderboard.end(), [](const Candidate& a, const Candidate& b) {
        if (a.f1 != b.f1) return a.f1 > b.f1;
        if (a.auc != b.auc) return a.auc > b.auc;
        return a.config_string() < b.config_string();
    });

    std::vector<std::vector<std::string>> rows;
    for (size_t i = 0; i < leaderboard.size(); ++i) {
        const auto& c = leaderboard[i];
        rows.push_back({std::to_string(i + 1), fmt_sig9(c.f1), fmt_sig9(c.auc), c.head_dims,
                        c.lr, c.variance, c.voting});
    }
    write_csv(search_dir / "leaderboard.csv",
              {"rank", "f1", "auc", "head_dims", "lr", "variance_target", "voting"}, rows);

    const auto& best = leaderboard.front();
    Config best_cfg = cfg;
    best_cfg.set("nets.component1.head_dims", best.head_dims);
    best_cfg.set("nets.component1.lr", best.lr);
    best_cfg.set("nets.component2.lr", best.lr);
    best_cfg.set("nets.component3.lr", best.lr);
    best_cfg.set("fusion.variance_target", best.variance);
    best_cfg.set("fusion.voting", best.voting);
    atomic_write_file(search_dir / "best_config.json", best_cfg.snapshot_json("train"));

    cfg.write_run_json(search_dir, "search", {{"disease", disease_arg}});
    std::cout << "search: best " << best.config_string() << " f1=" << fmt_sig9(best.f1)
              << " auc=" << fmt_sig9(best.auc) << "\n";
}

} // namespace trio::cli
