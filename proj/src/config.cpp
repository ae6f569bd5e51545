#include "trio/config.hpp"

#include "trio/error.hpp"
#include "trio/util.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace trio::cli {

using nlohmann::ordered_json;

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"data_root", "data"},
        {"cache_dir", "cache"},
        {"bundles_dir", "bundles"},
        {"reports_dir", "reports"},
        {"seed", "42"},
        {"diseases", "DN,ODC,TSLN,ARMD,RS,ODE,ODP,DR,MH,BRVO,MYA,CRVO"},

        {"dataset.ratio_train", "0.6"},
        {"dataset.ratio_validation", "0.2"},
        {"dataset.ratio_test", "0.2"},

        {"imgproc.crop_threshold", "10"},
        {"imgproc.clahe_tiles", "8"},
        {"imgproc.clahe_clip", "2.0"},
        {"imgproc.posterize_bits", "3"},
        {"imgproc.posterize_mode", "truncate"},
        {"imgproc.augment.rotation", "-20,20"},
        {"imgproc.augment.crop", "0.85,1.0"},
        {"imgproc.augment.shear", "-10,10"},
        {"imgproc.augment.gauss_sigma", "0,2.0"},
        {"imgproc.augment.pixel_noise", "0,0.01"},
        {"imgproc.augment.blur", "0,1.5"},
        {"imgproc.augment.zoom", "0.9,1.1"},
        {"imgproc.augment.flip_prob", "0.5"},
        {"imgproc.augment.brightness", "-0.15,0.15"},

        {"nets.pretrained_dir", ""},
        {"nets.share_components12", "false"},

        {"nets.component1.backbone", "tiny"},
        {"nets.component1.head_dims", "256,128"},
        {"nets.component1.input_size", "0"},
        {"nets.component1.dropout", "0.3"},
        {"nets.component1.epochs", "20"},
        {"nets.component1.batch_size", "16"},
        {"nets.component1.lr", "0.0001"},
        {"nets.component1.patience", "5"},
        {"nets.component1.unfreeze_epoch", "3"},

        {"nets.component2.backbone", "tiny"},
        {"nets.component2.head_dims", "128,64"},
        {"nets.component2.input_size", "0"},
        {"nets.component2.dropout", "0.3"},
        {"nets.component2.epochs", "20"},
        {"nets.component2.batch_size", "16"},
        {"nets.component2.lr", "0.0001"},
        {"nets.component2.patience", "5"},
        {"nets.component2.unfreeze_epoch", "3"},

        {"nets.component3.backbone", "tiny"},
        {"nets.component3.head_dims", "128,64"},
        {"nets.component3.input_size", "0"},
        {"nets.component3.margin", "1.0"},
        {"nets.component3.pairs", "400"},
        {"nets.component3.val_pairs", "120"},
        {"nets.component3.same_ratio", "0.5"},
        {"nets.component3.epochs", "20"},
        {"nets.component3.batch_size", "16"},
        {"nets.component3.lr", "0.0001"},
        {"nets.component3.patience", "5"},
        {"nets.component3.unfreeze_epoch", "3"},

        {"fusion.variance_target", "0.95"},
        {"fusion.voting", "soft"},
        {"fusion.threshold", "0.5"},
        {"fusion.threshold_policy", "fixed"},
        {"fusion.tree_depth", "8"},
        {"fusion.forest_trees", "100"},
        {"fusion.logistic_c", "1.0"},
        {"fusion.svm_c", "1.0"},
        {"fusion.knn_k", "5"},

        {"synth.n", "300"},
        {"synth.diseases", "2"},
        {"synth.co_occurrence", "0.1"},
        {"synth.normal_frac", "0.2"},
        {"synth.size", "64"},

        {"search.head_dims", "256,128;128,64"},
        {"search.lr", "0.0001"},
        {"search.variance_target", "0.95"},
        {"search.voting", "soft"},
    };
    return defaults;
}

} // namespace

Config Config::defaults() {
    Config cfg;
    cfg.values_ = default_values();
    return cfg;
}

void Config::require_known(const std::string& key) const {
    if (default_values().find(key) == default_values().end()) {
        fail_usage("unknown config key: " + key);
    }
}

Config Config::load(const std::filesystem::path& path) {
    Config cfg = defaults();
    const std::string text = read_file(path);

    // run.json snapshots start with '{'
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        const auto j = ordered_json::parse(text);
        for (const auto& [key, value] : j.at("config").items()) {
            cfg.require_known(key);
            cfg.values_[key] = value.get<std::string>();
        }
        return cfg;
    }

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            fail_usage("config line " + std::to_string(line_no) + " is not key=value: " + t);
        }
        const std::string key = trim(t.substr(0, eq));
        cfg.require_known(key);
        cfg.values_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
}

void Config::apply_set(const std::string& key_equals_value) {
    const auto eq = key_equals_value.find('=');
    if (eq == std::string::npos) fail_usage("--set expects key=value, got: " + key_equals_value);
    set(trim(key_equals_value.substr(0, eq)), trim(key_equals_value.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
    require_known(key);
    values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail_usage("unknown config key: " + key);
    return it->second;
}

long long Config::get_int(const std::string& key) const {
    long long v = 0;
    if (!parse_int(get_str(key), v)) fail_usage("config key " + key + " is not an integer");
    return v;
}

double Config::get_double(const std::string& key) const {
    double v = 0.0;
    if (!parse_double(get_str(key), v)) fail_usage("config key " + key + " is not a number");
    return v;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail_usage("config key " + key + " is not a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    std::vector<std::string> out;
    for (auto& part : split(get_str(key), ',')) {
        const std::string t = trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& part : get_list(key)) {
        long long v = 0;
        if (!parse_int(part, v)) fail_usage("config key " + key + " has a non-integer entry");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::pair<double, double> Config::get_range(const std::string& key) const {
    const auto parts = get_list(key);
    if (parts.size() != 2) fail_usage("config key " + key + " must be 'lo,hi'");
    double lo = 0.0, hi = 0.0;
    if (!parse_double(parts[0], lo) || !parse_double(parts[1], hi) || lo > hi) {
        fail_usage("config key " + key + " must be a numeric range lo<=hi");
    }
    return {lo, hi};
}

imgproc::AugmentSpec Config::augment_spec() const {
    imgproc::AugmentSpec spec;
    spec.rotation_deg = get_range("imgproc.augment.rotation");
    spec.crop_fraction = get_range("imgproc.augment.crop");
    spec.shear_deg = get_range("imgproc.augment.shear");
    spec.gauss_sigma = get_range("imgproc.augment.gauss_sigma");
    spec.pixel_noise_frac = get_range("imgproc.augment.pixel_noise");
    spec.blur_radius = get_range("imgproc.augment.blur");
    spec.zoom_factor = get_range("imgproc.augment.zoom");
    spec.flip_prob = get_double("imgproc.augment.flip_prob");
    spec.brightness_delta = get_range("imgproc.augment.brightness");
    return spec;
}

imgproc::ClaheParams Config::clahe_params() const {
    imgproc::ClaheParams p;
    p.tiles = static_cast<int>(get_int("imgproc.clahe_tiles"));
    p.clip = get_double("imgproc.clahe_clip");
    return p;
}

imgproc::FilterSpec Config::filter_spec() const {
    imgproc::FilterSpec spec;
    spec.posterize_bits = static_cast<int>(get_int("imgproc.posterize_bits"));
    const std::string mode = get_str("imgproc.posterize_mode");
    if (mode == "truncate") {
        spec.posterize_mode = imgproc::PosterizeMode::truncate;
    } else if (mode == "nearest") {
        spec.posterize_mode = imgproc::PosterizeMode::nearest;
    } else {
        fail_usage("imgproc.posterize_mode must be truncate or nearest");
    }
    return spec;
}

std::string Config::snapshot_json(const std::string& command,
                                  const std::map<std::string, std::string>& args) const {
    ordered_json j;
    j["command"] = command;
    ordered_json ja = ordered_json::object();
    for (const auto& [key, value] : args) ja[key] = value;
    j["args"] = ja;
    j["seed"] = get_int("seed");
    ordered_json cfg = ordered_json::object();
    for (const auto& [key, value] : values_) cfg[key] = value; // std::map: sorted keys
    j["config"] = cfg;
    return j.dump(2) + "\n";
}

void Config::write_run_json(const std::filesystem::path& dir, const std::string& command,
                            const std::map<std::string, std::string>& args) const {
    std::filesystem::create_directories(dir);
    atomic_write_file(dir / "run.json", snapshot_json(command, args));
}

} // namespace trio::cli
