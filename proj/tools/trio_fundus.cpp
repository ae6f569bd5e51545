// trio_fundus — multi-disease fundus detector pipeline CLI.
//
// Subcommands: synth, prepare, train, search, eval, predict.
// Exit codes: 0 success, 1 usage, 2 data error, 3 training/eval error.

#include "trio/config.hpp"
#include "trio/error.hpp"
#include "trio/pipeline.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <cstdlib>
#include <iostream>

using trio::cli::Config;

int main(int argc, char** argv) {
    CLI::App app{"Per-disease fundus detectors: trio feature extractors fused by PCA + voting"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    long long seed = -1;
    bool single_threaded = false;
    bool plots = false;
    app.add_option("--config", config_path, "Config file (flat key=value or a run.json snapshot)");
    app.add_option("--set", sets, "Override a config key, e.g. --set fusion.voting=hard")
        ->take_all();
    app.add_option("--seed", seed, "Root seed (overrides config)");
    app.add_flag("--single-threaded", single_threaded, "Force one worker thread");
    app.add_flag("--plots", plots, "Emit ROC SVG plots alongside CSVs");

    auto* synth = app.add_subcommand("synth", "Generate the synthetic desk-scale dataset");

    auto* prepare = app.add_subcommand("prepare", "Crop, balance and filter images into the cache");
    bool synthetic = false;
    prepare->add_flag("--synthetic", synthetic, "Generate synthetic data first");

    auto* train = app.add_subcommand("train", "Train detector components and fuse bundles");
    std::string disease = "all";
    std::string component = "all";
    train->add_option("--disease", disease, "Disease acronym or 'all'");
    train->add_option("--component", component, "1, 2, 3 or 'all' (all = components + fusion)");

    auto* search = app.add_subcommand("search", "Grid search on the validation split");
    std::string search_disease;
    search->add_option("--disease", search_disease, "Disease acronym")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate bundles and write the report");
    std::string split = "test";
    std::string benchmark;
    eval->add_option("--split", split, "train, validation or test");
    eval->add_option("--benchmark", benchmark, "Benchmark F1 CSV (disease,f1) for deltas");

    auto* predict = app.add_subcommand("predict", "Per-disease probabilities for one image");
    std::string image_path;
    std::string predict_disease = "all";
    std::string jsonl;
    predict->add_option("image", image_path, "Image file")->required();
    predict->add_option("--disease", predict_disease, "Disease acronym or 'all'");
    predict->add_option("--jsonl", jsonl, "Also write JSON-lines output to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        Config cfg = config_path.empty() ? Config::defaults() : Config::load(config_path);
        if (const char* env_cache = std::getenv("TRIO_FUNDUS_CACHE")) {
            cfg.set("cache_dir", env_cache);
        }
        for (const auto& kv : sets) cfg.apply_set(kv);
        if (seed >= 0) cfg.set("seed", std::to_string(seed));
        if (single_threaded) omp_set_num_threads(1);

        if (*synth) {
            trio::cli::cmd_synth(cfg);
        } else if (*prepare) {
            trio::cli::cmd_prepare(cfg, synthetic);
        } else if (*train) {
            trio::cli::cmd_train(cfg, disease, component);
        } else if (*search) {
            trio::cli::cmd_search(cfg, search_disease);
        } else if (*eval) {
            const auto outcome = trio::cli::cmd_eval(cfg, split, benchmark, plots);
            if (!outcome.errors.empty()) return 3;
        } else if (*predict) {
            trio::cli::cmd_predict(cfg, image_path, predict_disease, jsonl, std::cout);
        }
        return 0;
    } catch (const trio::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
