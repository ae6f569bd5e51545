#pragma once

#include "trio/imgproc.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace trio::cli {

// Flat dotted-key configuration. The effective map always carries every
// known key (defaults overlaid by file and --set), so a run.json snapshot
// alone reproduces a run.
class Config {
public:
    static Config defaults();

    // Flat key=value text, or a run.json snapshot (detected by leading '{').
    static Config load(const std::filesystem::path& path);

    void apply_set(const std::string& key_equals_value);
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key) const;
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const; // comma separated
    std::vector<int> get_int_list(const std::string& key) const;
    std::pair<double, double> get_range(const std::string& key) const; // "lo,hi"

    uint64_t seed() const { return static_cast<uint64_t>(get_int("seed")); }

    imgproc::AugmentSpec augment_spec() const;
    imgproc::ClaheParams clahe_params() const;
    imgproc::FilterSpec filter_spec() const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // run.json snapshot: {"command": ..., "args": {...}, "seed": ..., "config": {...}};
    // command + args + config reproduce the run byte-for-byte.
    std::string snapshot_json(const std::string& command,
                              const std::map<std::string, std::string>& args = {}) const;
    void write_run_json(const std::filesystem::path& dir, const std::string& command,
                        const std::map<std::string, std::string>& args = {}) const;

private:
    std::map<std::string, std::string> values_;

    void require_known(const std::string& key) const;
};

} // namespace trio::cli
