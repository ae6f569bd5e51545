#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace trio {

namespace fs = std::filesystem;

// File writes go through a temp file renamed into place so partially
// written outputs are never observed.
void atomic_write_file(const fs::path& path, const std::string& content);

std::string read_file(const fs::path& path);

uint64_t fnv1a64_file(const fs::path& path);

// 9-significant-digit decimal float, the feature-cache format.
std::string fmt_sig9(double v);

// Report rounding: 5 decimal places, half-up.
double round5(double v);
std::string fmt_fixed5(double v);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

std::vector<std::string> split(const std::string& s, char sep);

std::string trim(const std::string& s);

bool parse_double(const std::string& s, double& out);
bool parse_int(const std::string& s, long long& out);

} // namespace trio
