#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace trio {

// Minimal CSV: comma separated, no quoting (none of the pipeline's formats
// need it), tolerant of trailing \r.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const; // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

} // namespace trio
