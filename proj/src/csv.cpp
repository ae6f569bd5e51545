#include "trio/csv.hpp"

#include "trio/error.hpp"
#include "trio/util.hpp"

#include <fstream>

namespace trio {

int CsvTable::col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail_data("cannot open CSV: " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.eof()) break;
        auto cells = split(line, ',');
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) fail_data("empty CSV: " + path.string());
    return table;
}

std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
    std::string out = join(header, ",");
    out += '\n';
    for (const auto& row : rows) {
        out += join(row, ",");
        out += '\n';
    }
    return out;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    atomic_write_file(path, csv_to_string(header, rows));
}

} // namespace trio
