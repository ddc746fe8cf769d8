#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gdar {

// Delimited text with optional leading "# key=value" metadata lines before
// the header row. All artifact files use this layout so a config hash can
// ride along without disturbing the column header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::map<std::string, std::string> meta;

    int column(const std::string& name) const;  // -1 when absent
};

Table read_table(const std::filesystem::path& path, char delim = ',');

void write_table(const std::filesystem::path& path, const Table& table, char delim = ',');

std::vector<std::string> split_line(const std::string& line, char delim);

}  // namespace gdar
