#include "gdar/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gdar/common.hpp"

namespace gdar {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

int Table::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

Table read_table(const std::filesystem::path& path, char delim) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path.string());
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            auto eq = body.find('=');
            if (eq != std::string::npos) {
                std::string key = body.substr(0, eq);
                auto ks = key.find_first_not_of(' ');
                auto ke = key.find_last_not_of(' ');
                if (ks != std::string::npos)
                    t.meta[key.substr(ks, ke - ks + 1)] = body.substr(eq + 1);
            }
            continue;
        }
        if (!have_header) {
            t.header = split_line(line, delim);
            have_header = true;
        } else {
            t.rows.push_back(split_line(line, delim));
        }
    }
    require(have_header, "file has no header row: " + path.string());
    return t;
}

void write_table(const std::filesystem::path& path, const Table& table, char delim) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path.string());
    for (const auto& [k, v] : table.meta) out << "# " << k << "=" << v << "\n";
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << delim;
            out << cells[i];
        }
        out << "\n";
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    require(out.good(), "write failed: " + path.string());
}

}  // namespace gdar
