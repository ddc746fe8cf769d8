#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gdar/common.hpp"
#include "gdar/graph.hpp"
#include "gdar/panel.hpp"

namespace test_support {

// Scratch directory under the build tree, wiped per fixture name.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "gdar_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed, double lo = -1.0,
                                     double hi = 1.0) {
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = lo + (hi - lo) * gdar::unit_double(rng());
    return m;
}

// Brute-force cosine edge oracle, independent of the chunked kernel.
inline std::vector<std::tuple<int, int>> brute_force_edges(const Eigen::MatrixXd& x,
                                                           double threshold) {
    std::vector<std::tuple<int, int>> edges;
    const int n = static_cast<int>(x.rows());
    for (int i = 0; i < n; ++i) {
        double ni = 0;
        for (int c = 0; c < x.cols(); ++c) ni += x(i, c) * x(i, c);
        ni = std::sqrt(ni);
        for (int j = i + 1; j < n; ++j) {
            double nj = 0;
            for (int c = 0; c < x.cols(); ++c) nj += x(j, c) * x(j, c);
            nj = std::sqrt(nj);
            double dot = 0;
            for (int c = 0; c < x.cols(); ++c) dot += x(i, c) * x(j, c);
            double sim = (ni == 0.0 || nj == 0.0) ? 0.0 : dot / (ni * nj);
            if (sim >= threshold) edges.emplace_back(i, j);
        }
    }
    return edges;
}

inline std::vector<std::tuple<int, int>> edge_tuples(const gdar::SimilarityGraph& g) {
    std::vector<std::tuple<int, int>> out;
    for (const auto& e : g.edges) out.emplace_back(e.src, e.dst);
    return out;
}

// Minimal fully-observed panel with constant static/dynamic features, handy
// for decoder and trainer tests.
inline gdar::PanelDataset tiny_panel(int n, int t_len, std::uint64_t seed, int k_future = 4) {
    gdar::PanelDataset panel;
    for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "A%03d", i);
        panel.article_ids.push_back(buf);
    }
    panel.timeline = gdar::Timeline{gdar::Timeline::Kind::integer, 1, 1, t_len};
    panel.demand = random_matrix(n, t_len, seed, 0.0, 5.0);
    panel.available =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, t_len, true);
    panel.static_features = random_matrix(n, 3, seed + 1, 0.0, 1.0);
    gdar::add_calendar_features(panel, k_future);
    panel.schema_hash = "testhash";
    panel.validate();
    return panel;
}

}  // namespace test_support
