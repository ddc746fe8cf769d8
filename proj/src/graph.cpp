#include "gdar/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "gdar/common.hpp"
#include "gdar/csv.hpp"
#include "json.hpp"

namespace gdar {

void SimilarityGraph::rebuild_adjacency() {
    neighbors.assign(n_nodes, {});
    for (const auto& e : edges) {
        neighbors[e.src].push_back(e.dst);
        neighbors[e.dst].push_back(e.src);
    }
    degree.resize(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        std::sort(neighbors[i].begin(), neighbors[i].end());
        degree[i] = static_cast<int>(neighbors[i].size());
    }
}

int SimilarityGraph::max_degree() const {
    int d = 0;
    for (int v : degree) d = std::max(d, v);
    return d;
}

std::vector<double> row_norms(const Eigen::MatrixXd& features) {
    const int n = static_cast<int>(features.rows());
    const int m = static_cast<int>(features.cols());
    std::vector<double> norms(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < m; ++c)
            require(std::isfinite(features(i, c)),
                    "non-finite feature value in row " + std::to_string(i));
        double acc = 0;
        for (int c = 0; c < m; ++c) acc += features(i, c) * features(i, c);
        norms[i] = std::sqrt(acc);
    }
    return norms;
}

double cosine_pair(const Eigen::MatrixXd& features, int i, int j,
                   const std::vector<double>& norms) {
    if (norms[i] == 0.0 || norms[j] == 0.0) return 0.0;
    double acc = 0;
    for (int c = 0; c < static_cast<int>(features.cols()); ++c)
        acc += features(i, c) * features(j, c);
    return acc / (norms[i] * norms[j]);
}

void pairwise_similarity_serial(const Eigen::MatrixXd& features, const ScoreSink& sink) {
    const int n = static_cast<int>(features.rows());
    std::vector<double> norms = row_norms(features);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) sink(i, j, cosine_pair(features, i, j, norms));
}

void pairwise_similarity(const Eigen::MatrixXd& features, int chunk_size, const ScoreSink& sink) {
    const int n = static_cast<int>(features.rows());
    require(chunk_size >= 1, "chunk_size must be >= 1");
    std::vector<double> norms = row_norms(features);

    const int n_chunks = (n + chunk_size - 1) / chunk_size;
    std::vector<std::pair<int, int>> chunk_pairs;  // (a, b) with a <= b
    for (int a = 0; a < n_chunks; ++a)
        for (int b = a; b < n_chunks; ++b) chunk_pairs.emplace_back(a, b);

    struct Scored {
        int i, j;
        double s;
    };
    std::vector<std::vector<Scored>> blocks(chunk_pairs.size());

#pragma omp parallel for schedule(dynamic)
    for (std::size_t p = 0; p < chunk_pairs.size(); ++p) {
        auto [a, b] = chunk_pairs[p];
        const int ia0 = a * chunk_size, ia1 = std::min(n, ia0 + chunk_size);
        const int ib0 = b * chunk_size, ib1 = std::min(n, ib0 + chunk_size);
        auto& out = blocks[p];
        for (int i = ia0; i < ia1; ++i)
            for (int j = std::max(i + 1, ib0); j < ib1; ++j)
                out.push_back({i, j, cosine_pair(features, i, j, norms)});
    }

    // Ordered merge: emission order is fixed by the chunk-pair schedule.
    for (const auto& block : blocks)
        for (const auto& s : block) sink(s.i, s.j, s.s);
}

SimilarityGraph build_graph_from_scores(int n_nodes,
                                        const std::vector<SimilarityGraph::Edge>& scores,
                                        double threshold) {
    require(threshold > -1.0 && threshold <= 1.0, "threshold must lie in (-1, 1]");
    SimilarityGraph g;
    g.n_nodes = n_nodes;
    g.threshold = threshold;
    for (const auto& e : scores)
        if (e.similarity >= threshold) g.edges.push_back(e);
    std::sort(g.edges.begin(), g.edges.end(), [](const auto& x, const auto& y) {
        return std::tie(x.src, x.dst) < std::tie(y.src, y.dst);
    });
    g.rebuild_adjacency();
    return g;
}

SimilarityGraph build_graph(const Eigen::MatrixXd& features, double threshold, int chunk_size) {
    require(threshold > -1.0 && threshold <= 1.0, "threshold must lie in (-1, 1]");
    std::vector<SimilarityGraph::Edge> kept;
    pairwise_similarity(features, chunk_size, [&](int i, int j, double s) {
        if (s >= threshold) kept.push_back({i, j, s});
    });
    return build_graph_from_scores(static_cast<int>(features.rows()), kept, threshold);
}

// ---------------------------------------------------------------------------
// Neighborhood sampling
// ---------------------------------------------------------------------------

void NeighborhoodView::rebuild_reverse() {
    reverse.assign(n_nodes, {});
    for (int i = 0; i < n_nodes; ++i) {
        const double w = 1.0 / static_cast<double>(1 + incoming[i].size());
        reverse[i].emplace_back(i, w);  // self-loop
        for (int j : incoming[i]) reverse[j].emplace_back(i, w);
    }
}

NeighborhoodView NeighborhoodView::full(const SimilarityGraph& graph) {
    NeighborhoodView v;
    v.n_nodes = graph.n_nodes;
    v.incoming = graph.neighbors;
    v.rebuild_reverse();
    return v;
}

NeighborhoodView sample_neighborhood(const SimilarityGraph& graph, int max_neighbors,
                                     std::uint64_t seed) {
    require(max_neighbors >= 0, "max_neighbors must be >= 0");
    NeighborhoodView v;
    v.n_nodes = graph.n_nodes;
    v.incoming.resize(graph.n_nodes);
    for (int i = 0; i < graph.n_nodes; ++i) {
        const auto& full = graph.neighbors[i];
        if (static_cast<int>(full.size()) <= max_neighbors) {
            v.incoming[i] = full;
            continue;
        }
        // Partial Fisher-Yates over a copy, then sorted for a stable
        // aggregation order.
        std::vector<int> pool = full;
        std::mt19937_64 rng(derive_seed(seed, "neigh", static_cast<std::uint64_t>(i)));
        for (int k = 0; k < max_neighbors; ++k) {
            std::size_t pick = k + bounded(rng, pool.size() - k);
            std::swap(pool[k], pool[pick]);
        }
        pool.resize(max_neighbors);
        std::sort(pool.begin(), pool.end());
        v.incoming[i] = std::move(pool);
    }
    v.rebuild_reverse();
    return v;
}

// ---------------------------------------------------------------------------
// Node features
// ---------------------------------------------------------------------------

NodeFeatureWindow window_node_features(const SimilarityGraph& graph, const PanelDataset& panel,
                                       int anchor, int context_length, int node_lag_depth,
                                       AccessMonitor* monitor) {
    require(node_lag_depth >= 1, "node_lag_depth must be >= 1");
    require(anchor >= 1 && anchor <= panel.t_len(), "anchor out of range");
    require(anchor - context_length - node_lag_depth + 2 >= 1,
            "not enough history before anchor " + std::to_string(anchor));
    require(graph.n_nodes == panel.n(), "graph and panel disagree on article count");

    NodeFeatureWindow w;
    w.anchor = anchor;
    w.context_length = context_length;
    w.feature_dim = node_lag_depth + 1;
    const int n = panel.n();
    const double denom = static_cast<double>(std::max(1, graph.max_degree()));
    w.steps.reserve(context_length);
    for (int p = 0; p < context_length; ++p) {
        const int step_week = anchor - context_length + 1 + p;
        Eigen::MatrixXd f(n, w.feature_dim);
        for (int i = 0; i < n; ++i) {
            for (int l = 0; l < node_lag_depth; ++l) {
                const int week = step_week - node_lag_depth + 1 + l;
                if (monitor) monitor->note_graph_read(week);
                f(i, l) = panel.available(i, week - 1) ? panel.demand(i, week - 1) : 0.0;
            }
            f(i, node_lag_depth) = static_cast<double>(graph.degree[i]) / denom;
        }
        w.steps.push_back(std::move(f));
    }
    return w;
}

// ---------------------------------------------------------------------------
// Stats & IO
// ---------------------------------------------------------------------------

GraphStats graph_stats(const SimilarityGraph& graph) {
    GraphStats s;
    s.edge_count = graph.edges.size();
    if (graph.n_nodes == 0) return s;
    double sum = 0, sum2 = 0;
    int isolated = 0;
    for (int d : graph.degree) {
        sum += d;
        sum2 += static_cast<double>(d) * d;
        if (d == 0) ++isolated;
    }
    const double n = static_cast<double>(graph.n_nodes);
    s.mean_degree = sum / n;
    s.degree_std = std::sqrt(std::max(0.0, sum2 / n - s.mean_degree * s.mean_degree));
    s.isolated_fraction = static_cast<double>(isolated) / n;
    return s;
}

void save_graph(const SimilarityGraph& graph, const std::vector<std::string>& article_ids,
                const std::filesystem::path& edge_file, const std::filesystem::path& meta_file,
                const std::map<std::string, std::string>& meta) {
    require(static_cast<int>(article_ids.size()) == graph.n_nodes,
            "article id list does not match graph size");
    Table t;
    t.header = {"src", "dst", "similarity"};
    for (const auto& e : graph.edges)
        t.rows.push_back({article_ids[e.src], article_ids[e.dst], format_double(e.similarity)});
    write_table(edge_file, t);

    nlohmann::json j;
    j["tau"] = graph.threshold;
    j["n_nodes"] = graph.n_nodes;
    j["edge_count"] = graph.edges.size();
    for (const auto& [k, v] : meta) j[k] = v;
    GraphStats s = graph_stats(graph);
    j["stats"] = {{"mean_degree", s.mean_degree},
                  {"degree_std", s.degree_std},
                  {"isolated_fraction", s.isolated_fraction}};
    if (meta_file.has_parent_path()) std::filesystem::create_directories(meta_file.parent_path());
    std::ofstream out(meta_file);
    require(out.good(), "cannot write file: " + meta_file.string());
    out << j.dump(2) << "\n";
}

LoadedGraph load_graph(const std::filesystem::path& edge_file,
                       const std::filesystem::path& meta_file,
                       const std::vector<std::string>& article_ids) {
    std::ifstream in(meta_file);
    require(in.good(), "cannot open file: " + meta_file.string());
    nlohmann::json j = nlohmann::json::parse(in);

    LoadedGraph out;
    out.graph.n_nodes = j.at("n_nodes").get<int>();
    out.graph.threshold = j.at("tau").get<double>();
    require(out.graph.n_nodes == static_cast<int>(article_ids.size()),
            "graph has " + std::to_string(out.graph.n_nodes) + " nodes but the dataset has " +
                std::to_string(article_ids.size()) + " articles");
    for (auto& [k, v] : j.items())
        if (v.is_string()) out.meta[k] = v.get<std::string>();

    std::map<std::string, int> index;
    for (int i = 0; i < static_cast<int>(article_ids.size()); ++i) index[article_ids[i]] = i;

    Table t = read_table(edge_file);
    const int c_src = t.column("src"), c_dst = t.column("dst"), c_sim = t.column("similarity");
    require(c_src >= 0 && c_dst >= 0 && c_sim >= 0,
            "graph file must have columns src,dst,similarity: " + edge_file.string());
    for (const auto& row : t.rows) {
        auto si = index.find(row[c_src]);
        auto di = index.find(row[c_dst]);
        require(si != index.end(), "unknown article in graph file: " + row[c_src]);
        require(di != index.end(), "unknown article in graph file: " + row[c_dst]);
        double s = std::stod(row[c_sim]);
        int a = si->second, b = di->second;
        require(a != b, "self-loop in graph file: " + row[c_src]);
        if (a > b) std::swap(a, b);
        out.graph.edges.push_back({a, b, s});
    }
    std::sort(out.graph.edges.begin(), out.graph.edges.end(), [](const auto& x, const auto& y) {
        return std::tie(x.src, x.dst) < std::tie(y.src, y.dst);
    });
    out.graph.rebuild_adjacency();
    return out;
}

}  // namespace gdar
