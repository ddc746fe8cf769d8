#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gdar/panel.hpp"

namespace gdar {

// ---------------------------------------------------------------------------
// SimilarityGraph: undirected, threshold-filtered cosine-similarity graph.
// Edges are stored once with src < dst; adjacency is queried symmetrically.
// Self-loops are never stored; message passing adds them functionally.
// ---------------------------------------------------------------------------

struct SimilarityGraph {
    struct Edge {
        int src = 0, dst = 0;  // src < dst
        double similarity = 0;
    };

    int n_nodes = 0;
    double threshold = 0.95;
    std::vector<Edge> edges;                  // sorted by (src, dst)
    std::vector<std::vector<int>> neighbors;  // symmetric view, each list sorted
    std::vector<int> degree;                  // degree[i] == neighbors[i].size()

    void rebuild_adjacency();
    int max_degree() const;
};

// Similarity score for one article pair. A plain fixed-order dot product so
// that chunked, serial and brute-force paths agree bit for bit.
double cosine_pair(const Eigen::MatrixXd& features, int i, int j,
                   const std::vector<double>& norms);

std::vector<double> row_norms(const Eigen::MatrixXd& features);

using ScoreSink = std::function<void(int i, int j, double similarity)>;

// Streams cos(X_i, X_j) for all i<j pairs, chunk pair by chunk pair. Chunk
// pairs run in parallel; results are merged in chunk order so the emitted
// stream does not depend on the thread count. Zero-norm rows score 0 against
// everything. Rejects non-finite features naming the row.
void pairwise_similarity(const Eigen::MatrixXd& features, int chunk_size, const ScoreSink& sink);

// Serial reference kernel: direct O(N^2) double loop, no chunking.
void pairwise_similarity_serial(const Eigen::MatrixXd& features, const ScoreSink& sink);

SimilarityGraph build_graph(const Eigen::MatrixXd& features, double threshold, int chunk_size);

SimilarityGraph build_graph_from_scores(int n_nodes,
                                        const std::vector<SimilarityGraph::Edge>& scores,
                                        double threshold);

// ---------------------------------------------------------------------------
// Neighborhood sampling: per-destination view over incoming messages. The
// stored graph stays symmetric; the view caps each node's incoming neighbor
// list at max_neighbors (uniformly at random, deterministic per seed).
// ---------------------------------------------------------------------------

struct NeighborhoodView {
    int n_nodes = 0;
    std::vector<std::vector<int>> incoming;  // per dst, sorted; self excluded

    // reverse lists for gradient scatter: for source j, the destinations i
    // with j in incoming(i), paired with 1/(1+|incoming(i)|)
    std::vector<std::vector<std::pair<int, double>>> reverse;

    void rebuild_reverse();
    static NeighborhoodView full(const SimilarityGraph& graph);
};

NeighborhoodView sample_neighborhood(const SimilarityGraph& graph, int max_neighbors,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Per-window node features: demand lags ending at each window step plus the
// normalized in-degree channel (constant across steps). F = lag_depth + 1.
// ---------------------------------------------------------------------------

struct NodeFeatureWindow {
    int anchor = 0;
    int context_length = 0;
    int feature_dim = 0;
    std::vector<Eigen::MatrixXd> steps;  // P matrices of N x F, oldest first
};

NodeFeatureWindow window_node_features(const SimilarityGraph& graph, const PanelDataset& panel,
                                       int anchor, int context_length, int node_lag_depth,
                                       AccessMonitor* monitor = nullptr);

// ---------------------------------------------------------------------------
// Stats & IO
// ---------------------------------------------------------------------------

struct GraphStats {
    double mean_degree = 0;
    double degree_std = 0;
    double isolated_fraction = 0;
    std::size_t edge_count = 0;
};

GraphStats graph_stats(const SimilarityGraph& graph);

void save_graph(const SimilarityGraph& graph, const std::vector<std::string>& article_ids,
                const std::filesystem::path& edge_file, const std::filesystem::path& meta_file,
                const std::map<std::string, std::string>& meta);

struct LoadedGraph {
    SimilarityGraph graph;
    std::map<std::string, std::string> meta;  // tau, n, schema_hash, ...
};

LoadedGraph load_graph(const std::filesystem::path& edge_file,
                       const std::filesystem::path& meta_file,
                       const std::vector<std::string>& article_ids);

}  // namespace gdar
