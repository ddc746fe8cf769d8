#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gdar/graph.hpp"

namespace gdar {

// ---------------------------------------------------------------------------
// Mean-aggregation graph convolution stack. One pass per window step, with
// the same weights at every step, so the parameter count is independent of
// the context length and of the node count.
// ---------------------------------------------------------------------------

struct EncoderConfig {
    int input_dim = 2;                  // node feature width F
    std::vector<int> layer_sizes{16, 8};
    double leaky_slope = 0.01;
    double dropout = 0.2;
    bool use_bias = false;

    int output_dim() const { return layer_sizes.empty() ? input_dim : layer_sizes.back(); }
};

struct EncoderParams {
    std::vector<Eigen::MatrixXd> weights;  // F_{k-1} x F_k
    std::vector<Eigen::VectorXd> biases;   // F_k, empty vectors when bias off
};

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed);
EncoderParams zero_like(const EncoderParams& params);
long encoder_param_count(const EncoderConfig& config);

// out(i,:) = LeakyReLU( mean over j in incoming(i) + self of x(j,:) * W + b ).
// Self-loops are added here so isolated nodes transform their own features.
Eigen::MatrixXd gnn_layer(const Eigen::MatrixXd& x, const NeighborhoodView& view,
                          const Eigen::MatrixXd& weight, const Eigen::VectorXd* bias,
                          double slope);

// Serial reference: naive per-node, per-feature loops. Kept for tests and
// the kernel benchmark.
Eigen::MatrixXd gnn_layer_serial(const Eigen::MatrixXd& x, const NeighborhoodView& view,
                                 const Eigen::MatrixXd& weight, const Eigen::VectorXd* bias,
                                 double slope);

struct EncodeCache {
    struct Layer {
        Eigen::MatrixXd agg;      // aggregated inputs, N x F_in
        Eigen::MatrixXd pre;      // pre-activation, N x F_out
        Eigen::ArrayXXd mask;     // scaled dropout keep-mask; empty when inactive
    };
    std::vector<std::vector<Layer>> steps;  // [P][n_layers]
};

// Applies the layer stack to every step slice with shared weights. Output
// column t' depends only on the step-t' node features and the static edges.
// Dropout is active only when training; masks derive from dropout_seed.
std::vector<Eigen::MatrixXd> encode_window(const NodeFeatureWindow& features,
                                           const NeighborhoodView& view,
                                           const EncoderConfig& config,
                                           const EncoderParams& params, bool training,
                                           std::uint64_t dropout_seed = 0,
                                           EncodeCache* cache = nullptr);

// Accumulates weight (and bias) gradients from per-step output gradients.
void encode_window_backward(const std::vector<Eigen::MatrixXd>& grad_out,
                            const EncodeCache& cache, const NeighborhoodView& view,
                            const EncoderConfig& config, const EncoderParams& params,
                            EncoderParams& grads);

// G_i in R^{D x P} for one article, columns ordered oldest to newest.
struct EmbeddingSequence {
    Eigen::MatrixXd g;
    int anchor = 0;
};

EmbeddingSequence embedding_sequence(const std::vector<Eigen::MatrixXd>& slices, int article,
                                     int anchor);

}  // namespace gdar
