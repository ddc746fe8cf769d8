#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gdar/decoder.hpp"
#include "gdar/encoder.hpp"
#include "gdar/graph.hpp"
#include "gdar/panel.hpp"

namespace gdar {

// ---------------------------------------------------------------------------
// The combined forecaster: optional graph encoder + recurrent decoder.
// Non-graph mode has no encoder parameters at all and a narrower input
// layout (no embedding channel).
// ---------------------------------------------------------------------------

struct ModelConfig {
    bool graph_mode = false;
    int node_lag_depth = 1;
    EncoderConfig encoder;
    DecoderConfig decoder;
};

// Fills the derived layout fields (encoder input width, decoder channel
// widths) from the panel shape and validates consistency.
void finalize_model_config(ModelConfig& config, const PanelDataset& panel);

struct ModelParams {
    std::optional<EncoderParams> encoder;
    DecoderParams decoder;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);
ModelParams zero_grads(const ModelConfig& config, const ModelParams& params);
long model_param_count(const ModelConfig& config);

std::vector<double> flatten_params(const ModelParams& params);
void unflatten_params(std::span<const double> flat, ModelParams& params);

// ---------------------------------------------------------------------------
// Target scale: per-article 1 + mean context demand, inverted at sampling.
// ---------------------------------------------------------------------------

double target_scale(const PanelDataset& panel, int article, int anchor, int context_length,
                    AccessMonitor* monitor = nullptr);

// Teacher-forced input sequence over P context + K horizon steps.
// Embedding slices (when given) supply the embedding channel; horizon steps
// reuse the final context column.
std::vector<Eigen::VectorXd> assemble_window_inputs(
    const PanelDataset& panel, int article, int anchor, const ModelConfig& config, double scale,
    const std::vector<Eigen::MatrixXd>* embedding_slices, AccessMonitor* monitor = nullptr);

// ---------------------------------------------------------------------------
// Batch loss + gradients. In graph mode all windows must share one anchor
// (synchronized batching) and graph/view must be present.
// ---------------------------------------------------------------------------

struct LossOptions {
    double w_under = 1.0;
    double w_over = 1.0;
    bool training = true;
    std::uint64_t dropout_seed = 0;
    AccessMonitor* monitor = nullptr;  // instrumented runs are serialized
};

double batch_loss(const PanelDataset& panel, std::span<const Window> windows,
                  const SimilarityGraph* graph, const NeighborhoodView* view,
                  const ModelConfig& config, const ModelParams& params, const LossOptions& opts,
                  ModelParams* grads = nullptr);

// ---------------------------------------------------------------------------
// Forecast sampling: autoregressive rollout over the horizon, one Student-t
// draw per step fed back as the next lag, clamped at zero. Paths use
// independent substreams of `seed`, so the parallel schedule cannot change
// the result.
// ---------------------------------------------------------------------------

Eigen::MatrixXd sample_forecast(const PanelDataset& panel, int article, int anchor,
                                const SimilarityGraph* graph, const NeighborhoodView* view,
                                const ModelConfig& config, const ModelParams& params,
                                int n_samples, std::uint64_t seed,
                                AccessMonitor* monitor = nullptr);

// Embedding columns g_i^anchor for every article (inference mode).
Eigen::MatrixXd embeddings_at(const PanelDataset& panel, const SimilarityGraph& graph,
                              const NeighborhoodView& view, const ModelConfig& config,
                              const ModelParams& params, int anchor);

// Linear 2-D projection (principal components) of embedding rows.
Eigen::MatrixXd project_2d(const Eigen::MatrixXd& rows);

}  // namespace gdar
