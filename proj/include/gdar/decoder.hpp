#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "gdar/tdist.hpp"

namespace gdar {

// Per-step decoder input channels, concatenated in this order.
struct InputLayout {
    int lag = 1;        // scaled previous demand
    int embedding = 0;  // graph embedding width D; 0 in non-graph mode
    int statics = 0;    // static article features M
    int dynamics = 0;   // known time-varying features L

    int width() const { return lag + embedding + statics + dynamics; }
};

struct DecoderConfig {
    std::vector<int> hidden{128, 128};
    double dropout = 0.2;
    int context_length = 10;
    int horizon = 5;
    InputLayout layout;
    std::optional<double> fixed_nu;  // ablation: freeze degrees of freedom

    int n_layers() const { return static_cast<int>(hidden.size()); }
};

struct LstmLayerParams {
    Eigen::MatrixXd w_input;  // 4H x In, gate order [i f g o]
    Eigen::MatrixXd w_recur;  // 4H x H
    Eigen::VectorXd bias;     // 4H
};

struct HeadParams {
    Eigen::MatrixXd weight;  // 3 x H_top -> (mu_raw, s_raw, nu_raw)
    Eigen::VectorXd bias;
};

struct DecoderParams {
    std::vector<LstmLayerParams> layers;
    HeadParams head;
};

DecoderParams init_decoder(const DecoderConfig& config, std::uint64_t seed);
DecoderParams zero_like(const DecoderParams& params);
long decoder_param_count(const DecoderConfig& config);

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct DecoderCache {
    struct Cell {
        Eigen::VectorXd x, h_prev, c_prev;
        Eigen::VectorXd i, f, g, o, c, hc;
        Eigen::ArrayXd drop_mask;  // applied to this layer's output, scaled
    };
    std::vector<std::vector<Cell>> cells;    // [n_layers][steps]
    std::vector<Eigen::VectorXd> head_raw;   // [steps]
    std::vector<Eigen::VectorXd> h_top;      // [steps]
    double scale = 1.0;
};

// Teacher-forced pass over an assembled input sequence. The target scale
// multiplies the location and scale heads so emitted parameters live in
// demand units. Rejects non-finite inputs naming the offending channel.
std::vector<TStudentParams> decoder_forward(const std::vector<Eigen::VectorXd>& inputs,
                                            double scale, const DecoderConfig& config,
                                            const DecoderParams& params, bool training,
                                            std::uint64_t dropout_seed = 0,
                                            DecoderCache* cache = nullptr);

// step_grads hold dLoss/d(mu, scale, nu) per step (zeros where a step takes
// no loss). grad_inputs, when given, receives dLoss/dx per step for the
// encoder backward hop.
void decoder_backward(const std::vector<TNllGrad>& step_grads, const DecoderCache& cache,
                      const DecoderConfig& config, const DecoderParams& params,
                      DecoderParams& grads, std::vector<Eigen::VectorXd>* grad_inputs = nullptr);

// ---------------------------------------------------------------------------
// Stateful single-step interface for autoregressive sampling.
// ---------------------------------------------------------------------------

struct LstmState {
    std::vector<Eigen::VectorXd> h, c;
};

LstmState init_state(const DecoderConfig& config);

Eigen::VectorXd lstm_step(const Eigen::VectorXd& x, const DecoderConfig& config,
                          const DecoderParams& params, LstmState& state);

TStudentParams head_output(const Eigen::VectorXd& h_top, const DecoderConfig& config,
                           const DecoderParams& params, double scale);

// ---------------------------------------------------------------------------
// Empirical quantiles of sampled paths: rows are paths, columns horizon
// steps. Returns a K x |qs| matrix, monotone in q per step.
// ---------------------------------------------------------------------------

Eigen::MatrixXd forecast_quantiles(const Eigen::MatrixXd& paths, const std::vector<double>& qs);

}  // namespace gdar
