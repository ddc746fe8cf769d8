#include "gdar/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gdar/common.hpp"

namespace gdar {

void finalize_model_config(ModelConfig& config, const PanelDataset& panel) {
    config.encoder.input_dim = config.node_lag_depth + 1;
    config.decoder.layout.lag = 1;
    config.decoder.layout.embedding = config.graph_mode ? config.encoder.output_dim() : 0;
    config.decoder.layout.statics = panel.m();
    config.decoder.layout.dynamics = panel.l();
    require(config.decoder.context_length >= 1 && config.decoder.horizon >= 1,
            "context_length and horizon must be >= 1");
    require(!config.decoder.hidden.empty(), "decoder needs at least one layer");
    if (config.graph_mode) require(!config.encoder.layer_sizes.empty(), "encoder needs layers");
    require(panel.k_future >= config.decoder.horizon ||
                panel.t_len() >= config.decoder.horizon,
            "panel dynamics do not cover the horizon");
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p;
    if (config.graph_mode) p.encoder = init_encoder(config.encoder, derive_seed(seed, "enc"));
    p.decoder = init_decoder(config.decoder, derive_seed(seed, "dec"));
    return p;
}

ModelParams zero_grads(const ModelConfig& config, const ModelParams& params) {
    ModelParams g;
    if (config.graph_mode) g.encoder = zero_like(*params.encoder);
    g.decoder = zero_like(params.decoder);
    return g;
}

long model_param_count(const ModelConfig& config) {
    long n = decoder_param_count(config.decoder);
    if (config.graph_mode) n += encoder_param_count(config.encoder);
    return n;
}

namespace {

template <class Fn>
void visit_tensors(ModelParams& p, Fn&& fn) {
    if (p.encoder) {
        for (auto& w : p.encoder->weights) fn(w.data(), w.size());
        for (auto& b : p.encoder->biases)
            if (b.size()) fn(b.data(), b.size());
    }
    for (auto& l : p.decoder.layers) {
        fn(l.w_input.data(), l.w_input.size());
        fn(l.w_recur.data(), l.w_recur.size());
        fn(l.bias.data(), l.bias.size());
    }
    fn(p.decoder.head.weight.data(), p.decoder.head.weight.size());
    fn(p.decoder.head.bias.data(), p.decoder.head.bias.size());
}

}  // namespace

std::vector<double> flatten_params(const ModelParams& params) {
    std::vector<double> flat;
    auto& mut = const_cast<ModelParams&>(params);
    visit_tensors(mut, [&](double* data, Eigen::Index n) {
        flat.insert(flat.end(), data, data + n);
    });
    return flat;
}

void unflatten_params(std::span<const double> flat, ModelParams& params) {
    std::size_t off = 0;
    visit_tensors(params, [&](double* data, Eigen::Index n) {
        require(off + static_cast<std::size_t>(n) <= flat.size(), "flat parameter size mismatch");
        std::copy(flat.begin() + off, flat.begin() + off + n, data);
        off += static_cast<std::size_t>(n);
    });
    require(off == flat.size(), "flat parameter size mismatch");
}

double target_scale(const PanelDataset& panel, int article, int anchor, int context_length,
                    AccessMonitor* monitor) {
    double sum = 0;
    for (int week = anchor - context_length + 1; week <= anchor; ++week) {
        if (monitor) monitor->note_decoder_read(week);
        if (week >= 1 && panel.available(article, week - 1)) sum += panel.demand(article, week - 1);
    }
    return 1.0 + sum / static_cast<double>(context_length);
}

std::vector<Eigen::VectorXd> assemble_window_inputs(
    const PanelDataset& panel, int article, int anchor, const ModelConfig& config, double scale,
    const std::vector<Eigen::MatrixXd>* embedding_slices, AccessMonitor* monitor) {
    const auto& layout = config.decoder.layout;
    const int p_len = config.decoder.context_length;
    const int k_len = config.decoder.horizon;
    std::vector<Eigen::VectorXd> inputs;
    inputs.reserve(p_len + k_len);
    for (int s = 0; s < p_len + k_len; ++s) {
        const int week = anchor - p_len + 1 + s;  // step target week
        Eigen::VectorXd x(layout.width());
        int at = 0;
        const int lag_week = week - 1;
        double lag = 0.0;
        if (lag_week >= 1 && lag_week <= panel.t_len()) {
            if (monitor) monitor->note_decoder_read(lag_week);
            if (panel.available(article, lag_week - 1))
                lag = panel.demand(article, lag_week - 1) / scale;
        }
        x(at++) = lag;
        if (layout.embedding) {
            require(embedding_slices != nullptr, "graph mode requires embeddings");
            const auto& slice = (*embedding_slices)[std::min(s, p_len - 1)];
            x.segment(at, layout.embedding) = slice.row(article).transpose();
            at += layout.embedding;
        }
        x.segment(at, layout.statics) = panel.static_features.row(article).transpose();
        at += layout.statics;
        x.segment(at, layout.dynamics) = panel.dynamic_features[article].col(week - 1);
        at += layout.dynamics;
        inputs.push_back(std::move(x));
    }
    return inputs;
}

// ---------------------------------------------------------------------------
// Batch loss
// ---------------------------------------------------------------------------

double batch_loss(const PanelDataset& panel, std::span<const Window> windows,
                  const SimilarityGraph* graph, const NeighborhoodView* view,
                  const ModelConfig& config, const ModelParams& params, const LossOptions& opts,
                  ModelParams* grads) {
    require(!windows.empty(), "empty batch");
    const int p_len = config.decoder.context_length;
    const int k_len = config.decoder.horizon;
    const int steps = p_len + k_len;
    const int anchor = windows[0].anchor;

    std::vector<Eigen::MatrixXd> slices;
    EncodeCache enc_cache;
    if (config.graph_mode) {
        require(graph && view && params.encoder, "graph mode requires a graph and encoder");
        for (const auto& w : windows)
            require(w.anchor == anchor, "graph-mode batch mixes anchor weeks");
        NodeFeatureWindow nfw = window_node_features(*graph, panel, anchor, p_len,
                                                     config.node_lag_depth, opts.monitor);
        slices = encode_window(nfw, *view, config.encoder, *params.encoder, opts.training,
                               derive_seed(opts.dropout_seed, "enc", anchor),
                               grads ? &enc_cache : nullptr);
    }

    const long n_terms = static_cast<long>(windows.size()) * steps;
    const double inv_terms = 1.0 / static_cast<double>(n_terms);

    int n_threads = 1;
#ifdef _OPENMP
    n_threads = opts.monitor ? 1 : omp_get_max_threads();
#endif
    std::vector<double> loss_parts(n_threads, 0.0);
    std::vector<DecoderParams> dec_parts;
    std::vector<std::vector<Eigen::MatrixXd>> emb_parts;
    if (grads) {
        dec_parts.assign(n_threads, zero_like(params.decoder));
        if (config.graph_mode) {
            std::vector<Eigen::MatrixXd> zero_slices;
            for (const auto& s : slices)
                zero_slices.push_back(Eigen::MatrixXd::Zero(s.rows(), s.cols()));
            emb_parts.assign(n_threads, zero_slices);
        }
    }

    const auto& layout = config.decoder.layout;
    const int n_windows = static_cast<int>(windows.size());
#pragma omp parallel for schedule(static) num_threads(n_threads)
    for (int wi = 0; wi < n_windows; ++wi) {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        const Window& w = windows[wi];
        const double scale = target_scale(panel, w.article, w.anchor, p_len, opts.monitor);
        std::vector<Eigen::VectorXd> inputs =
            assemble_window_inputs(panel, w.article, w.anchor, config, scale,
                                   config.graph_mode ? &slices : nullptr, opts.monitor);
        DecoderCache cache;
        std::vector<TStudentParams> out = decoder_forward(
            inputs, scale, config.decoder, params.decoder, opts.training,
            derive_seed(opts.dropout_seed, "dec", static_cast<std::uint64_t>(w.article), anchor),
            grads ? &cache : nullptr);

        std::vector<TNllGrad> step_grads(steps);
        double local = 0;
        for (int s = 0; s < steps; ++s) {
            const int week = w.anchor - p_len + 1 + s;
            if (opts.monitor) opts.monitor->note_decoder_read(week);
            const double y = panel.demand(w.article, week - 1);
            const double weight = asymmetric_weight(out[s], y, opts.w_under, opts.w_over);
            local += weight * t_nll(out[s], y);
            if (grads) {
                TNllGrad g = t_nll_grad(out[s], y);
                step_grads[s] = {g.d_mu * weight * inv_terms, g.d_scale * weight * inv_terms,
                                 g.d_nu * weight * inv_terms};
            }
        }
        loss_parts[tid] += local;

        if (grads) {
            std::vector<Eigen::VectorXd> grad_inputs;
            decoder_backward(step_grads, cache, config.decoder, params.decoder, dec_parts[tid],
                             config.graph_mode ? &grad_inputs : nullptr);
            if (config.graph_mode) {
                for (int s = 0; s < steps; ++s) {
                    const int slice_idx = std::min(s, p_len - 1);
                    emb_parts[tid][slice_idx].row(w.article) +=
                        grad_inputs[s].segment(layout.lag, layout.embedding).transpose();
                }
            }
        }
    }

    double loss_sum = 0;
    for (double v : loss_parts) loss_sum += v;
    const double mean_loss = loss_sum * inv_terms;
    require(std::isfinite(mean_loss), "non-finite batch loss");

    if (grads) {
        for (int t = 0; t < n_threads; ++t) {
            auto& dst = grads->decoder;
            const auto& src = dec_parts[t];
            for (std::size_t l = 0; l < src.layers.size(); ++l) {
                dst.layers[l].w_input += src.layers[l].w_input;
                dst.layers[l].w_recur += src.layers[l].w_recur;
                dst.layers[l].bias += src.layers[l].bias;
            }
            dst.head.weight += src.head.weight;
            dst.head.bias += src.head.bias;
        }
        if (config.graph_mode) {
            std::vector<Eigen::MatrixXd> emb_grad;
            for (const auto& s : slices)
                emb_grad.push_back(Eigen::MatrixXd::Zero(s.rows(), s.cols()));
            for (int t = 0; t < n_threads; ++t)
                for (std::size_t p = 0; p < emb_grad.size(); ++p) emb_grad[p] += emb_parts[t][p];
            encode_window_backward(emb_grad, enc_cache, *view, config.encoder, *params.encoder,
                                   *grads->encoder);
        }
    }
    return mean_loss;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

Eigen::MatrixXd sample_forecast(const PanelDataset& panel, int article, int anchor,
                                const SimilarityGraph* graph, const NeighborhoodView* view,
                                const ModelConfig& config, const ModelParams& params,
                                int n_samples, std::uint64_t seed, AccessMonitor* monitor) {
    require(n_samples >= 1, "n_samples must be >= 1");
    const int p_len = config.decoder.context_length;
    const int k_len = config.decoder.horizon;
    const auto& layout = config.decoder.layout;

    std::vector<Eigen::MatrixXd> slices;
    if (config.graph_mode) {
        require(graph && view && params.encoder, "graph mode requires a graph and encoder");
        NodeFeatureWindow nfw =
            window_node_features(*graph, panel, anchor, p_len, config.node_lag_depth, monitor);
        slices = encode_window(nfw, *view, config.encoder, *params.encoder, false);
    }
    const double scale = target_scale(panel, article, anchor, p_len, monitor);

    // shared context inputs (steps 0..P-1 of the teacher-forced layout)
    std::vector<Eigen::VectorXd> context;
    for (int s = 0; s < p_len; ++s) {
        const int week = anchor - p_len + 1 + s;
        Eigen::VectorXd x(layout.width());
        int at = 0;
        const int lag_week = week - 1;
        double lag = 0.0;
        if (lag_week >= 1) {
            if (monitor) monitor->note_decoder_read(lag_week);
            if (panel.available(article, lag_week - 1))
                lag = panel.demand(article, lag_week - 1) / scale;
        }
        x(at++) = lag;
        if (layout.embedding) {
            x.segment(at, layout.embedding) = slices[s].row(article).transpose();
            at += layout.embedding;
        }
        x.segment(at, layout.statics) = panel.static_features.row(article).transpose();
        at += layout.statics;
        x.segment(at, layout.dynamics) = panel.dynamic_features[article].col(week - 1);
        context.push_back(std::move(x));
    }
    if (monitor) monitor->note_decoder_read(anchor);  // last observed lag
    const double last_lag =
        panel.available(article, anchor - 1) ? panel.demand(article, anchor - 1) / scale : 0.0;

    Eigen::MatrixXd paths(n_samples, k_len);
#pragma omp parallel for schedule(static) if (monitor == nullptr)
    for (int p = 0; p < n_samples; ++p) {
        std::mt19937_64 rng(derive_seed(seed, "path", static_cast<std::uint64_t>(p)));
        LstmState state = init_state(config.decoder);
        for (const auto& x : context) lstm_step(x, config.decoder, params.decoder, state);
        double lag = last_lag;
        for (int k = 0; k < k_len; ++k) {
            const int week = anchor + 1 + k;
            Eigen::VectorXd x(layout.width());
            int at = 0;
            x(at++) = lag;
            if (layout.embedding) {
                x.segment(at, layout.embedding) = slices[p_len - 1].row(article).transpose();
                at += layout.embedding;
            }
            x.segment(at, layout.statics) = panel.static_features.row(article).transpose();
            at += layout.statics;
            x.segment(at, layout.dynamics) = panel.dynamic_features[article].col(week - 1);
            Eigen::VectorXd h = lstm_step(x, config.decoder, params.decoder, state);
            TStudentParams dist = head_output(h, config.decoder, params.decoder, scale);
            const double draw = sample_t_clamped(dist, rng);
            paths(p, k) = draw;
            lag = draw / scale;
        }
    }
    return paths;
}

Eigen::MatrixXd embeddings_at(const PanelDataset& panel, const SimilarityGraph& graph,
                              const NeighborhoodView& view, const ModelConfig& config,
                              const ModelParams& params, int anchor) {
    require(params.encoder.has_value(), "model has no encoder");
    NodeFeatureWindow nfw = window_node_features(graph, panel, anchor,
                                                 config.decoder.context_length,
                                                 config.node_lag_depth);
    auto slices = encode_window(nfw, view, config.encoder, *params.encoder, false);
    return slices.back();
}

Eigen::MatrixXd project_2d(const Eigen::MatrixXd& rows) {
    require(rows.rows() >= 2 && rows.cols() >= 1, "need at least two rows to project");
    Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const int d = static_cast<int>(cov.cols());
    Eigen::MatrixXd basis(d, 2);
    basis.col(0) = solver.eigenvectors().col(d - 1);
    basis.col(1) = d >= 2 ? solver.eigenvectors().col(d - 2) : Eigen::VectorXd::Zero(d).eval();
    // deterministic sign: largest-magnitude component is positive
    for (int c = 0; c < 2; ++c) {
        int arg = 0;
        for (int r = 1; r < d; ++r)
            if (std::abs(basis(r, c)) > std::abs(basis(arg, c))) arg = r;
        if (basis(arg, c) < 0) basis.col(c) = -basis.col(c);
    }
    return centered * basis;
}

}  // namespace gdar
