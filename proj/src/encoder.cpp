#include "gdar/encoder.hpp"

#include <cmath>
#include <random>

#include "gdar/common.hpp"

namespace gdar {

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed) {
    EncoderParams p;
    int fan_in = config.input_dim;
    for (std::size_t k = 0; k < config.layer_sizes.size(); ++k) {
        const int fan_out = config.layer_sizes[k];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::mt19937_64 rng(derive_seed(seed, "enc_w", k));
        Eigen::MatrixXd w(fan_in, fan_out);
        for (int r = 0; r < fan_in; ++r)
            for (int c = 0; c < fan_out; ++c)
                w(r, c) = bound * (2.0 * unit_double(rng()) - 1.0);
        p.weights.push_back(std::move(w));
        p.biases.push_back(config.use_bias ? Eigen::VectorXd::Zero(fan_out).eval()
                                           : Eigen::VectorXd());
        fan_in = fan_out;
    }
    return p;
}

EncoderParams zero_like(const EncoderParams& params) {
    EncoderParams g;
    for (const auto& w : params.weights) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : params.biases)
        g.biases.push_back(b.size() ? Eigen::VectorXd::Zero(b.size()).eval() : Eigen::VectorXd());
    return g;
}

long encoder_param_count(const EncoderConfig& config) {
    long count = 0;
    int fan_in = config.input_dim;
    for (int fan_out : config.layer_sizes) {
        count += static_cast<long>(fan_in) * fan_out;
        if (config.use_bias) count += fan_out;
        fan_in = fan_out;
    }
    return count;
}

namespace {

// Mean over self + incoming neighbors, rows of x. Fixed accumulation order
// (self first, then sorted neighbor list) keeps results identical across
// thread counts.
Eigen::MatrixXd aggregate(const Eigen::MatrixXd& x, const NeighborhoodView& view) {
    const int n = static_cast<int>(x.rows());
    Eigen::MatrixXd agg(n, x.cols());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd acc = x.row(i);
        for (int j : view.incoming[i]) acc += x.row(j);
        agg.row(i) = acc / static_cast<double>(1 + view.incoming[i].size());
    }
    return agg;
}

void check_shapes(const Eigen::MatrixXd& x, const NeighborhoodView& view,
                  const Eigen::MatrixXd& weight) {
    require(static_cast<int>(x.rows()) == view.n_nodes,
            "node feature rows (" + std::to_string(x.rows()) + ") do not match graph size (" +
                std::to_string(view.n_nodes) + ")");
    require(x.cols() == weight.rows(), "gnn_layer shape mismatch: features are " +
                                           std::to_string(x.rows()) + "x" +
                                           std::to_string(x.cols()) + " but weight is " +
                                           std::to_string(weight.rows()) + "x" +
                                           std::to_string(weight.cols()));
}

}  // namespace

Eigen::MatrixXd gnn_layer(const Eigen::MatrixXd& x, const NeighborhoodView& view,
                          const Eigen::MatrixXd& weight, const Eigen::VectorXd* bias,
                          double slope) {
    check_shapes(x, view, weight);
    Eigen::MatrixXd pre = aggregate(x, view) * weight;
    if (bias && bias->size()) pre.rowwise() += bias->transpose();
    return pre.unaryExpr([slope](double v) { return leaky_relu(v, slope); });
}

Eigen::MatrixXd gnn_layer_serial(const Eigen::MatrixXd& x, const NeighborhoodView& view,
                                 const Eigen::MatrixXd& weight, const Eigen::VectorXd* bias,
                                 double slope) {
    check_shapes(x, view, weight);
    const int n = static_cast<int>(x.rows());
    const int f_in = static_cast<int>(x.cols());
    const int f_out = static_cast<int>(weight.cols());
    Eigen::MatrixXd out(n, f_out);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < f_out; ++c) {
            double acc = 0;
            for (int r = 0; r < f_in; ++r) acc += x(i, r) * weight(r, c);
            for (int j : view.incoming[i])
                for (int r = 0; r < f_in; ++r) acc += x(j, r) * weight(r, c);
            acc /= static_cast<double>(1 + view.incoming[i].size());
            if (bias && bias->size()) acc += (*bias)(c);
            out(i, c) = leaky_relu(acc, slope);
        }
    }
    return out;
}

std::vector<Eigen::MatrixXd> encode_window(const NodeFeatureWindow& features,
                                           const NeighborhoodView& view,
                                           const EncoderConfig& config,
                                           const EncoderParams& params, bool training,
                                           std::uint64_t dropout_seed, EncodeCache* cache) {
    require(features.context_length >= 1, "window must have at least one step");
    require(params.weights.size() == config.layer_sizes.size(), "encoder params/config mismatch");
    const int n_layers = static_cast<int>(config.layer_sizes.size());
    if (cache) cache->steps.assign(features.steps.size(), {});

    std::vector<Eigen::MatrixXd> out;
    out.reserve(features.steps.size());
    for (std::size_t p = 0; p < features.steps.size(); ++p) {
        Eigen::MatrixXd h = features.steps[p];
        if (cache) (*cache).steps[p].resize(n_layers);
        for (int k = 0; k < n_layers; ++k) {
            check_shapes(h, view, params.weights[k]);
            Eigen::MatrixXd agg = aggregate(h, view);
            Eigen::MatrixXd pre = agg * params.weights[k];
            if (config.use_bias && params.biases[k].size())
                pre.rowwise() += params.biases[k].transpose();
            h = pre.unaryExpr(
                [slope = config.leaky_slope](double v) { return leaky_relu(v, slope); });

            Eigen::ArrayXXd mask;
            if (training && config.dropout > 0.0) {
                std::mt19937_64 rng(derive_seed(dropout_seed, "enc_drop", p, k));
                const double keep = 1.0 - config.dropout;
                mask.resize(h.rows(), h.cols());
                for (Eigen::Index r = 0; r < mask.rows(); ++r)
                    for (Eigen::Index c = 0; c < mask.cols(); ++c)
                        mask(r, c) = unit_double(rng()) < keep ? 1.0 / keep : 0.0;
                h.array() *= mask;
            }
            if (cache) {
                auto& lc = (*cache).steps[p][k];
                lc.agg = std::move(agg);
                lc.pre = std::move(pre);
                lc.mask = std::move(mask);
            }
        }
        out.push_back(std::move(h));
    }
    return out;
}

void encode_window_backward(const std::vector<Eigen::MatrixXd>& grad_out,
                            const EncodeCache& cache, const NeighborhoodView& view,
                            const EncoderConfig& config, const EncoderParams& params,
                            EncoderParams& grads) {
    require(grad_out.size() == cache.steps.size(), "gradient/cache step count mismatch");
    const int n_layers = static_cast<int>(config.layer_sizes.size());
    for (std::size_t p = 0; p < grad_out.size(); ++p) {
        Eigen::MatrixXd dh = grad_out[p];
        for (int k = n_layers - 1; k >= 0; --k) {
            const auto& lc = cache.steps[p][k];
            if (lc.mask.size()) dh.array() *= lc.mask;
            Eigen::MatrixXd dz =
                dh.array() *
                lc.pre.unaryExpr([slope = config.leaky_slope](double v) {
                      return leaky_relu_grad(v, slope);
                  }).array();
            grads.weights[k].noalias() += lc.agg.transpose() * dz;
            if (config.use_bias && grads.biases[k].size())
                grads.biases[k] += dz.colwise().sum().transpose();
            if (k > 0) {
                // dA = dz * W^T, then scatter back through the mean: node j
                // collects dA_i / (1 + |incoming(i)|) for every i it feeds.
                Eigen::MatrixXd da = dz * params.weights[k].transpose();
                Eigen::MatrixXd dprev(da.rows(), da.cols());
#pragma omp parallel for schedule(static)
                for (int j = 0; j < view.n_nodes; ++j) {
                    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(da.cols());
                    for (const auto& [dst, w] : view.reverse[j]) acc += w * da.row(dst);
                    dprev.row(j) = acc;
                }
                dh = std::move(dprev);
            }
        }
    }
}

EmbeddingSequence embedding_sequence(const std::vector<Eigen::MatrixXd>& slices, int article,
                                     int anchor) {
    EmbeddingSequence seq;
    seq.anchor = anchor;
    const int p_len = static_cast<int>(slices.size());
    const int dim = p_len ? static_cast<int>(slices[0].cols()) : 0;
    seq.g.resize(dim, p_len);
    for (int p = 0; p < p_len; ++p) seq.g.col(p) = slices[p].row(article).transpose();
    return seq;
}

}  // namespace gdar
