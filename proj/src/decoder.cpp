#include "gdar/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gdar/common.hpp"

namespace gdar {

namespace {
constexpr double kScaleFloor = 1e-8;

const char* channel_name(const InputLayout& layout, int idx) {
    if (idx < layout.lag) return "lag";
    if (idx < layout.lag + layout.embedding) return "embedding";
    if (idx < layout.lag + layout.embedding + layout.statics) return "static";
    return "dynamic";
}
}  // namespace

DecoderParams init_decoder(const DecoderConfig& config, std::uint64_t seed) {
    DecoderParams p;
    int in_dim = config.layout.width();
    for (int l = 0; l < config.n_layers(); ++l) {
        const int h = config.hidden[l];
        const double r = 1.0 / std::sqrt(static_cast<double>(h));
        std::mt19937_64 rng(derive_seed(seed, "dec_l", l));
        auto uniform = [&]() { return r * (2.0 * unit_double(rng()) - 1.0); };
        LstmLayerParams lp;
        lp.w_input.resize(4 * h, in_dim);
        lp.w_recur.resize(4 * h, h);
        lp.bias = Eigen::VectorXd::Zero(4 * h);
        for (int a = 0; a < 4 * h; ++a)
            for (int b = 0; b < in_dim; ++b) lp.w_input(a, b) = uniform();
        for (int a = 0; a < 4 * h; ++a)
            for (int b = 0; b < h; ++b) lp.w_recur(a, b) = uniform();
        p.layers.push_back(std::move(lp));
        in_dim = h;
    }
    const int h_top = config.hidden.back();
    const double bound = std::sqrt(6.0 / static_cast<double>(h_top + 3));
    std::mt19937_64 rng(derive_seed(seed, "dec_head"));
    p.head.weight.resize(3, h_top);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < h_top; ++b) p.head.weight(a, b) = bound * (2.0 * unit_double(rng()) - 1.0);
    p.head.bias = Eigen::VectorXd::Zero(3);
    return p;
}

DecoderParams zero_like(const DecoderParams& params) {
    DecoderParams g;
    for (const auto& l : params.layers) {
        LstmLayerParams z;
        z.w_input = Eigen::MatrixXd::Zero(l.w_input.rows(), l.w_input.cols());
        z.w_recur = Eigen::MatrixXd::Zero(l.w_recur.rows(), l.w_recur.cols());
        z.bias = Eigen::VectorXd::Zero(l.bias.size());
        g.layers.push_back(std::move(z));
    }
    g.head.weight = Eigen::MatrixXd::Zero(params.head.weight.rows(), params.head.weight.cols());
    g.head.bias = Eigen::VectorXd::Zero(params.head.bias.size());
    return g;
}

long decoder_param_count(const DecoderConfig& config) {
    long count = 0;
    int in_dim = config.layout.width();
    for (int l = 0; l < config.n_layers(); ++l) {
        const int h = config.hidden[l];
        count += 4L * h * in_dim + 4L * h * h + 4L * h;
        in_dim = h;
    }
    count += 3L * config.hidden.back() + 3;
    return count;
}

namespace {

void cell_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                  const Eigen::VectorXd& c_prev, const LstmLayerParams& lp,
                  Eigen::VectorXd& h_out, Eigen::VectorXd& c_out, DecoderCache::Cell* cell) {
    const int h = static_cast<int>(h_prev.size());
    Eigen::VectorXd a = lp.w_input * x + lp.w_recur * h_prev + lp.bias;
    Eigen::VectorXd gi(h), gf(h), gg(h), go(h);
    for (int u = 0; u < h; ++u) {
        gi(u) = sigmoid(a(u));
        gf(u) = sigmoid(a(h + u));
        gg(u) = std::tanh(a(2 * h + u));
        go(u) = sigmoid(a(3 * h + u));
    }
    c_out = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
    Eigen::VectorXd hc = c_out.array().tanh();
    h_out = go.cwiseProduct(hc);
    if (cell) {
        cell->x = x;
        cell->h_prev = h_prev;
        cell->c_prev = c_prev;
        cell->i = std::move(gi);
        cell->f = std::move(gf);
        cell->g = std::move(gg);
        cell->o = std::move(go);
        cell->c = c_out;
        cell->hc = std::move(hc);
    }
}

TStudentParams transform_head(const Eigen::VectorXd& raw, const DecoderConfig& config,
                              double scale) {
    TStudentParams p;
    p.mu = scale * raw(0);
    p.scale = scale * (softplus(raw(1)) + kScaleFloor);
    p.nu = config.fixed_nu ? *config.fixed_nu : 2.0 + softplus(raw(2));
    return p;
}

}  // namespace

std::vector<TStudentParams> decoder_forward(const std::vector<Eigen::VectorXd>& inputs,
                                            double scale, const DecoderConfig& config,
                                            const DecoderParams& params, bool training,
                                            std::uint64_t dropout_seed, DecoderCache* cache) {
    const int n_layers = config.n_layers();
    const int steps = static_cast<int>(inputs.size());
    require(steps >= 1, "decoder needs at least one step");
    require(static_cast<int>(params.layers.size()) == n_layers, "decoder params/config mismatch");
    for (int t = 0; t < steps; ++t) {
        require(inputs[t].size() == config.layout.width(), "decoder input width mismatch at step " +
                                                               std::to_string(t));
        for (int c = 0; c < inputs[t].size(); ++c)
            require(std::isfinite(inputs[t](c)),
                    std::string("non-finite decoder input in channel '") +
                        channel_name(config.layout, c) + "' at step " + std::to_string(t));
    }

    if (cache) {
        cache->cells.assign(n_layers, std::vector<DecoderCache::Cell>(steps));
        cache->head_raw.resize(steps);
        cache->h_top.resize(steps);
        cache->scale = scale;
    }

    std::vector<Eigen::VectorXd> h(n_layers), c(n_layers);
    for (int l = 0; l < n_layers; ++l) {
        h[l] = Eigen::VectorXd::Zero(config.hidden[l]);
        c[l] = Eigen::VectorXd::Zero(config.hidden[l]);
    }

    std::vector<TStudentParams> out(steps);
    for (int t = 0; t < steps; ++t) {
        Eigen::VectorXd x = inputs[t];
        for (int l = 0; l < n_layers; ++l) {
            Eigen::VectorXd h_new, c_new;
            cell_forward(x, h[l], c[l], params.layers[l],
                         h_new, c_new, cache ? &cache->cells[l][t] : nullptr);
            h[l] = std::move(h_new);
            c[l] = std::move(c_new);
            x = h[l];
            // interlayer dropout, torch convention: not after the top layer
            if (training && config.dropout > 0.0 && l + 1 < n_layers) {
                std::mt19937_64 rng(derive_seed(dropout_seed, "dec_drop", l, t));
                const double keep = 1.0 - config.dropout;
                Eigen::ArrayXd mask(x.size());
                for (int u = 0; u < x.size(); ++u)
                    mask(u) = unit_double(rng()) < keep ? 1.0 / keep : 0.0;
                x.array() *= mask;
                if (cache) cache->cells[l][t].drop_mask = std::move(mask);
            }
        }
        Eigen::VectorXd raw = params.head.weight * x + params.head.bias;
        out[t] = transform_head(raw, config, scale);
        if (cache) {
            cache->head_raw[t] = std::move(raw);
            cache->h_top[t] = x;
        }
    }
    return out;
}

void decoder_backward(const std::vector<TNllGrad>& step_grads, const DecoderCache& cache,
                      const DecoderConfig& config, const DecoderParams& params,
                      DecoderParams& grads, std::vector<Eigen::VectorXd>* grad_inputs) {
    const int n_layers = config.n_layers();
    const int steps = static_cast<int>(cache.head_raw.size());
    require(static_cast<int>(step_grads.size()) == steps, "step gradient count mismatch");
    if (grad_inputs) grad_inputs->assign(steps, Eigen::VectorXd());

    std::vector<Eigen::VectorXd> dh_next(n_layers), dc_next(n_layers);
    for (int l = 0; l < n_layers; ++l) {
        dh_next[l] = Eigen::VectorXd::Zero(config.hidden[l]);
        dc_next[l] = Eigen::VectorXd::Zero(config.hidden[l]);
    }

    for (int t = steps - 1; t >= 0; --t) {
        // loss grad on transformed params -> raw head outputs
        const Eigen::VectorXd& raw = cache.head_raw[t];
        Eigen::VectorXd d_raw(3);
        d_raw(0) = step_grads[t].d_mu * cache.scale;
        d_raw(1) = step_grads[t].d_scale * cache.scale * sigmoid(raw(1));
        d_raw(2) = config.fixed_nu ? 0.0 : step_grads[t].d_nu * sigmoid(raw(2));

        grads.head.weight.noalias() += d_raw * cache.h_top[t].transpose();
        grads.head.bias += d_raw;
        Eigen::VectorXd d_from_above = params.head.weight.transpose() * d_raw;

        for (int l = n_layers - 1; l >= 0; --l) {
            const auto& cell = cache.cells[l][t];
            // the layer output fed upward went through dropout (except top)
            if (cell.drop_mask.size()) d_from_above.array() *= cell.drop_mask;
            Eigen::VectorXd dh = d_from_above + dh_next[l];

            Eigen::VectorXd d_o = dh.cwiseProduct(cell.hc);
            Eigen::VectorXd dc =
                dc_next[l] +
                dh.cwiseProduct(cell.o)
                    .cwiseProduct((1.0 - cell.hc.array().square()).matrix());
            Eigen::VectorXd d_i = dc.cwiseProduct(cell.g);
            Eigen::VectorXd d_g = dc.cwiseProduct(cell.i);
            Eigen::VectorXd d_f = dc.cwiseProduct(cell.c_prev);
            dc_next[l] = dc.cwiseProduct(cell.f);

            const int h = static_cast<int>(cell.i.size());
            Eigen::VectorXd da(4 * h);
            for (int u = 0; u < h; ++u) {
                da(u) = d_i(u) * cell.i(u) * (1.0 - cell.i(u));
                da(h + u) = d_f(u) * cell.f(u) * (1.0 - cell.f(u));
                da(2 * h + u) = d_g(u) * (1.0 - cell.g(u) * cell.g(u));
                da(3 * h + u) = d_o(u) * cell.o(u) * (1.0 - cell.o(u));
            }

            grads.layers[l].w_input.noalias() += da * cell.x.transpose();
            grads.layers[l].w_recur.noalias() += da * cell.h_prev.transpose();
            grads.layers[l].bias += da;
            dh_next[l] = params.layers[l].w_recur.transpose() * da;
            d_from_above = params.layers[l].w_input.transpose() * da;
        }
        if (grad_inputs) (*grad_inputs)[t] = d_from_above;
    }
}

LstmState init_state(const DecoderConfig& config) {
    LstmState s;
    for (int h : config.hidden) {
        s.h.push_back(Eigen::VectorXd::Zero(h));
        s.c.push_back(Eigen::VectorXd::Zero(h));
    }
    return s;
}

Eigen::VectorXd lstm_step(const Eigen::VectorXd& x, const DecoderConfig& config,
                          const DecoderParams& params, LstmState& state) {
    Eigen::VectorXd cur = x;
    for (int l = 0; l < config.n_layers(); ++l) {
        Eigen::VectorXd h_new, c_new;
        cell_forward(cur, state.h[l], state.c[l], params.layers[l], h_new, c_new, nullptr);
        state.h[l] = std::move(h_new);
        state.c[l] = std::move(c_new);
        cur = state.h[l];
    }
    return cur;
}

TStudentParams head_output(const Eigen::VectorXd& h_top, const DecoderConfig& config,
                           const DecoderParams& params, double scale) {
    Eigen::VectorXd raw = params.head.weight * h_top + params.head.bias;
    return transform_head(raw, config, scale);
}

Eigen::MatrixXd forecast_quantiles(const Eigen::MatrixXd& paths, const std::vector<double>& qs) {
    require(paths.rows() >= 1, "no sample paths");
    for (double q : qs) require(q > 0.0 && q < 1.0, "quantile levels must lie in (0,1)");
    const int k = static_cast<int>(paths.cols());
    const int n = static_cast<int>(paths.rows());
    Eigen::MatrixXd out(k, static_cast<int>(qs.size()));
    std::vector<double> col(n);
    for (int step = 0; step < k; ++step) {
        for (int r = 0; r < n; ++r) col[r] = paths(r, step);
        std::sort(col.begin(), col.end());
        for (std::size_t qi = 0; qi < qs.size(); ++qi) {
            const double pos = qs[qi] * (n - 1);
            const int lo = static_cast<int>(pos);
            const double frac = pos - lo;
            out(step, static_cast<int>(qi)) =
                lo + 1 < n ? col[lo] * (1.0 - frac) + col[lo + 1] * frac : col[lo];
        }
    }
    return out;
}

}  // namespace gdar
