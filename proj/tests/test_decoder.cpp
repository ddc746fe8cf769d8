#include <cmath>

#include "doctest.h"
#include "gdar/decoder.hpp"
#include "gdar/model.hpp"
#include "support.hpp"

using namespace gdar;
using test_support::random_matrix;

namespace {

std::vector<Eigen::VectorXd> random_inputs(int steps, int width, std::uint64_t seed) {
    std::vector<Eigen::VectorXd> inputs;
    for (int s = 0; s < steps; ++s)
        inputs.push_back(random_matrix(width, 1, seed + s).col(0));
    return inputs;
}

}  // namespace

TEST_CASE("decoder_forward: zero weights reduce to the head biases") {
    DecoderConfig config;
    config.hidden = {3, 2};
    config.dropout = 0.0;
    config.context_length = 2;
    config.horizon = 2;
    config.layout = {1, 0, 2, 1};
    auto params = init_decoder(config, 1);
    for (auto& l : params.layers) {
        l.w_input.setZero();
        l.w_recur.setZero();
        l.bias.setZero();
    }
    params.head.weight.setZero();
    params.head.bias << 1.5, -0.3, 0.7;

    auto out = decoder_forward(random_inputs(4, config.layout.width(), 5), 1.0, config, params,
                               false);
    for (const auto& p : out) {
        CHECK(p.mu == doctest::Approx(1.5));
        CHECK(p.scale == doctest::Approx(softplus(-0.3)).epsilon(1e-7));
        CHECK(p.nu == doctest::Approx(2.0 + softplus(0.7)));
    }
}

TEST_CASE("decoder_forward: graph mode with zero embeddings equals the baseline") {
    const int d_emb = 3;
    DecoderConfig graph_cfg;
    graph_cfg.hidden = {4, 4};
    graph_cfg.dropout = 0.0;
    graph_cfg.layout = {1, d_emb, 2, 2};
    auto graph_params = init_decoder(graph_cfg, 7);

    DecoderConfig base_cfg = graph_cfg;
    base_cfg.layout.embedding = 0;
    DecoderParams base_params = graph_params;
    // drop the embedding columns from the first layer's input weight
    const int w = graph_cfg.layout.width();
    Eigen::MatrixXd full = graph_params.layers[0].w_input;
    Eigen::MatrixXd sliced(full.rows(), w - d_emb);
    sliced.col(0) = full.col(0);
    for (int c = 1 + d_emb; c < w; ++c) sliced.col(c - d_emb) = full.col(c);
    base_params.layers[0].w_input = sliced;

    auto base_inputs = random_inputs(5, base_cfg.layout.width(), 9);
    std::vector<Eigen::VectorXd> graph_inputs;
    for (const auto& x : base_inputs) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(w);
        g(0) = x(0);
        g.segment(1 + d_emb, w - 1 - d_emb) = x.segment(1, base_cfg.layout.width() - 1);
        graph_inputs.push_back(std::move(g));
    }

    auto a = decoder_forward(graph_inputs, 2.0, graph_cfg, graph_params, false);
    auto b = decoder_forward(base_inputs, 2.0, base_cfg, base_params, false);
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK(a[s].mu == b[s].mu);
        CHECK(a[s].scale == b[s].scale);
        CHECK(a[s].nu == b[s].nu);
    }
}

TEST_CASE("decoder_forward: single-unit cell matches the hand-rolled recursion") {
    DecoderConfig config;
    config.hidden = {1};
    config.dropout = 0.0;
    config.layout = {1, 0, 0, 0};
    DecoderParams params;
    LstmLayerParams lp;
    lp.w_input.resize(4, 1);
    lp.w_input << 0.5, -0.3, 0.8, 0.1;  // gates [i f g o]
    lp.w_recur.resize(4, 1);
    lp.w_recur << 0.2, 0.4, -0.6, 0.3;
    lp.bias.resize(4);
    lp.bias << 0.05, -0.1, 0.2, 0.0;
    params.layers.push_back(lp);
    params.head.weight.resize(3, 1);
    params.head.weight << 1.7, 0.3, -0.2;
    params.head.bias.resize(3);
    params.head.bias << 0.1, 0.2, 0.3;

    const std::vector<double> xs = {0.9, -0.4};
    std::vector<Eigen::VectorXd> inputs;
    for (double v : xs) inputs.push_back(Eigen::VectorXd::Constant(1, v));
    auto out = decoder_forward(inputs, 1.0, config, params, false);

    double h = 0, c = 0;
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const double i = sig(0.5 * xs[s] + 0.2 * h + 0.05);
        const double f = sig(-0.3 * xs[s] + 0.4 * h - 0.1);
        const double g = std::tanh(0.8 * xs[s] - 0.6 * h + 0.2);
        const double o = sig(0.1 * xs[s] + 0.3 * h + 0.0);
        c = f * c + i * g;
        h = o * std::tanh(c);
        CHECK(out[s].mu == doctest::Approx(1.7 * h + 0.1).epsilon(1e-12));
    }
}

TEST_CASE("decoder_forward: non-finite input rejected naming the channel") {
    DecoderConfig config;
    config.hidden = {2};
    config.layout = {1, 0, 1, 1};
    auto params = init_decoder(config, 3);
    auto inputs = random_inputs(2, 3, 4);
    inputs[1](1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(decoder_forward(inputs, 1.0, config, params, false),
                         doctest::Contains("static"), Error);
}

TEST_CASE("decoder gradients match central finite differences") {
    auto run_check = [](std::vector<int> hidden, double dropout, double w_under, double w_over,
                        double scale, bool fixed_nu, std::uint64_t seed) {
        DecoderConfig config;
        config.hidden = std::move(hidden);
        config.dropout = dropout;
        config.layout = {1, 2, 2, 1};
        if (fixed_nu) config.fixed_nu = 4.0;
        const int steps = 4;
        auto inputs = random_inputs(steps, config.layout.width(), seed);
        std::mt19937_64 target_rng(seed + 50);
        std::vector<double> targets;
        for (int s = 0; s < steps; ++s) targets.push_back(2.0 * unit_double(target_rng()));

        ModelParams wrap;
        wrap.decoder = init_decoder(config, seed + 1);
        const bool training = dropout > 0;
        const std::uint64_t drop_seed = seed + 2;

        auto loss_of = [&](const ModelParams& p) {
            auto out = decoder_forward(inputs, scale, config, p.decoder, training, drop_seed);
            double acc = 0;
            for (int s = 0; s < steps; ++s)
                acc += asymmetric_t_nll(out[s], targets[s], w_under, w_over);
            return acc / steps;
        };

        DecoderCache cache;
        auto out = decoder_forward(inputs, scale, config, wrap.decoder, training, drop_seed,
                                   &cache);
        std::vector<TNllGrad> step_grads(steps);
        for (int s = 0; s < steps; ++s) {
            const double w = asymmetric_weight(out[s], targets[s], w_under, w_over);
            TNllGrad g = t_nll_grad(out[s], targets[s]);
            step_grads[s] = {g.d_mu * w / steps, g.d_scale * w / steps, g.d_nu * w / steps};
        }
        ModelParams grads;
        grads.decoder = zero_like(wrap.decoder);
        decoder_backward(step_grads, cache, config, wrap.decoder, grads.decoder);

        auto flat = flatten_params(wrap);
        auto analytic = flatten_params(grads);
        const double h = 1e-6;
        double diff2 = 0, num2 = 0;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            auto probe = flat;
            probe[i] = flat[i] + h;
            unflatten_params(probe, wrap);
            const double up = loss_of(wrap);
            probe[i] = flat[i] - h;
            unflatten_params(probe, wrap);
            const double down = loss_of(wrap);
            const double fd = (up - down) / (2 * h);
            diff2 += (fd - analytic[i]) * (fd - analytic[i]);
            num2 += fd * fd + analytic[i] * analytic[i];
        }
        unflatten_params(flat, wrap);
        const double rel = std::sqrt(diff2) / std::max(1e-12, std::sqrt(num2));
        CHECK(rel < 1e-4);
    };

    run_check({3}, 0.0, 1.0, 1.0, 1.0, false, 1000);
    run_check({3, 2}, 0.0, 1.0, 1.0, 2.5, false, 2000);
    run_check({2, 2}, 0.3, 1.0, 1.0, 1.0, false, 3000);
    run_check({3}, 0.0, 2.0, 0.5, 1.5, false, 4000);
    run_check({2, 3}, 0.0, 1.0, 1.0, 1.0, true, 5000);
}

TEST_CASE("forecast_quantiles: constants, bounds, monotonicity") {
    SUBCASE("constant paths give constant quantiles") {
        Eigen::MatrixXd paths = Eigen::MatrixXd::Constant(40, 3, 7.0);
        auto q = forecast_quantiles(paths, {0.1, 0.5, 0.9});
        CHECK((q.array() == 7.0).all());
    }
    SUBCASE("two-path step keeps the median inside the range") {
        Eigen::MatrixXd paths(2, 1);
        paths << 0, 10;
        auto q = forecast_quantiles(paths, {0.25, 0.5, 0.75});
        CHECK(q(0, 0) <= q(0, 1));
        CHECK(q(0, 1) <= q(0, 2));
        CHECK(q(0, 1) >= 0.0);
        CHECK(q(0, 1) <= 10.0);
    }
    SUBCASE("random paths are monotone in q at every step") {
        Eigen::MatrixXd paths = random_matrix(200, 5, 99, 0.0, 30.0);
        std::vector<double> qs = {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95};
        auto q = forecast_quantiles(paths, qs);
        for (int step = 0; step < 5; ++step)
            for (std::size_t i = 1; i < qs.size(); ++i)
                CHECK(q(step, static_cast<int>(i)) >= q(step, static_cast<int>(i - 1)));
    }
    SUBCASE("rejections") {
        CHECK_THROWS_AS(forecast_quantiles(Eigen::MatrixXd(0, 2), {0.5}), Error);
        CHECK_THROWS_AS(forecast_quantiles(Eigen::MatrixXd::Zero(3, 2), {1.5}), Error);
    }
}
