#include "gdar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gdar/common.hpp"
#include "gdar/csv.hpp"
#include "json.hpp"

namespace gdar {

namespace {

template <class T>
void shuffle_inplace(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t k = v.size(); k > 1; --k)
        std::swap(v[k - 1], v[bounded(rng, k)]);
}

}  // namespace

std::vector<std::vector<Window>> synchronized_batches(const WindowSet& windows, int batch_size,
                                                      std::uint64_t seed) {
    require(batch_size >= 1, "batch_size must be >= 1");
    std::map<int, std::vector<Window>> groups;
    for (const auto& w : windows.entries) groups[w.anchor].push_back(w);

    std::vector<int> anchors;
    for (const auto& [anchor, group] : groups) anchors.push_back(anchor);
    std::mt19937_64 rng(derive_seed(seed, "sync"));
    shuffle_inplace(anchors, rng);

    std::vector<std::vector<Window>> batches;
    for (int anchor : anchors) {
        auto& group = groups[anchor];
        shuffle_inplace(group, rng);
        for (std::size_t at = 0; at < group.size(); at += batch_size) {
            std::size_t end = std::min(group.size(), at + batch_size);
            batches.emplace_back(group.begin() + at, group.begin() + end);
        }
    }
    return batches;
}

std::vector<std::vector<Window>> random_batches(const WindowSet& windows, int batch_size,
                                                std::uint64_t seed) {
    require(batch_size >= 1, "batch_size must be >= 1");
    std::vector<Window> all = windows.entries;
    std::mt19937_64 rng(derive_seed(seed, "rand"));
    shuffle_inplace(all, rng);
    std::vector<std::vector<Window>> batches;
    for (std::size_t at = 0; at < all.size(); at += batch_size) {
        std::size_t end = std::min(all.size(), at + batch_size);
        batches.emplace_back(all.begin() + at, all.begin() + end);
    }
    return batches;
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

namespace {

class AdamOptimizer final : public Optimizer {
public:
    explicit AdamOptimizer(double lr) : lr_(lr) {}

    void step(std::vector<double>& params, const std::vector<double>& grads) override {
        if (m_.empty()) {
            m_.assign(params.size(), 0.0);
            v_.assign(params.size(), 0.0);
        }
        require(params.size() == grads.size() && params.size() == m_.size(),
                "optimizer size mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
            params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        }
    }

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<double> m_, v_;
};

class SgdOptimizer final : public Optimizer {
public:
    explicit SgdOptimizer(double lr) : lr_(lr) {}
    void step(std::vector<double>& params, const std::vector<double>& grads) override {
        require(params.size() == grads.size(), "optimizer size mismatch");
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
    }

private:
    double lr_;
};

std::map<std::string, std::function<std::unique_ptr<Optimizer>(double)>>& optimizer_registry() {
    static std::map<std::string, std::function<std::unique_ptr<Optimizer>(double)>> reg = {
        {"adam", [](double lr) { return std::make_unique<AdamOptimizer>(lr); }},
        {"sgd", [](double lr) { return std::make_unique<SgdOptimizer>(lr); }},
    };
    return reg;
}

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double learning_rate) {
    auto& reg = optimizer_registry();
    auto it = reg.find(name);
    require(it != reg.end(), "unknown optimizer '" + name + "'");
    return it->second(learning_rate);
}

void register_optimizer(const std::string& name,
                        std::function<std::unique_ptr<Optimizer>(double)> factory) {
    optimizer_registry()[name] = std::move(factory);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

double evaluate_loss(const PanelDataset& panel, const WindowSet& windows,
                     const SimilarityGraph* graph, const NeighborhoodView* view,
                     const ModelConfig& mc, const ModelParams& params, const TrainConfig& tc,
                     AccessMonitor* monitor) {
    if (windows.entries.empty()) return 0.0;
    // group by anchor so graph mode reuses one encoder pass per group
    std::map<int, std::vector<Window>> groups;
    for (const auto& w : windows.entries) groups[w.anchor].push_back(w);
    double loss_sum = 0;
    long terms = 0;
    const int steps = mc.decoder.context_length + mc.decoder.horizon;
    for (const auto& [anchor, group] : groups) {
        if (monitor) {
            monitor->graph_limit = anchor;
            monitor->decoder_limit = anchor + mc.decoder.horizon;
        }
        LossOptions opts;
        opts.w_under = tc.w_under;
        opts.w_over = tc.w_over;
        opts.training = false;
        opts.monitor = monitor;
        double mean = batch_loss(panel, group, graph, view, mc, params, opts, nullptr);
        loss_sum += mean * static_cast<double>(group.size() * steps);
        terms += static_cast<long>(group.size()) * steps;
    }
    return loss_sum / static_cast<double>(terms);
}

}  // namespace

Checkpoint train(const PanelDataset& panel, const SplitRanges& ranges,
                 const SimilarityGraph* graph, ModelConfig model_config,
                 const TrainConfig& train_config, const std::string& config_snapshot,
                 AccessMonitor* monitor) {
    const auto t_start = std::chrono::steady_clock::now();
    require(train_config.patience >= 1 && train_config.patience <= train_config.max_epochs,
            "patience must lie in [1, max_epochs]");
    require(train_config.max_epochs >= 1, "max_epochs must be >= 1");
    if (model_config.graph_mode) {
        require(graph != nullptr, "graph mode requires a graph");
        require(train_config.batch_mode == BatchMode::synchronized,
                "graph mode requires synchronized batching");
    }
#ifdef _OPENMP
    if (train_config.threads > 0) omp_set_num_threads(train_config.threads);
#endif
    finalize_model_config(model_config, panel);

    const int p_len = model_config.decoder.context_length;
    const int k_len = model_config.decoder.horizon;
    WindowSet train_windows = make_windows(panel, p_len, k_len, 1, ranges.train_end - k_len);
    WindowSet val_windows =
        make_windows(panel, p_len, k_len, ranges.train_end, ranges.val_end - k_len);
    require(!train_windows.entries.empty(), "no training windows available");

    ModelParams params = init_model(model_config, derive_seed(train_config.seed, "init"));
    auto optimizer = make_optimizer(train_config.optimizer, train_config.learning_rate);

    Checkpoint best;
    best.model_config = model_config;
    best.schema_hash = panel.schema_hash;
    best.config_snapshot = config_snapshot;

    EarlyStopper stopper(train_config.patience);
    const int steps = p_len + k_len;

    for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
        NeighborhoodView sampled, full;
        const NeighborhoodView* train_view = nullptr;
        const NeighborhoodView* eval_view = nullptr;
        if (model_config.graph_mode) {
            sampled = sample_neighborhood(*graph, train_config.max_neighbors,
                                          derive_seed(train_config.seed, "resample", epoch));
            full = NeighborhoodView::full(*graph);
            train_view = &sampled;
            eval_view = &full;
        }

        auto batches = train_config.batch_mode == BatchMode::synchronized
                           ? synchronized_batches(train_windows, train_config.batch_size,
                                                  derive_seed(train_config.seed, "epoch", epoch))
                           : random_batches(train_windows, train_config.batch_size,
                                            derive_seed(train_config.seed, "epoch", epoch));

        double loss_sum = 0;
        long terms = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            if (monitor) {
                monitor->graph_limit = batches[b][0].anchor;
                monitor->decoder_limit = batches[b][0].anchor + k_len;
            }
            LossOptions opts;
            opts.w_under = train_config.w_under;
            opts.w_over = train_config.w_over;
            opts.training = true;
            opts.dropout_seed = derive_seed(train_config.seed, "dropout", epoch, b);
            opts.monitor = monitor;

            ModelParams grads = zero_grads(model_config, params);
            double mean;
            try {
                mean = batch_loss(panel, batches[b],
                                  model_config.graph_mode ? graph : nullptr, train_view,
                                  model_config, params, opts, &grads);
            } catch (const Error& e) {
                fail("training diverged at epoch " + std::to_string(epoch) + " batch " +
                     std::to_string(b) + ": " + e.what());
            }
            loss_sum += mean * static_cast<double>(batches[b].size() * steps);
            terms += static_cast<long>(batches[b].size()) * steps;

            std::vector<double> flat_g = flatten_params(grads);
            if (train_config.grad_clip > 0) {
                double norm2 = 0;
                for (double v : flat_g) norm2 += v * v;
                const double norm = std::sqrt(norm2);
                if (norm > train_config.grad_clip) {
                    const double s = train_config.grad_clip / norm;
                    for (double& v : flat_g) v *= s;
                }
            }
            std::vector<double> flat_p = flatten_params(params);
            optimizer->step(flat_p, flat_g);
            unflatten_params(flat_p, params);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(terms);
        stats.val_loss = evaluate_loss(panel, val_windows, model_config.graph_mode ? graph : nullptr,
                                       eval_view, model_config, params, train_config, monitor);
        best.history.push_back(stats);

        // train loss stands in when there is no validation range
        const bool stop =
            stopper.observe(val_windows.entries.empty() ? stats.train_loss : stats.val_loss);
        if (stopper.improved()) {
            best.best_epoch = epoch;
            best.params = params;
        }
        if (stop) break;
    }

    best.train_minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                             .count() /
                         60.0;
    return best;
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd mat_from_json(const json& j) {
    const auto rows = j.size();
    const auto cols = rows ? j[0].size() : 0;
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vec_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

json model_config_to_json(const ModelConfig& mc) {
    json j;
    j["graph_mode"] = mc.graph_mode;
    j["node_lag_depth"] = mc.node_lag_depth;
    if (mc.graph_mode)
        j["encoder"] = {{"input_dim", mc.encoder.input_dim},
                        {"layer_sizes", mc.encoder.layer_sizes},
                        {"leaky_slope", mc.encoder.leaky_slope},
                        {"dropout", mc.encoder.dropout},
                        {"use_bias", mc.encoder.use_bias}};
    j["decoder"] = {{"hidden", mc.decoder.hidden},
                    {"dropout", mc.decoder.dropout},
                    {"context_length", mc.decoder.context_length},
                    {"horizon", mc.decoder.horizon},
                    {"layout",
                     {{"lag", mc.decoder.layout.lag},
                      {"embedding", mc.decoder.layout.embedding},
                      {"statics", mc.decoder.layout.statics},
                      {"dynamics", mc.decoder.layout.dynamics}}}};
    if (mc.decoder.fixed_nu) j["decoder"]["fixed_nu"] = *mc.decoder.fixed_nu;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig mc;
    mc.graph_mode = j.at("graph_mode").get<bool>();
    mc.node_lag_depth = j.at("node_lag_depth").get<int>();
    if (mc.graph_mode) {
        const auto& e = j.at("encoder");
        mc.encoder.input_dim = e.at("input_dim").get<int>();
        mc.encoder.layer_sizes = e.at("layer_sizes").get<std::vector<int>>();
        mc.encoder.leaky_slope = e.at("leaky_slope").get<double>();
        mc.encoder.dropout = e.at("dropout").get<double>();
        mc.encoder.use_bias = e.at("use_bias").get<bool>();
    }
    const auto& d = j.at("decoder");
    mc.decoder.hidden = d.at("hidden").get<std::vector<int>>();
    mc.decoder.dropout = d.at("dropout").get<double>();
    mc.decoder.context_length = d.at("context_length").get<int>();
    mc.decoder.horizon = d.at("horizon").get<int>();
    const auto& lay = d.at("layout");
    mc.decoder.layout.lag = lay.at("lag").get<int>();
    mc.decoder.layout.embedding = lay.at("embedding").get<int>();
    mc.decoder.layout.statics = lay.at("statics").get<int>();
    mc.decoder.layout.dynamics = lay.at("dynamics").get<int>();
    if (d.contains("fixed_nu")) mc.decoder.fixed_nu = d.at("fixed_nu").get<double>();
    return mc;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    json j;
    j["format"] = "gdar-checkpoint/1";
    j["schema_hash"] = ckpt.schema_hash;
    j["config_snapshot"] = ckpt.config_snapshot;
    j["model_config"] = model_config_to_json(ckpt.model_config);
    j["best_epoch"] = ckpt.best_epoch;
    j["train_minutes"] = ckpt.train_minutes;
    json hist = json::array();
    for (const auto& h : ckpt.history) hist.push_back({h.epoch, h.train_loss, h.val_loss});
    j["history"] = std::move(hist);

    json params;
    if (ckpt.params.encoder) {
        json enc;
        enc["weights"] = json::array();
        enc["biases"] = json::array();
        for (const auto& w : ckpt.params.encoder->weights) enc["weights"].push_back(mat_to_json(w));
        for (const auto& b : ckpt.params.encoder->biases) enc["biases"].push_back(vec_to_json(b));
        params["encoder"] = std::move(enc);
    }
    json dec;
    dec["layers"] = json::array();
    for (const auto& l : ckpt.params.decoder.layers)
        dec["layers"].push_back({{"w_input", mat_to_json(l.w_input)},
                                 {"w_recur", mat_to_json(l.w_recur)},
                                 {"bias", vec_to_json(l.bias)}});
    dec["head"] = {{"weight", mat_to_json(ckpt.params.decoder.head.weight)},
                   {"bias", vec_to_json(ckpt.params.decoder.head.bias)}};
    params["decoder"] = std::move(dec);
    j["params"] = std::move(params);

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), "cannot write checkpoint: " + path.string());
    out << j.dump() << "\n";
    require(out.good(), "checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open checkpoint: " + path.string());
    json j = json::parse(in);
    require(j.value("format", "") == "gdar-checkpoint/1",
            "unrecognized checkpoint format in " + path.string());

    Checkpoint ckpt;
    ckpt.schema_hash = j.at("schema_hash").get<std::string>();
    ckpt.config_snapshot = j.at("config_snapshot").get<std::string>();
    ckpt.model_config = model_config_from_json(j.at("model_config"));
    ckpt.best_epoch = j.at("best_epoch").get<int>();
    ckpt.train_minutes = j.at("train_minutes").get<double>();
    for (const auto& h : j.at("history"))
        ckpt.history.push_back({h[0].get<int>(), h[1].get<double>(), h[2].get<double>()});

    const auto& params = j.at("params");
    if (params.contains("encoder")) {
        EncoderParams enc;
        for (const auto& w : params["encoder"]["weights"]) enc.weights.push_back(mat_from_json(w));
        for (const auto& b : params["encoder"]["biases"]) enc.biases.push_back(vec_from_json(b));
        ckpt.params.encoder = std::move(enc);
    }
    const auto& dec = params.at("decoder");
    for (const auto& l : dec.at("layers")) {
        LstmLayerParams lp;
        lp.w_input = mat_from_json(l.at("w_input"));
        lp.w_recur = mat_from_json(l.at("w_recur"));
        lp.bias = vec_from_json(l.at("bias"));
        ckpt.params.decoder.layers.push_back(std::move(lp));
    }
    ckpt.params.decoder.head.weight = mat_from_json(dec.at("head").at("weight"));
    ckpt.params.decoder.head.bias = vec_from_json(dec.at("head").at("bias"));
    return ckpt;
}

void write_history(const std::filesystem::path& path, const std::vector<EpochStats>& history,
                   const std::map<std::string, std::string>& meta) {
    Table t;
    t.meta = meta;
    t.header = {"epoch", "train_loss", "val_loss"};
    for (const auto& h : history)
        t.rows.push_back({std::to_string(h.epoch), format_double(h.train_loss, "%.9g"),
                          format_double(h.val_loss, "%.9g")});
    write_table(path, t);
}

}  // namespace gdar
