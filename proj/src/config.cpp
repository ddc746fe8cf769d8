#include "gdar/config.hpp"

#include <fstream>

#include "gdar/common.hpp"

namespace gdar {

using nlohmann::json;

json default_config() {
    return json{
        {"dataset",
         {{"name", "dataset"},
          {"demand_file", ""},
          {"static_file", ""},
          {"schema", json::array()},
          {"min_demand_std", nullptr}}},
        {"split", {{"test_weeks", 26}, {"val_weeks", 13}}},
        {"graph",
         {{"enabled", false},
          {"threshold", 0.95},
          {"max_neighbors", 10},
          {"node_lag_depth", 1},
          {"chunk_size", 64}}},
        {"encoder",
         {{"layer_sizes", {16, 8}},
          {"dropout", 0.2},
          {"leaky_slope", 0.01},
          {"use_bias", false}}},
        {"decoder",
         {{"hidden", {128, 128}},
          {"dropout", 0.2},
          {"context_length", 10},
          {"horizon", 5},
          {"fixed_nu", nullptr}}},
        {"train",
         {{"max_epochs", 50},
          {"patience", 5},
          {"learning_rate", 5e-3},
          {"batch_size", 64},
          {"batch_mode", "auto"},
          {"optimizer", "adam"},
          {"grad_clip", 10.0},
          {"seed", 1},
          {"w_under", 1.0},
          {"w_over", 1.0},
          {"threads", 0}}},
        {"forecast",
         {{"n_samples", 100}, {"quantiles", {0.1, 0.5, 0.9}}, {"seed", 1}, {"point", "mean"}}},
        {"evaluate",
         {{"top_n", 100},
          {"min_history", 5},
          {"cost_under", nullptr},
          {"cost_over", nullptr},
          {"baseline", ""}}},
        {"synth",
         {{"n_articles", 60},
          {"n_clusters", 12},
          {"t_len", 80},
          {"noise_sd", 0.35},
          {"seed", 7}}},
    };
}

namespace {

void deep_merge(json& base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
            deep_merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

void apply_override(json& doc, const std::string& spec) {
    auto eq = spec.find('=');
    require(eq != std::string::npos, "override must look like section.key=value: " + spec,
            Errc::usage);
    std::string path = spec.substr(0, eq);
    std::string value = spec.substr(eq + 1);
    json* node = &doc;
    std::size_t at = 0;
    while (true) {
        auto dot = path.find('.', at);
        std::string key = path.substr(at, dot == std::string::npos ? dot : dot - at);
        require(!key.empty(), "bad override path: " + spec, Errc::usage);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        at = dot + 1;
    }
}

}  // namespace

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides) {
    RunConfig cfg;
    cfg.doc = default_config();
    if (file) {
        std::ifstream in(*file);
        require(in.good(), "cannot open config: " + file->string());
        json parsed = json::parse(in, nullptr, false);
        require(!parsed.is_discarded(), "config is not valid JSON: " + file->string());
        deep_merge(cfg.doc, parsed);
    }
    for (const auto& o : overrides) apply_override(cfg.doc, o);
    return cfg;
}

std::string RunConfig::dataset_name() const { return doc["dataset"]["name"].get<std::string>(); }
std::filesystem::path RunConfig::demand_file() const {
    return doc["dataset"]["demand_file"].get<std::string>();
}
std::filesystem::path RunConfig::static_file() const {
    return doc["dataset"]["static_file"].get<std::string>();
}

std::vector<AttributeSpec> RunConfig::schema() const {
    std::vector<AttributeSpec> out;
    for (const auto& a : doc["dataset"]["schema"]) {
        AttributeSpec spec;
        spec.name = a.at("name").get<std::string>();
        const std::string kind = a.at("kind").get<std::string>();
        require(kind == "categorical" || kind == "numeric",
                "schema kind must be categorical or numeric: " + spec.name);
        spec.kind = kind == "categorical" ? AttributeKind::categorical : AttributeKind::numeric;
        if (a.contains("vocab")) spec.vocab = a.at("vocab").get<std::vector<std::string>>();
        out.push_back(std::move(spec));
    }
    return out;
}

LoadOptions RunConfig::load_options() const {
    LoadOptions o;
    o.horizon_extension = doc["decoder"]["horizon"].get<int>();
    if (!doc["dataset"]["min_demand_std"].is_null())
        o.min_demand_std = doc["dataset"]["min_demand_std"].get<double>();
    return o;
}

SplitSpec RunConfig::split_spec() const {
    return {doc["split"]["test_weeks"].get<int>(), doc["split"]["val_weeks"].get<int>()};
}

bool RunConfig::graph_enabled() const { return doc["graph"]["enabled"].get<bool>(); }
double RunConfig::graph_threshold() const { return doc["graph"]["threshold"].get<double>(); }
int RunConfig::graph_chunk_size() const { return doc["graph"]["chunk_size"].get<int>(); }

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.graph_mode = graph_enabled();
    mc.node_lag_depth = doc["graph"]["node_lag_depth"].get<int>();
    mc.encoder.layer_sizes = doc["encoder"]["layer_sizes"].get<std::vector<int>>();
    mc.encoder.dropout = doc["encoder"]["dropout"].get<double>();
    mc.encoder.leaky_slope = doc["encoder"]["leaky_slope"].get<double>();
    mc.encoder.use_bias = doc["encoder"]["use_bias"].get<bool>();
    mc.decoder.hidden = doc["decoder"]["hidden"].get<std::vector<int>>();
    mc.decoder.dropout = doc["decoder"]["dropout"].get<double>();
    mc.decoder.context_length = doc["decoder"]["context_length"].get<int>();
    mc.decoder.horizon = doc["decoder"]["horizon"].get<int>();
    if (!doc["decoder"]["fixed_nu"].is_null())
        mc.decoder.fixed_nu = doc["decoder"]["fixed_nu"].get<double>();
    return mc;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig tc;
    tc.max_epochs = doc["train"]["max_epochs"].get<int>();
    tc.patience = doc["train"]["patience"].get<int>();
    tc.learning_rate = doc["train"]["learning_rate"].get<double>();
    tc.batch_size = doc["train"]["batch_size"].get<int>();
    const std::string mode = doc["train"]["batch_mode"].get<std::string>();
    if (mode == "auto")
        tc.batch_mode = graph_enabled() ? BatchMode::synchronized : BatchMode::random;
    else if (mode == "synchronized")
        tc.batch_mode = BatchMode::synchronized;
    else if (mode == "random")
        tc.batch_mode = BatchMode::random;
    else
        fail("train.batch_mode must be auto, random or synchronized");
    tc.optimizer = doc["train"]["optimizer"].get<std::string>();
    tc.grad_clip = doc["train"]["grad_clip"].get<double>();
    tc.seed = doc["train"]["seed"].get<std::uint64_t>();
    tc.w_under = doc["train"]["w_under"].get<double>();
    tc.w_over = doc["train"]["w_over"].get<double>();
    tc.max_neighbors = doc["graph"]["max_neighbors"].get<int>();
    tc.threads = doc["train"]["threads"].get<int>();
    return tc;
}

SynthSpec RunConfig::synth_spec() const {
    SynthSpec s;
    s.n_articles = doc["synth"]["n_articles"].get<int>();
    s.n_clusters = doc["synth"]["n_clusters"].get<int>();
    s.t_len = doc["synth"]["t_len"].get<int>();
    s.noise_sd = doc["synth"]["noise_sd"].get<double>();
    s.seed = doc["synth"]["seed"].get<std::uint64_t>();
    s.horizon_extension = doc["decoder"]["horizon"].get<int>();
    return s;
}

int RunConfig::forecast_samples() const { return doc["forecast"]["n_samples"].get<int>(); }

std::vector<double> RunConfig::forecast_quantile_levels() const {
    return doc["forecast"]["quantiles"].get<std::vector<double>>();
}

std::uint64_t RunConfig::forecast_seed() const {
    return doc["forecast"]["seed"].get<std::uint64_t>();
}

GroupOptions RunConfig::group_options() const {
    GroupOptions g;
    g.top_n = doc["evaluate"]["top_n"].get<int>();
    g.min_history = doc["evaluate"]["min_history"].get<int>();
    if (!doc["evaluate"]["cost_under"].is_null() && !doc["evaluate"]["cost_over"].is_null())
        g.costs = std::make_pair(doc["evaluate"]["cost_under"].get<double>(),
                                 doc["evaluate"]["cost_over"].get<double>());
    return g;
}

std::string RunConfig::baseline_model() const {
    return doc["evaluate"]["baseline"].get<std::string>();
}

}  // namespace gdar
