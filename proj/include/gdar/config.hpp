#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdar/common.hpp"
#include "gdar/metrics.hpp"
#include "gdar/model.hpp"
#include "gdar/panel.hpp"
#include "gdar/trainer.hpp"

namespace gdar {

// Run configuration: a JSON document with one section per module. Defaults
// mirror the retail hyperparameter set; file keys override defaults and CLI
// overrides ("section.key=value") override the file.
struct RunConfig {
    nlohmann::json doc;

    std::string canonical() const { return doc.dump(); }
    std::string hash() const { return hex64(fnv1a(canonical())); }

    std::string dataset_name() const;
    std::filesystem::path demand_file() const;
    std::filesystem::path static_file() const;
    std::vector<AttributeSpec> schema() const;
    LoadOptions load_options() const;
    SplitSpec split_spec() const;

    bool graph_enabled() const;
    double graph_threshold() const;
    int graph_chunk_size() const;

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    SynthSpec synth_spec() const;

    int forecast_samples() const;
    std::vector<double> forecast_quantile_levels() const;
    std::uint64_t forecast_seed() const;

    GroupOptions group_options() const;  // cold_start_week filled by the caller
    std::string baseline_model() const;
};

nlohmann::json default_config();

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides);

}  // namespace gdar
