#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdar/graph.hpp"
#include "gdar/panel.hpp"

namespace gdar {

// ---------------------------------------------------------------------------
// Point-forecast accuracy. WMAPE is absent when total actual demand is zero.
// ---------------------------------------------------------------------------

struct Metrics {
    double rmse = 0;
    double mae = 0;
    std::optional<double> wmape;
    long n_obs = 0;
};

Metrics compute_metrics(std::span<const double> actuals, std::span<const double> forecasts);

// Monetary loss: cost_under per unit of unmet demand, cost_over per unit of
// excess forecast.
double financial_loss(std::span<const double> actuals, std::span<const double> forecasts,
                      double cost_under, double cost_over);

// Percentage improvement of candidate over baseline; absent when the
// baseline loss is zero.
std::optional<double> uplift_pct(double baseline_loss, double candidate_loss);

// ---------------------------------------------------------------------------
// Group-wise report
// ---------------------------------------------------------------------------

struct Observation {
    int article = 0;
    int week = 0;  // target week on the panel timeline
    double actual = 0;
    double forecast = 0;
};

struct GroupMetrics {
    std::string group;
    Metrics metrics;
    long group_articles = 0;
};

struct ModelReport {
    std::string model;
    std::vector<GroupMetrics> groups;
    std::optional<double> financial;
};

struct MetricsReport {
    std::string dataset;
    std::vector<ModelReport> models;          // sorted by model name
    std::vector<std::string> notes;            // e.g. omitted groups
    std::map<std::string, double> financial;   // model -> loss, when costs given
};

struct GroupOptions {
    int top_n = 100;
    int cold_start_week = 1;  // evaluation boundary (first test week)
    int min_history = 5;
    std::optional<std::pair<double, double>> costs;  // (under, over)
};

// Groups: all articles, cold starts at the evaluation boundary, connected
// articles (graph degree >= 1, omitted with a note when no graph is given),
// and the top-n sellers by total actual test demand (ties by article id).
MetricsReport group_report(const PanelDataset& panel, const SimilarityGraph* graph,
                           const std::map<std::string, std::vector<Observation>>& forecasts,
                           const GroupOptions& options, const std::string& dataset_name,
                           int test_start_week, int test_end_week);

// ---------------------------------------------------------------------------
// Model comparison & runtime accounting
// ---------------------------------------------------------------------------

struct ComparisonRow {
    std::string group;
    std::string metric;
    double baseline_value = 0;
    double candidate_value = 0;
    std::optional<double> delta_pct;  // 100 * (candidate - baseline) / baseline
    std::string winner;               // lower-is-better; "tie" on equality
};

struct Comparison {
    std::string baseline;
    std::string candidate;
    std::vector<ComparisonRow> rows;
};

std::vector<Comparison> compare_models(const MetricsReport& report, const std::string& baseline);

struct RuntimeEntry {
    std::string model;
    double train_minutes = 0;
    double inference_minutes = 0;
};

struct RuntimeReport {
    std::vector<RuntimeEntry> entries;  // first entry is the baseline
    // per candidate: 100 * (candidate_total - baseline_total) / baseline_total
    std::vector<std::pair<std::string, double>> total_difference_pct;
};

RuntimeReport runtime_report(const std::vector<RuntimeEntry>& timings);

// ---------------------------------------------------------------------------
// Report IO
// ---------------------------------------------------------------------------

void write_metrics_report(const std::filesystem::path& path, const MetricsReport& report,
                          const std::map<std::string, std::string>& meta);
MetricsReport read_metrics_report(const std::filesystem::path& path,
                                  std::map<std::string, std::string>* meta = nullptr);

void write_comparison(const std::filesystem::path& path, const std::vector<Comparison>& comps,
                      const std::map<std::string, std::string>& meta);

std::string render_metrics_table(const MetricsReport& report);
std::string render_comparison_table(const std::vector<Comparison>& comps);
std::string render_runtime_table(const RuntimeReport& report);

}  // namespace gdar
