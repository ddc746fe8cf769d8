#include "gdar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "gdar/common.hpp"
#include "gdar/csv.hpp"

namespace gdar {

Metrics compute_metrics(std::span<const double> actuals, std::span<const double> forecasts) {
    require(actuals.size() == forecasts.size(),
            "actuals (" + std::to_string(actuals.size()) + ") and forecasts (" +
                std::to_string(forecasts.size()) + ") differ in length");
    require(!actuals.empty(), "cannot compute metrics on empty arrays");
    double se = 0, ae = 0, total = 0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        const double e = actuals[i] - forecasts[i];
        se += e * e;
        ae += std::abs(e);
        total += actuals[i];
    }
    Metrics m;
    m.n_obs = static_cast<long>(actuals.size());
    m.rmse = std::sqrt(se / static_cast<double>(actuals.size()));
    m.mae = ae / static_cast<double>(actuals.size());
    if (total > 0) m.wmape = ae / total;
    return m;
}

double financial_loss(std::span<const double> actuals, std::span<const double> forecasts,
                      double cost_under, double cost_over) {
    require(cost_under > 0 && cost_over > 0, "costs must be positive");
    require(actuals.size() == forecasts.size(), "actuals and forecasts differ in length");
    double loss = 0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        loss += cost_under * std::max(0.0, actuals[i] - forecasts[i]) +
                cost_over * std::max(0.0, forecasts[i] - actuals[i]);
    }
    return loss;
}

std::optional<double> uplift_pct(double baseline_loss, double candidate_loss) {
    if (baseline_loss == 0.0) return std::nullopt;
    return 100.0 * (baseline_loss - candidate_loss) / baseline_loss;
}

// ---------------------------------------------------------------------------
// Group report
// ---------------------------------------------------------------------------

MetricsReport group_report(const PanelDataset& panel, const SimilarityGraph* graph,
                           const std::map<std::string, std::vector<Observation>>& forecasts,
                           const GroupOptions& options, const std::string& dataset_name,
                           int test_start_week, int test_end_week) {
    MetricsReport report;
    report.dataset = dataset_name;

    std::vector<bool> cold = flag_cold_starts(panel, options.cold_start_week, options.min_history);

    std::vector<bool> connected(panel.n(), false);
    if (graph) {
        require(graph->n_nodes == panel.n(), "graph and panel disagree on article count");
        for (int i = 0; i < panel.n(); ++i) connected[i] = graph->degree[i] >= 1;
    } else {
        report.notes.push_back("connected group omitted: no graph supplied");
    }

    // top sellers by total actual demand over the test weeks, ties by id
    std::vector<std::pair<double, int>> totals;
    for (int i = 0; i < panel.n(); ++i) {
        double total = 0;
        for (int t = test_start_week; t <= test_end_week; ++t)
            if (panel.available(i, t - 1)) total += panel.demand(i, t - 1);
        totals.emplace_back(total, i);
    }
    std::sort(totals.begin(), totals.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return panel.article_ids[a.second] < panel.article_ids[b.second];
    });
    std::vector<bool> top(panel.n(), false);
    for (int k = 0; k < std::min(options.top_n, panel.n()); ++k) top[totals[k].second] = true;

    struct Group {
        std::string name;
        const std::vector<bool>* member;
        bool active;
    };
    std::vector<bool> all(panel.n(), true);
    const std::string top_name = "top_" + std::to_string(options.top_n);
    std::vector<Group> groups = {{"all", &all, true},
                                 {"cold_starts", &cold, true},
                                 {"connected", &connected, graph != nullptr},
                                 {top_name, &top, true}};

    for (const auto& [model, obs] : forecasts) {
        ModelReport mr;
        mr.model = model;
        for (const auto& group : groups) {
            if (!group.active) continue;
            std::vector<double> y, yhat;
            for (const auto& o : obs)
                if ((*group.member)[o.article]) {
                    y.push_back(o.actual);
                    yhat.push_back(o.forecast);
                }
            GroupMetrics gm;
            gm.group = group.name;
            gm.group_articles =
                std::count(group.member->begin(), group.member->end(), true);
            if (!y.empty()) gm.metrics = compute_metrics(y, yhat);
            mr.groups.push_back(std::move(gm));
        }
        if (options.costs) {
            std::vector<double> y, yhat;
            for (const auto& o : obs) {
                y.push_back(o.actual);
                yhat.push_back(o.forecast);
            }
            double loss = financial_loss(y, yhat, options.costs->first, options.costs->second);
            mr.financial = loss;
            report.financial[model] = loss;
        }
        report.models.push_back(std::move(mr));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<std::string, std::optional<double>>> metric_values(const GroupMetrics& g) {
    return {{"rmse", g.metrics.n_obs ? std::optional<double>(g.metrics.rmse) : std::nullopt},
            {"mae", g.metrics.n_obs ? std::optional<double>(g.metrics.mae) : std::nullopt},
            {"wmape", g.metrics.wmape}};
}

}  // namespace

std::vector<Comparison> compare_models(const MetricsReport& report, const std::string& baseline) {
    const ModelReport* base = nullptr;
    for (const auto& m : report.models)
        if (m.model == baseline) base = &m;
    require(base != nullptr, "baseline model '" + baseline + "' not present in the report");

    auto group_names = [](const ModelReport& m) {
        std::vector<std::string> names;
        for (const auto& g : m.groups) names.push_back(g.group);
        return names;
    };
    const auto base_groups = group_names(*base);

    std::vector<Comparison> comps;
    for (const auto& m : report.models) {
        if (m.model == baseline) continue;
        require(group_names(m) == base_groups,
                "model '" + m.model + "' does not share the baseline's groups");
        Comparison comp;
        comp.baseline = baseline;
        comp.candidate = m.model;
        for (std::size_t g = 0; g < m.groups.size(); ++g) {
            auto base_vals = metric_values(base->groups[g]);
            auto cand_vals = metric_values(m.groups[g]);
            for (std::size_t k = 0; k < base_vals.size(); ++k) {
                if (!base_vals[k].second || !cand_vals[k].second) continue;
                ComparisonRow row;
                row.group = m.groups[g].group;
                row.metric = base_vals[k].first;
                row.baseline_value = *base_vals[k].second;
                row.candidate_value = *cand_vals[k].second;
                if (row.baseline_value != 0.0)
                    row.delta_pct =
                        100.0 * (row.candidate_value - row.baseline_value) / row.baseline_value;
                row.winner = row.candidate_value < row.baseline_value
                                 ? comp.candidate
                                 : (row.candidate_value > row.baseline_value ? baseline : "tie");
                comp.rows.push_back(std::move(row));
            }
        }
        comps.push_back(std::move(comp));
    }
    return comps;
}

RuntimeReport runtime_report(const std::vector<RuntimeEntry>& timings) {
    require(!timings.empty(), "no timings given");
    for (const auto& t : timings)
        require(t.train_minutes > 0 && t.inference_minutes > 0, "timings must be positive");
    RuntimeReport report;
    report.entries = timings;
    const double base_total = timings[0].train_minutes + timings[0].inference_minutes;
    for (std::size_t i = 1; i < timings.size(); ++i) {
        const double total = timings[i].train_minutes + timings[i].inference_minutes;
        report.total_difference_pct.emplace_back(timings[i].model,
                                                 100.0 * (total - base_total) / base_total);
    }
    return report;
}

// ---------------------------------------------------------------------------
// IO
// ---------------------------------------------------------------------------

namespace {
std::string fmt_metric(double v) { return format_double(v, "%.6f"); }
}  // namespace

void write_metrics_report(const std::filesystem::path& path, const MetricsReport& report,
                          const std::map<std::string, std::string>& meta) {
    Table t;
    t.meta = meta;
    for (std::size_t i = 0; i < report.notes.size(); ++i)
        t.meta["note" + std::to_string(i)] = report.notes[i];
    t.header = {"dataset", "group", "model", "rmse", "mae", "wmape", "n_obs"};
    std::vector<std::string> group_order;
    if (!report.models.empty())
        for (const auto& g : report.models[0].groups) group_order.push_back(g.group);
    for (const auto& group : group_order)
        for (const auto& m : report.models)
            for (const auto& g : m.groups)
                if (g.group == group)
                    t.rows.push_back({report.dataset, g.group, m.model,
                                      g.metrics.n_obs ? fmt_metric(g.metrics.rmse) : "",
                                      g.metrics.n_obs ? fmt_metric(g.metrics.mae) : "",
                                      g.metrics.wmape ? fmt_metric(*g.metrics.wmape) : "",
                                      std::to_string(g.metrics.n_obs)});
    write_table(path, t);
}

MetricsReport read_metrics_report(const std::filesystem::path& path,
                                  std::map<std::string, std::string>* meta) {
    Table t = read_table(path);
    if (meta) *meta = t.meta;
    const std::vector<std::string> expect = {"dataset", "group",  "model", "rmse",
                                             "mae",     "wmape", "n_obs"};
    require(t.header == expect, "unexpected metrics header in " + path.string());
    MetricsReport report;
    std::map<std::string, ModelReport> models;
    std::vector<std::string> model_order;
    for (const auto& row : t.rows) {
        if (report.dataset.empty()) report.dataset = row[0];
        if (!models.count(row[2])) model_order.push_back(row[2]);
        auto& mr = models[row[2]];
        mr.model = row[2];
        GroupMetrics gm;
        gm.group = row[1];
        gm.metrics.n_obs = std::stol(row[6]);
        if (!row[3].empty()) gm.metrics.rmse = std::stod(row[3]);
        if (!row[4].empty()) gm.metrics.mae = std::stod(row[4]);
        if (!row[5].empty()) gm.metrics.wmape = std::stod(row[5]);
        mr.groups.push_back(std::move(gm));
    }
    for (const auto& name : model_order) report.models.push_back(models[name]);
    return report;
}

void write_comparison(const std::filesystem::path& path, const std::vector<Comparison>& comps,
                      const std::map<std::string, std::string>& meta) {
    Table t;
    t.meta = meta;
    t.header = {"group", "metric", "baseline", "candidate", "baseline_value", "candidate_value",
                "delta_pct", "winner"};
    for (const auto& comp : comps)
        for (const auto& row : comp.rows)
            t.rows.push_back({row.group, row.metric, comp.baseline, comp.candidate,
                              fmt_metric(row.baseline_value), fmt_metric(row.candidate_value),
                              row.delta_pct ? format_double(*row.delta_pct, "%.4f") : "",
                              row.winner});
    write_table(path, t);
}

std::string render_metrics_table(const MetricsReport& report) {
    std::ostringstream out;
    out << "dataset: " << report.dataset << "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %-14s %12s %12s %12s %10s\n", "group", "model", "rmse",
                  "mae", "wmape", "n_obs");
    out << buf;
    std::vector<std::string> group_order;
    if (!report.models.empty())
        for (const auto& g : report.models[0].groups) group_order.push_back(g.group);
    for (const auto& group : group_order)
        for (const auto& m : report.models)
            for (const auto& g : m.groups)
                if (g.group == group) {
                    std::snprintf(buf, sizeof(buf), "%-12s %-14s %12.4f %12.4f %12s %10ld\n",
                                  g.group.c_str(), m.model.c_str(), g.metrics.rmse, g.metrics.mae,
                                  g.metrics.wmape ? format_double(*g.metrics.wmape, "%.4f").c_str()
                                                  : "-",
                                  g.metrics.n_obs);
                    out << buf;
                }
    for (const auto& [model, loss] : report.financial)
        out << "financial_loss[" << model << "] = " << format_double(loss, "%.4f") << "\n";
    for (const auto& note : report.notes) out << "note: " << note << "\n";
    return out.str();
}

std::string render_comparison_table(const std::vector<Comparison>& comps) {
    std::ostringstream out;
    char buf[200];
    for (const auto& comp : comps) {
        out << comp.baseline << " vs " << comp.candidate << "\n";
        std::snprintf(buf, sizeof(buf), "%-12s %-8s %14s %14s %10s %-14s\n", "group", "metric",
                      comp.baseline.c_str(), comp.candidate.c_str(), "delta%", "winner");
        out << buf;
        for (const auto& row : comp.rows) {
            std::snprintf(buf, sizeof(buf), "%-12s %-8s %14.4f %14.4f %10s %-14s\n",
                          row.group.c_str(), row.metric.c_str(), row.baseline_value,
                          row.candidate_value,
                          row.delta_pct ? format_double(*row.delta_pct, "%.2f").c_str() : "-",
                          row.winner.c_str());
            out << buf;
        }
    }
    return out.str();
}

std::string render_runtime_table(const RuntimeReport& report) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s %14s %18s\n", "model", "train_minutes",
                  "inference_minutes");
    out << buf;
    for (const auto& e : report.entries) {
        std::snprintf(buf, sizeof(buf), "%-14s %14.2f %18.2f\n", e.model.c_str(), e.train_minutes,
                      e.inference_minutes);
        out << buf;
    }
    for (const auto& [model, pct] : report.total_difference_pct)
        out << "total difference " << model << ": " << format_double(pct, "%+.2f") << "%\n";
    return out.str();
}

}  // namespace gdar
