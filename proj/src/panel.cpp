#include "gdar/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gdar/common.hpp"
#include "gdar/csv.hpp"

namespace gdar {

namespace {

// Howard Hinnant's civil-date conversions.
long days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long yr = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(yr + (m <= 2));
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        require(pos == s.size(), "malformed number '" + s + "' in " + what);
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail("malformed number '" + s + "' in " + what);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

int FittedSchema::encoded_width() const {
    int w = 0;
    for (std::size_t a = 0; a < attributes.size(); ++a)
        w += attributes[a].kind == AttributeKind::categorical
                 ? static_cast<int>(vocab[a].size())
                 : 1;
    return w;
}

std::string FittedSchema::hash() const {
    std::string canon;
    for (std::size_t a = 0; a < attributes.size(); ++a) {
        canon += attributes[a].name;
        if (attributes[a].kind == AttributeKind::categorical) {
            canon += ":cat:";
            for (const auto& v : vocab[a]) {
                canon += v;
                canon += ',';
            }
        } else {
            canon += ":num:" + format_double(range[a].first) + "," +
                     format_double(range[a].second);
        }
        canon += '|';
    }
    return hex64(fnv1a(canon));
}

FittedSchema fit_schema(const std::vector<AttributeSpec>& attrs,
                        const std::vector<AttributeRecord>& records) {
    FittedSchema fitted;
    fitted.attributes = attrs;
    fitted.vocab.resize(attrs.size());
    fitted.range.assign(attrs.size(), {0.0, 0.0});
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        const auto& attr = attrs[a];
        if (attr.kind == AttributeKind::categorical) {
            if (!attr.vocab.empty()) {
                fitted.vocab[a] = attr.vocab;  // declared order wins
                continue;
            }
            std::set<std::string> values;
            for (const auto& rec : records) {
                auto it = rec.find(attr.name);
                require(it != rec.end(), "attribute '" + attr.name + "' missing from a record");
                values.insert(it->second);
            }
            fitted.vocab[a].assign(values.begin(), values.end());
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& rec : records) {
                auto it = rec.find(attr.name);
                require(it != rec.end(), "attribute '" + attr.name + "' missing from a record");
                double v = parse_double(it->second, "attribute '" + attr.name + "'");
                require(std::isfinite(v), "attribute '" + attr.name + "' is not finite");
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (records.empty()) lo = hi = 0.0;
            fitted.range[a] = {lo, hi};
        }
    }
    return fitted;
}

Eigen::MatrixXd encode_static_features(const FittedSchema& schema,
                                       const std::vector<AttributeRecord>& records,
                                       EncodeReport* report) {
    const int width = schema.encoded_width();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<int>(records.size()), width);
    for (int r = 0; r < static_cast<int>(records.size()); ++r) {
        int col = 0;
        for (std::size_t a = 0; a < schema.attributes.size(); ++a) {
            const auto& attr = schema.attributes[a];
            auto it = records[r].find(attr.name);
            require(it != records[r].end(),
                    "attribute '" + attr.name + "' missing from record " + std::to_string(r));
            if (attr.kind == AttributeKind::categorical) {
                const auto& vocab = schema.vocab[a];
                auto pos = std::find(vocab.begin(), vocab.end(), it->second);
                if (pos != vocab.end()) {
                    out(r, col + static_cast<int>(pos - vocab.begin())) = 1.0;
                } else if (report) {
                    ++report->unseen_categories;
                }
                col += static_cast<int>(vocab.size());
            } else {
                double v = parse_double(it->second, "attribute '" + attr.name + "'");
                auto [lo, hi] = schema.range[a];
                out(r, col) = hi > lo ? (v - lo) / (hi - lo) : 0.0;
                ++col;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Timeline
// ---------------------------------------------------------------------------

std::string Timeline::label(int week) const {
    long v = start + static_cast<long>(week - 1) * stride;
    if (kind == Kind::integer) return std::to_string(v);
    int y;
    unsigned m, d;
    civil_from_days(v, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
    return buf;
}

Timeline Timeline::slice(int first_week, int count) const {
    Timeline t = *this;
    t.start = start + static_cast<long>(first_week - 1) * stride;
    t.size = count;
    return t;
}

long parse_week_ordinal(const std::string& text, Timeline::Kind& kind_out) {
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        kind_out = Timeline::Kind::date;
        int y = static_cast<int>(parse_double(text.substr(0, 4), "week date"));
        unsigned m = static_cast<unsigned>(parse_double(text.substr(5, 2), "week date"));
        unsigned d = static_cast<unsigned>(parse_double(text.substr(8, 2), "week date"));
        require(m >= 1 && m <= 12 && d >= 1 && d <= 31, "invalid date '" + text + "'");
        return days_from_civil(y, m, d);
    }
    kind_out = Timeline::Kind::integer;
    try {
        std::size_t pos = 0;
        long v = std::stol(text, &pos);
        require(pos == text.size(), "malformed week '" + text + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail("malformed week '" + text + "'");
    }
}

// ---------------------------------------------------------------------------
// PanelDataset
// ---------------------------------------------------------------------------

int PanelDataset::article_index(const std::string& id) const {
    auto it = std::lower_bound(article_ids.begin(), article_ids.end(), id);
    if (it == article_ids.end() || *it != id) return -1;
    return static_cast<int>(it - article_ids.begin());
}

void PanelDataset::validate() const {
    const int N = n(), T = t_len();
    require(demand.rows() == N && demand.cols() == T, "demand matrix shape mismatch");
    require(available.rows() == N && available.cols() == T, "availability mask shape mismatch");
    require(static_features.rows() == N, "static feature rows mismatch");
    require(static_cast<int>(dynamic_features.size()) == N, "dynamic feature count mismatch");
    for (const auto& z : dynamic_features)
        require(z.cols() == T + k_future, "dynamic features must extend k_future past T");
    for (int i = 0; i < N; ++i)
        for (int t = 0; t < T; ++t)
            if (available(i, t))
                require(std::isfinite(demand(i, t)) && demand(i, t) >= 0.0,
                        "demand must be finite and non-negative where available");
    require(std::is_sorted(article_ids.begin(), article_ids.end()), "article ids not sorted");
    require(timeline.stride > 0, "timeline stride must be positive");
}

void add_calendar_features(PanelDataset& panel, int k_future) {
    const int T = panel.t_len();
    panel.k_future = k_future;
    Eigen::MatrixXd z(kDynamicFeatureCount, T + k_future);
    for (int t = 1; t <= T + k_future; ++t) {
        long woy, dom;
        if (panel.timeline.kind == Timeline::Kind::date) {
            long days = panel.timeline.start + static_cast<long>(t - 1) * panel.timeline.stride;
            int y;
            unsigned m, d;
            civil_from_days(days, y, m, d);
            long doy = days - days_from_civil(y, 1, 1);
            woy = doy / 7 + 1;
            dom = d;
        } else {
            long v = panel.timeline.start + static_cast<long>(t - 1) * panel.timeline.stride;
            woy = (v - 1) % 52 + 1;
            if (woy < 1) woy += 52;
            dom = ((v - 1) * 7) % 31 + 1;
            if (dom < 1) dom += 31;
        }
        z(0, t - 1) = static_cast<double>(woy) / 53.0;
        z(1, t - 1) = static_cast<double>(dom) / 31.0;
        z(2, t - 1) = static_cast<double>(t) / static_cast<double>(T + k_future);
    }
    panel.dynamic_features.assign(panel.n(), z);
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

PanelDataset load_panel(const std::filesystem::path& demand_file,
                        const std::filesystem::path& static_file,
                        const std::vector<AttributeSpec>& schema,
                        const LoadOptions& options) {
    Table demand_tab = read_table(demand_file);
    const int c_id = demand_tab.column("article_id");
    const int c_week = demand_tab.column("week");
    const int c_dem = demand_tab.column("demand");
    require(c_id >= 0 && c_week >= 0 && c_dem >= 0,
            "demand file must have columns article_id,week,demand: " + demand_file.string());

    Timeline::Kind kind = Timeline::Kind::integer;
    bool kind_set = false;
    struct Cell {
        long ordinal;
        double value;
        int row;
    };
    std::map<std::string, std::vector<Cell>> by_article;
    std::vector<int> duplicate_rows;
    std::map<std::pair<std::string, long>, int> seen;
    long ord_min = 0, ord_max = 0;
    bool have_ord = false;

    for (int r = 0; r < static_cast<int>(demand_tab.rows.size()); ++r) {
        const auto& row = demand_tab.rows[r];
        require(static_cast<int>(row.size()) > std::max({c_id, c_week, c_dem}),
                "short row " + std::to_string(r + 2) + " in " + demand_file.string());
        Timeline::Kind k;
        long ord = parse_week_ordinal(row[c_week], k);
        if (!kind_set) {
            kind = k;
            kind_set = true;
        } else {
            require(k == kind, "mixed week formats in " + demand_file.string());
        }
        double v = parse_double(row[c_dem], "demand row " + std::to_string(r + 2));
        require(std::isfinite(v), "non-finite demand at row " + std::to_string(r + 2));
        require(v >= 0.0, "negative demand at row " + std::to_string(r + 2));
        auto key = std::make_pair(row[c_id], ord);
        auto [it, inserted] = seen.emplace(key, r + 2);
        if (!inserted) {
            duplicate_rows.push_back(it->second);
            duplicate_rows.push_back(r + 2);
            continue;
        }
        by_article[row[c_id]].push_back({ord, v, r + 2});
        if (!have_ord) {
            ord_min = ord_max = ord;
            have_ord = true;
        } else {
            ord_min = std::min(ord_min, ord);
            ord_max = std::max(ord_max, ord);
        }
    }
    if (!duplicate_rows.empty()) {
        std::sort(duplicate_rows.begin(), duplicate_rows.end());
        duplicate_rows.erase(std::unique(duplicate_rows.begin(), duplicate_rows.end()),
                             duplicate_rows.end());
        std::string msg = "duplicate (article, week) rows in " + demand_file.string() + ":";
        for (int r : duplicate_rows) msg += " " + std::to_string(r);
        fail(msg);
    }
    require(have_ord, "demand file has no data rows: " + demand_file.string());

    // Infer the lattice stride and check uniform weekly spacing.
    long stride = kind == Timeline::Kind::date ? 7 : 1;
    if (kind == Timeline::Kind::integer) {
        std::set<long> ords;
        for (const auto& [id, cells] : by_article)
            for (const auto& c : cells) ords.insert(c.ordinal);
        long g = 0;
        long prev = *ords.begin();
        for (auto it = std::next(ords.begin()); it != ords.end(); ++it) {
            g = std::gcd(g, *it - prev);
            prev = *it;
        }
        stride = g > 0 ? g : 1;
    }
    for (const auto& [id, cells] : by_article)
        for (const auto& c : cells)
            require((c.ordinal - ord_min) % stride == 0,
                    "weeks not uniformly spaced (row " + std::to_string(c.row) + ")");

    Timeline timeline;
    timeline.kind = kind;
    timeline.start = ord_min;
    timeline.stride = stride;
    timeline.size = static_cast<int>((ord_max - ord_min) / stride) + 1;

    std::vector<std::string> ids;
    ids.reserve(by_article.size());
    for (const auto& [id, cells] : by_article) ids.push_back(id);
    std::sort(ids.begin(), ids.end());

    // Static attributes, keyed by article_id.
    Table static_tab = read_table(static_file);
    const int s_id = static_tab.column("article_id");
    require(s_id >= 0, "static file must have an article_id column: " + static_file.string());
    std::map<std::string, AttributeRecord> static_records;
    for (const auto& row : static_tab.rows) {
        AttributeRecord rec;
        for (std::size_t c = 0; c < static_tab.header.size(); ++c)
            if (static_cast<int>(c) != s_id && c < row.size())
                rec[static_tab.header[c]] = row[c];
        static_records[row[s_id]] = std::move(rec);
    }
    std::vector<std::string> missing;
    for (const auto& id : ids)
        if (!static_records.count(id)) missing.push_back(id);
    if (!missing.empty()) {
        std::string msg = "articles missing from static file:";
        for (const auto& id : missing) msg += " " + id;
        fail(msg);
    }

    PanelDataset panel;
    panel.article_ids = ids;
    panel.timeline = timeline;
    const int N = panel.n(), T = timeline.size;
    panel.demand = Eigen::MatrixXd::Zero(N, T);
    panel.available = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(N, T, false);
    for (int i = 0; i < N; ++i)
        for (const auto& c : by_article[ids[i]]) {
            int t = static_cast<int>((c.ordinal - ord_min) / stride);
            panel.demand(i, t) = c.value;
            panel.available(i, t) = true;
        }

    // Optional ingest filter: keep only articles whose observed weekly demand
    // has a standard deviation above the threshold.
    if (options.min_demand_std) {
        std::vector<int> keep;
        for (int i = 0; i < N; ++i) {
            double sum = 0, sum2 = 0;
            long cnt = 0;
            for (int t = 0; t < T; ++t)
                if (panel.available(i, t)) {
                    sum += panel.demand(i, t);
                    sum2 += panel.demand(i, t) * panel.demand(i, t);
                    ++cnt;
                }
            double sd = 0;
            if (cnt > 0) {
                double mean = sum / static_cast<double>(cnt);
                sd = std::sqrt(std::max(0.0, sum2 / static_cast<double>(cnt) - mean * mean));
            }
            if (sd > *options.min_demand_std) keep.push_back(i);
        }
        require(!keep.empty(), "demand-std filter removed every article");
        if (static_cast<int>(keep.size()) < N) {
            PanelDataset filtered;
            filtered.timeline = timeline;
            filtered.demand.resize(keep.size(), T);
            filtered.available.resize(keep.size(), T);
            for (std::size_t k = 0; k < keep.size(); ++k) {
                filtered.article_ids.push_back(ids[keep[k]]);
                filtered.demand.row(k) = panel.demand.row(keep[k]);
                filtered.available.row(k) = panel.available.row(keep[k]);
            }
            panel = std::move(filtered);
        }
    }

    std::vector<AttributeRecord> records;
    records.reserve(panel.article_ids.size());
    for (const auto& id : panel.article_ids) records.push_back(static_records[id]);
    FittedSchema fitted = fit_schema(schema, records);
    panel.static_features = encode_static_features(fitted, records);
    panel.schema_hash = fitted.hash();

    add_calendar_features(panel, options.horizon_extension);
    panel.validate();
    return panel;
}

void write_panel_files(const PanelDataset& panel, const std::filesystem::path& demand_file,
                       const std::filesystem::path& static_file,
                       const std::map<std::string, std::string>& meta) {
    Table demand_tab;
    demand_tab.meta = meta;
    demand_tab.header = {"article_id", "week", "demand"};
    for (int i = 0; i < panel.n(); ++i)
        for (int t = 0; t < panel.t_len(); ++t)
            if (panel.available(i, t))
                demand_tab.rows.push_back({panel.article_ids[i], panel.timeline.label(t + 1),
                                           format_double(panel.demand(i, t))});
    write_table(demand_file, demand_tab);

    Table static_tab;
    static_tab.meta = meta;
    static_tab.header = {"article_id"};
    for (int c = 0; c < panel.m(); ++c) static_tab.header.push_back("f" + std::to_string(c));
    for (int i = 0; i < panel.n(); ++i) {
        std::vector<std::string> row{panel.article_ids[i]};
        for (int c = 0; c < panel.m(); ++c)
            row.push_back(format_double(panel.static_features(i, c)));
        static_tab.rows.push_back(std::move(row));
    }
    write_table(static_file, static_tab);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

SplitRanges compute_split_ranges(int t_len, const SplitSpec& spec) {
    require(spec.test_weeks >= 1 && spec.val_weeks >= 1, "split lengths must be positive");
    require(spec.test_weeks + spec.val_weeks < t_len,
            "test_weeks + val_weeks must be smaller than the timeline (T=" +
                std::to_string(t_len) + ")");
    SplitRanges r;
    r.t_len = t_len;
    r.val_end = t_len - spec.test_weeks;
    r.train_end = r.val_end - spec.val_weeks;
    return r;
}

namespace {
PanelDataset slice_panel(const PanelDataset& panel, int first_week, int count) {
    PanelDataset out;
    out.article_ids = panel.article_ids;
    out.timeline = panel.timeline.slice(first_week, count);
    out.demand = panel.demand.middleCols(first_week - 1, count);
    out.available = panel.available.middleCols(first_week - 1, count);
    out.static_features = panel.static_features;
    out.k_future = panel.k_future;
    out.schema_hash = panel.schema_hash;
    if (!panel.dynamic_features.empty()) {
        int dyn_count =
            std::min(count + panel.k_future,
                     static_cast<int>(panel.dynamic_features[0].cols()) - (first_week - 1));
        out.dynamic_features.reserve(panel.dynamic_features.size());
        for (const auto& z : panel.dynamic_features)
            out.dynamic_features.push_back(z.middleCols(first_week - 1, dyn_count));
        out.k_future = dyn_count - count;
    } else {
        out.k_future = 0;
    }
    return out;
}
}  // namespace

PanelSplits split_time(const PanelDataset& panel, const SplitSpec& spec) {
    SplitRanges r = compute_split_ranges(panel.t_len(), spec);
    PanelSplits s;
    s.ranges = r;
    s.train = slice_panel(panel, 1, r.train_end);
    s.val = slice_panel(panel, r.train_end + 1, r.val_end - r.train_end);
    s.test = slice_panel(panel, r.val_end + 1, r.t_len - r.val_end);
    return s;
}

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

WindowSet make_windows(const PanelDataset& panel, int context_length, int horizon,
                       int anchor_min, int anchor_max) {
    require(context_length >= 1 && horizon >= 1, "context_length and horizon must be >= 1");
    WindowSet ws;
    ws.context_length = context_length;
    ws.horizon = horizon;
    const int T = panel.t_len();
    int lo = std::max(anchor_min, context_length);
    int hi = std::min(anchor_max, T - horizon);
    for (int anchor = lo; anchor <= hi; ++anchor) {
        for (int i = 0; i < panel.n(); ++i) {
            bool ok = true;
            for (int t = anchor - context_length + 1; t <= anchor + horizon && ok; ++t)
                ok = panel.available(i, t - 1);
            if (ok) ws.entries.push_back({i, anchor});
        }
    }
    if (ws.entries.empty())
        std::cerr << "warning: no valid windows (P=" << context_length << ", K=" << horizon
                  << ")\n";
    return ws;
}

WindowSet make_windows(const PanelDataset& panel, int context_length, int horizon) {
    return make_windows(panel, context_length, horizon, 1, panel.t_len());
}

// ---------------------------------------------------------------------------
// Cold starts
// ---------------------------------------------------------------------------

std::vector<bool> flag_cold_starts(const PanelDataset& panel, int at_week, int min_history) {
    require(at_week >= 1 && at_week <= panel.t_len(), "at_week out of range");
    std::vector<bool> flags(panel.n());
    for (int i = 0; i < panel.n(); ++i) {
        int observed = 0;
        for (int t = 1; t < at_week; ++t)
            if (panel.available(i, t - 1)) ++observed;
        flags[i] = observed < min_history;
    }
    return flags;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

SyntheticPanel generate_synthetic_panel(const SynthSpec& spec) {
    require(spec.n_clusters >= 1 && spec.n_clusters <= spec.n_articles,
            "n_clusters must be in [1, n_articles]");
    require(spec.t_len >= 2, "t_len must be >= 2");
    std::mt19937_64 rng(spec.seed);
    auto normal = [&rng]() {
        // Box-Muller on engine-independent uniforms.
        double u1 = std::max(unit_double(rng()), 1e-300);
        double u2 = unit_double(rng());
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };

    const int N = spec.n_articles, T = spec.t_len, C = spec.n_clusters;
    const double phi = 0.85, innovation_sd = 0.6;

    std::vector<int> cluster(N);
    for (int i = 0; i < N; ++i) cluster[i] = i % C;

    // Latent AR(1) factor per cluster, stationary start.
    Eigen::MatrixXd factor(C, T);
    const double stat_sd = innovation_sd / std::sqrt(1.0 - phi * phi);
    for (int c = 0; c < C; ++c) {
        factor(c, 0) = stat_sd * normal();
        for (int t = 1; t < T; ++t) factor(c, t) = phi * factor(c, t - 1) + innovation_sd * normal();
    }

    std::vector<double> offset(N);
    for (int i = 0; i < N; ++i) offset[i] = 2.0 * unit_double(rng()) - 1.0;

    PanelDataset panel;
    for (int i = 0; i < N; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "A%04d", i);
        panel.article_ids.push_back(buf);
    }
    panel.timeline = Timeline{Timeline::Kind::integer, 1, 1, T};
    panel.demand.resize(N, T);
    panel.available =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(N, T, true);
    for (int i = 0; i < N; ++i)
        for (int t = 0; t < T; ++t) {
            double noise = spec.noise_sd > 0 ? spec.noise_sd * normal() : 0.0;
            panel.demand(i, t) = softplus(factor(cluster[i], t) + offset[i] + noise);
        }

    // Perturbed one-hot static features. The perturbation bound eps solves
    // C*eps^2 + 2*eps = 0.02 so that all within-cluster cosine similarities
    // stay above 0.95 and cross-cluster ones below 0.5, including after the
    // min-max encode step.
    const double eps = (-1.0 + std::sqrt(1.0 + 0.02 * C)) / static_cast<double>(C);
    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(N, C);
    for (int i = 0; i < N; ++i) {
        for (int c = 0; c < C; ++c) raw(i, c) = eps * unit_double(rng());
        raw(i, cluster[i]) += 1.0;
    }

    SyntheticPanel out;
    for (int c = 0; c < C; ++c)
        out.schema.push_back({"f" + std::to_string(c), AttributeKind::numeric});

    // Canonicalize through one min-max pass so the in-memory panel, the
    // written static file, and a later reload all agree bit for bit.
    std::vector<AttributeRecord> raw_records(N);
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c)
            raw_records[i]["f" + std::to_string(c)] = format_double(raw(i, c));
    Eigen::MatrixXd scaled = encode_static_features(fit_schema(out.schema, raw_records), raw_records);
    out.raw_static.resize(N);
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c)
            out.raw_static[i]["f" + std::to_string(c)] = format_double(scaled(i, c));

    FittedSchema fitted = fit_schema(out.schema, out.raw_static);
    panel.static_features = encode_static_features(fitted, out.raw_static);
    panel.schema_hash = fitted.hash();
    add_calendar_features(panel, spec.horizon_extension);
    panel.validate();

    out.panel = std::move(panel);
    out.cluster = std::move(cluster);
    return out;
}

}  // namespace gdar
