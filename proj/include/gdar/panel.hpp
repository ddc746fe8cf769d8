#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gdar {

// ---------------------------------------------------------------------------
// Feature schema: declared attribute kinds plus the fitted encoding state
// (categorical vocabularies, numeric min-max ranges).
// ---------------------------------------------------------------------------

enum class AttributeKind { categorical, numeric };

struct AttributeSpec {
    std::string name;
    AttributeKind kind = AttributeKind::categorical;
    // optional declared vocabulary; when empty, categorical vocabularies are
    // fitted from the data (sorted unique values)
    std::vector<std::string> vocab;
};

using AttributeRecord = std::map<std::string, std::string>;

struct FittedSchema {
    std::vector<AttributeSpec> attributes;
    // per attribute: sorted vocabulary (categorical) or [min,max] (numeric)
    std::vector<std::vector<std::string>> vocab;
    std::vector<std::pair<double, double>> range;

    int encoded_width() const;
    std::string hash() const;  // canonical fingerprint of the fitted encoding
};

FittedSchema fit_schema(const std::vector<AttributeSpec>& attrs,
                        const std::vector<AttributeRecord>& records);

struct EncodeReport {
    long unseen_categories = 0;  // values mapped to an all-zeros block
};

// One-hot for categoricals (vocabulary order), min-max to [0,1] for numerics.
// Column order is schema order, then vocabulary order. Idempotent for a
// frozen schema.
Eigen::MatrixXd encode_static_features(const FittedSchema& schema,
                                       const std::vector<AttributeRecord>& records,
                                       EncodeReport* report = nullptr);

// ---------------------------------------------------------------------------
// Timeline: weekly labels, either integer indices or ISO dates 7 days apart.
// Internal week numbering is always 1..T; label(t) restores the original
// form and extends past T for known-future steps.
// ---------------------------------------------------------------------------

struct Timeline {
    enum class Kind { integer, date };
    Kind kind = Kind::integer;
    long start = 1;   // first label value (integer) or days-since-epoch
    long stride = 1;  // label step; 7 days for dates
    int size = 0;     // T

    std::string label(int week) const;  // week in 1..size (+k for future)
    Timeline slice(int first_week, int count) const;
};

long parse_week_ordinal(const std::string& text, Timeline::Kind& kind_out);

// ---------------------------------------------------------------------------
// PanelDataset
// ---------------------------------------------------------------------------

struct PanelDataset {
    std::vector<std::string> article_ids;                       // N, sorted
    Timeline timeline;                                          // T weeks
    Eigen::MatrixXd demand;                                     // N x T
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> available;  // N x T
    Eigen::MatrixXd static_features;                            // N x M
    std::vector<Eigen::MatrixXd> dynamic_features;              // N of L x (T + k_future)
    int k_future = 0;
    std::string schema_hash;

    int n() const { return static_cast<int>(article_ids.size()); }
    int t_len() const { return timeline.size; }
    int m() const { return static_cast<int>(static_features.cols()); }
    int l() const {
        return dynamic_features.empty() ? 0 : static_cast<int>(dynamic_features[0].rows());
    }
    int article_index(const std::string& id) const;  // -1 when absent
    void validate() const;
};

// Calendar covariates generated internally: normalized week-of-year,
// day-of-month proxy and global week number. L = 3.
constexpr int kDynamicFeatureCount = 3;
void add_calendar_features(PanelDataset& panel, int k_future);

struct LoadOptions {
    int horizon_extension = 0;                 // known-future steps for dynamics
    std::optional<double> min_demand_std;      // optional ingest filter, off by default
};

PanelDataset load_panel(const std::filesystem::path& demand_file,
                        const std::filesystem::path& static_file,
                        const std::vector<AttributeSpec>& schema,
                        const LoadOptions& options = {});

void write_panel_files(const PanelDataset& panel, const std::filesystem::path& demand_file,
                       const std::filesystem::path& static_file,
                       const std::map<std::string, std::string>& meta = {});

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSpec {
    int test_weeks = 26;
    int val_weeks = 13;
};

// 1-based inclusive week ranges along the shared timeline.
struct SplitRanges {
    int train_end = 0;  // train = [1, train_end]
    int val_end = 0;    // val   = (train_end, val_end]
    int t_len = 0;      // test  = (val_end, t_len]
};

SplitRanges compute_split_ranges(int t_len, const SplitSpec& spec);

struct PanelSplits {
    PanelDataset train, val, test;
    SplitRanges ranges;
};

PanelSplits split_time(const PanelDataset& panel, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

struct Window {
    int article = 0;
    int anchor = 0;  // context = [anchor-P+1, anchor], horizon = (anchor, anchor+K]
};

struct WindowSet {
    std::vector<Window> entries;  // ordered by (anchor, article)
    int context_length = 0;
    int horizon = 0;
};

// All (article, anchor) pairs with full availability over context and
// horizon. Anchors may additionally be restricted to [anchor_min, anchor_max].
WindowSet make_windows(const PanelDataset& panel, int context_length, int horizon);
WindowSet make_windows(const PanelDataset& panel, int context_length, int horizon,
                       int anchor_min, int anchor_max);

// ---------------------------------------------------------------------------
// Cold starts & synthetic data
// ---------------------------------------------------------------------------

// Article is a cold start iff it has fewer than min_history observed weeks
// strictly before at_week.
std::vector<bool> flag_cold_starts(const PanelDataset& panel, int at_week, int min_history = 5);

struct SynthSpec {
    int n_articles = 60;
    int n_clusters = 12;
    int t_len = 80;
    double noise_sd = 0.35;
    std::uint64_t seed = 7;
    int horizon_extension = 0;
};

struct SyntheticPanel {
    PanelDataset panel;
    std::vector<int> cluster;                 // ground-truth cluster label per article
    std::vector<AttributeSpec> schema;        // all-numeric f0..f{C-1}
    std::vector<AttributeRecord> raw_static;  // rows the static file carries
};

// Cluster-factor generator: every cluster follows a latent AR(1) process and
// members observe softplus(factor + offset + noise). Static features are
// perturbed cluster one-hots whose within-cluster cosine similarity stays
// above 0.95 and cross-cluster below 0.5 by construction.
SyntheticPanel generate_synthetic_panel(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Leakage instrumentation: every demand read that feeds model inputs passes
// through one of these hooks when a monitor is installed.
// ---------------------------------------------------------------------------

struct AccessMonitor {
    int graph_limit = -1;    // max week readable for graph node features
    int decoder_limit = -1;  // max week readable for decoder inputs/targets
    long reads = 0;
    long violations = 0;

    void note_graph_read(int week) {
        ++reads;
        if (graph_limit >= 0 && week > graph_limit) ++violations;
    }
    void note_decoder_read(int week) {
        ++reads;
        if (decoder_limit >= 0 && week > decoder_limit) ++violations;
    }
};

}  // namespace gdar
