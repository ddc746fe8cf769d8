#include <algorithm>
#include <set>

#include "doctest.h"
#include "gdar/csv.hpp"
#include "gdar/trainer.hpp"
#include "support.hpp"

using namespace gdar;

namespace {

WindowSet windows_of(std::vector<Window> entries, int p_len = 2, int k_len = 1) {
    WindowSet ws;
    ws.entries = std::move(entries);
    ws.context_length = p_len;
    ws.horizon = k_len;
    return ws;
}

std::multiset<std::pair<int, int>> as_multiset(const std::vector<std::vector<Window>>& batches) {
    std::multiset<std::pair<int, int>> out;
    for (const auto& batch : batches)
        for (const auto& w : batch) out.emplace(w.anchor, w.article);
    return out;
}

struct TrainRig {
    SyntheticPanel synth;
    SimilarityGraph graph;
    SplitRanges ranges;
    ModelConfig model_config;
    TrainConfig train_config;

    TrainRig() {
        SynthSpec spec;
        spec.n_articles = 12;
        spec.n_clusters = 4;
        spec.t_len = 36;
        spec.seed = 5;
        spec.horizon_extension = 2;
        synth = generate_synthetic_panel(spec);
        graph = build_graph(synth.panel.static_features, 0.95, 8);
        ranges = compute_split_ranges(spec.t_len, SplitSpec{8, 6});

        model_config.graph_mode = true;
        model_config.encoder.layer_sizes = {4, 3};
        model_config.decoder.hidden = {8, 8};
        model_config.decoder.context_length = 4;
        model_config.decoder.horizon = 2;

        train_config.max_epochs = 3;
        train_config.patience = 3;
        train_config.batch_size = 8;
        train_config.batch_mode = BatchMode::synchronized;
        train_config.learning_rate = 2e-3;
        train_config.seed = 11;
        train_config.threads = 1;
        train_config.max_neighbors = 3;
    }
};

}  // namespace

TEST_CASE("synchronized_batches: single-anchor batches that partition the windows") {
    std::vector<Window> entries;
    for (int anchor : {5, 9})
        for (int article : {0, 1, 2}) entries.push_back({article, anchor});
    auto ws = windows_of(entries);

    auto batches = synchronized_batches(ws, 2, 1);
    CHECK(batches.size() == 4);  // ceil(3/2) per anchor
    for (const auto& batch : batches) {
        REQUIRE(!batch.empty());
        for (const auto& w : batch) CHECK(w.anchor == batch[0].anchor);
    }
    CHECK(as_multiset(batches) == as_multiset({entries}));

    SUBCASE("batch_size >= group size gives one batch per anchor") {
        auto big = synchronized_batches(ws, 16, 3);
        CHECK(big.size() == 2);
    }
    SUBCASE("no batch mixes anchors for any seed; partition holds") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            auto shuffled = synchronized_batches(ws, 2, seed);
            for (const auto& batch : shuffled)
                for (const auto& w : batch) CHECK(w.anchor == batch[0].anchor);
            CHECK(as_multiset(shuffled) == as_multiset({entries}));
        }
    }
}

TEST_CASE("random_batches: sizes, determinism, partition") {
    std::vector<Window> entries;
    for (int i = 0; i < 6; ++i) entries.push_back({i, 4 + i});
    auto ws = windows_of(entries);

    auto batches = random_batches(ws, 4, 9);
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 2);
    CHECK(as_multiset(batches) == as_multiset({entries}));

    auto again = random_batches(ws, 4, 9);
    for (std::size_t b = 0; b < batches.size(); ++b)
        for (std::size_t i = 0; i < batches[b].size(); ++i) {
            CHECK(batches[b][i].anchor == again[b][i].anchor);
            CHECK(batches[b][i].article == again[b][i].article);
        }
}

TEST_CASE("EarlyStopper: patience semantics") {
    SUBCASE("patience=1 stops on the first non-improving epoch") {
        EarlyStopper stopper(1);
        CHECK_FALSE(stopper.observe(1.0));
        CHECK(stopper.observe(1.1));  // epoch 2: worse -> stop
        CHECK(stopper.best_epoch() == 1);
    }
    SUBCASE("patience=2 tolerates one plateau") {
        EarlyStopper stopper(2);
        CHECK_FALSE(stopper.observe(1.0));
        CHECK_FALSE(stopper.observe(1.0));  // equal is not an improvement
        CHECK(stopper.observe(1.2));
        CHECK(stopper.best_epoch() == 1);
    }
    SUBCASE("improvement resets the counter") {
        EarlyStopper stopper(2);
        stopper.observe(1.0);
        stopper.observe(1.5);
        CHECK_FALSE(stopper.observe(0.5));
        CHECK(stopper.best_epoch() == 3);
    }
}

TEST_CASE("optimizer registry: builtins and custom registration") {
    CHECK(make_optimizer("adam", 1e-3) != nullptr);
    CHECK(make_optimizer("sgd", 1e-3) != nullptr);
    CHECK_THROWS_AS(make_optimizer("ranger", 1e-3), Error);

    struct Null final : Optimizer {
        void step(std::vector<double>&, const std::vector<double>&) override {}
    };
    register_optimizer("null", [](double) { return std::make_unique<Null>(); });
    CHECK(make_optimizer("null", 0.0) != nullptr);

    SUBCASE("adam moves parameters against the gradient") {
        auto opt = make_optimizer("adam", 0.1);
        std::vector<double> params = {1.0, -1.0};
        std::vector<double> grads = {0.5, -0.5};
        opt->step(params, grads);
        CHECK(params[0] < 1.0);
        CHECK(params[1] > -1.0);
    }
}

TEST_CASE("train: single epoch, checkpointing, reproducibility") {
    TrainRig rig;
    SUBCASE("max_epochs=1 leaves exactly one history entry") {
        rig.train_config.max_epochs = 1;
        rig.train_config.patience = 1;
        auto ckpt = train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config,
                          rig.train_config, "{}");
        CHECK(ckpt.history.size() == 1);
        CHECK(ckpt.best_epoch == 1);
        CHECK(ckpt.schema_hash == rig.synth.panel.schema_hash);
    }
    SUBCASE("same seed, single thread: identical parameters and history") {
        auto a = train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config,
                       rig.train_config, "{}");
        auto b = train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config,
                       rig.train_config, "{}");
        CHECK(flatten_params(a.params) == flatten_params(b.params));
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i) {
            CHECK(a.history[i].train_loss == b.history[i].train_loss);
            CHECK(a.history[i].val_loss == b.history[i].val_loss);
        }
    }
    SUBCASE("graph mode refuses random batching") {
        rig.train_config.batch_mode = BatchMode::random;
        CHECK_THROWS_WITH_AS(train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config,
                                   rig.train_config, "{}"),
                             doctest::Contains("synchronized"), Error);
    }
    SUBCASE("patience must not exceed max_epochs") {
        rig.train_config.patience = 10;
        rig.train_config.max_epochs = 5;
        CHECK_THROWS_AS(train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config,
                              rig.train_config, "{}"),
                        Error);
    }
}

TEST_CASE("train: baseline checkpoints carry no encoder parameters") {
    TrainRig rig;
    rig.model_config.graph_mode = false;
    rig.train_config.batch_mode = BatchMode::random;
    rig.train_config.max_epochs = 1;
    rig.train_config.patience = 1;
    auto ckpt =
        train(rig.synth.panel, rig.ranges, nullptr, rig.model_config, rig.train_config, "{}");
    CHECK_FALSE(ckpt.params.encoder.has_value());
    CHECK(ckpt.model_config.decoder.layout.embedding == 0);

    auto dir = test_support::scratch_dir("ckpt_baseline");
    save_checkpoint(ckpt, dir / "model.json");
    std::ifstream in(dir / "model.json");
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(blob.find("encoder") == std::string::npos);
}

TEST_CASE("train: checkpoint round-trip reproduces the validation loss") {
    TrainRig rig;
    rig.train_config.max_epochs = 2;
    rig.train_config.patience = 2;
    auto ckpt =
        train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config, rig.train_config, "{}");

    auto dir = test_support::scratch_dir("ckpt_roundtrip");
    save_checkpoint(ckpt, dir / "model.json");
    auto loaded = load_checkpoint(dir / "model.json");
    CHECK(flatten_params(loaded.params) == flatten_params(ckpt.params));
    CHECK(loaded.best_epoch == ckpt.best_epoch);
    CHECK(loaded.history.size() == ckpt.history.size());

    // evaluate both on the validation windows
    auto val_windows = make_windows(rig.synth.panel, 4, 2, rig.ranges.train_end,
                                    rig.ranges.val_end - 2);
    auto view = NeighborhoodView::full(rig.graph);
    LossOptions opts;
    opts.training = false;
    std::map<int, std::vector<Window>> by_anchor;
    for (const auto& w : val_windows.entries) by_anchor[w.anchor].push_back(w);
    double before = 0, after = 0;
    for (const auto& [anchor, group] : by_anchor) {
        before += batch_loss(rig.synth.panel, group, &rig.graph, &view, ckpt.model_config,
                             ckpt.params, opts, nullptr);
        after += batch_loss(rig.synth.panel, group, &rig.graph, &view, loaded.model_config,
                            loaded.params, opts, nullptr);
    }
    CHECK(std::abs(before - after) < 1e-6);
}

TEST_CASE("train: loss decreases on the clustered synthetic panel") {
    TrainRig rig;
    rig.train_config.max_epochs = 12;
    rig.train_config.patience = 12;
    rig.train_config.learning_rate = 5e-3;
    auto ckpt =
        train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config, rig.train_config, "{}");
    REQUIRE(ckpt.history.size() >= 2);
    CHECK(ckpt.history.back().train_loss < ckpt.history.front().train_loss);
}

TEST_CASE("train: no demand access beyond each batch's window during graph-mode training") {
    TrainRig rig;
    rig.train_config.max_epochs = 2;
    rig.train_config.patience = 2;
    AccessMonitor monitor;
    auto ckpt = train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config, rig.train_config,
                      "{}", &monitor);
    (void)ckpt;
    CHECK(monitor.reads > 0);
    CHECK(monitor.violations == 0);
}

TEST_CASE("train: divergence aborts naming the batch") {
    TrainRig rig;
    rig.train_config.learning_rate = 1e6;  // guaranteed blow-up
    rig.train_config.max_epochs = 30;
    rig.train_config.patience = 30;
    try {
        train(rig.synth.panel, rig.ranges, &rig.graph, rig.model_config, rig.train_config, "{}");
        // extreme rates may still survive; nothing to assert in that case
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
}

TEST_CASE("write_history emits the delimited schema") {
    auto dir = test_support::scratch_dir("history");
    write_history(dir / "history.csv", {{1, 0.5, 0.6}, {2, 0.4, 0.55}}, {{"config_hash", "ff"}});
    auto t = gdar::read_table(dir / "history.csv");
    CHECK(t.header == std::vector<std::string>{"epoch", "train_loss", "val_loss"});
    CHECK(t.rows.size() == 2);
    CHECK(t.meta.at("config_hash") == "ff");
}
