#include <algorithm>
#include <set>

#include "doctest.h"
#include "gdar/graph.hpp"
#include "support.hpp"

using namespace gdar;
using test_support::brute_force_edges;
using test_support::edge_tuples;
using test_support::random_matrix;

TEST_CASE("pairwise similarity: worked values") {
    Eigen::MatrixXd x(4, 3);
    x << 1, 2, 3,   // 0
        1, 2, 3,    // 1: identical to 0
        1, 0, 0,    // 2
        0, 1, 0;    // 3
    auto norms = row_norms(x);
    CHECK(cosine_pair(x, 0, 1, norms) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_pair(x, 2, 3, norms) == doctest::Approx(0.0).epsilon(1e-12));

    Eigen::MatrixXd y(2, 2);
    y << 1, 0, 1, 1;
    auto ny = row_norms(y);
    CHECK(cosine_pair(y, 0, 1, ny) == doctest::Approx(0.7071067811865475).epsilon(1e-9));
}

TEST_CASE("pairwise similarity: zero-norm rows and non-finite rejection") {
    Eigen::MatrixXd x(3, 2);
    x << 0, 0, 1, 1, 2, 2;
    std::vector<double> sims;
    pairwise_similarity_serial(x, [&](int, int, double s) { sims.push_back(s); });
    CHECK(sims[0] == 0.0);  // (0,1)
    CHECK(sims[1] == 0.0);  // (0,2)
    CHECK(sims[2] == doctest::Approx(1.0));

    x(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(pairwise_similarity_serial(x, [](int, int, double) {}),
                         doctest::Contains("row 1"), Error);
}

TEST_CASE("chunked kernel matches the serial reference and brute force bit for bit") {
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 3 + (trial * 7) % 58;
        const int m = 1 + trial % 9;
        Eigen::MatrixXd x = random_matrix(n, m, 1000 + trial);
        if (trial % 4 == 0) x.row(trial % n).setZero();

        std::vector<std::tuple<int, int, double>> serial;
        pairwise_similarity_serial(
            x, [&](int i, int j, double s) { serial.emplace_back(i, j, s); });
        std::sort(serial.begin(), serial.end());

        for (int chunk : {1, 7, n}) {
            std::vector<std::tuple<int, int, double>> chunked;
            pairwise_similarity(
                x, chunk, [&](int i, int j, double s) { chunked.emplace_back(i, j, s); });
            std::sort(chunked.begin(), chunked.end());
            REQUIRE(chunked.size() == serial.size());
            for (std::size_t k = 0; k < serial.size(); ++k) CHECK(chunked[k] == serial[k]);
        }

        for (double tau : {0.5, 0.9, 0.95}) {
            auto oracle = brute_force_edges(x, tau);
            for (int chunk : {1, 7, n})
                CHECK(edge_tuples(build_graph(x, tau, chunk)) == oracle);
        }
    }
}

TEST_CASE("build_graph: worked examples and inclusive threshold") {
    SUBCASE("three identical articles form a triangle") {
        Eigen::MatrixXd x(3, 2);
        x << 1, 2, 1, 2, 1, 2;
        auto g = build_graph(x, 0.95, 2);
        CHECK(g.edges.size() == 3);
        for (int d : g.degree) CHECK(d == 2);
    }
    SUBCASE("scores {0.96, 0.90, 0.40} with tau 0.95 keep one edge") {
        auto g = build_graph_from_scores(3, {{0, 1, 0.96}, {0, 2, 0.90}, {1, 2, 0.40}}, 0.95);
        CHECK(g.edges.size() == 1);
        CHECK(g.degree[2] == 0);
        CHECK(graph_stats(g).isolated_fraction == doctest::Approx(1.0 / 3));
    }
    SUBCASE("similarity exactly at the threshold connects (>= tau)") {
        auto g = build_graph_from_scores(2, {{0, 1, 1.0}}, 1.0);
        CHECK(g.edges.size() == 1);
    }
    SUBCASE("threshold outside (-1,1] is rejected") {
        CHECK_THROWS_AS(build_graph_from_scores(2, {}, -1.0), Error);
        CHECK_THROWS_AS(build_graph_from_scores(2, {}, 1.5), Error);
    }
}

TEST_CASE("threshold monotonicity and symmetry properties") {
    for (int trial = 0; trial < 6; ++trial) {
        Eigen::MatrixXd x = random_matrix(25, 4, 2000 + trial, 0.0, 1.0);
        auto loose = build_graph(x, 0.5, 8);
        auto tight = build_graph(x, 0.9, 8);
        auto loose_set = edge_tuples(loose);
        for (auto& e : edge_tuples(tight))
            CHECK(std::find(loose_set.begin(), loose_set.end(), e) != loose_set.end());

        for (int i = 0; i < loose.n_nodes; ++i)
            for (int j : loose.neighbors[i]) {
                const auto& back = loose.neighbors[j];
                CHECK(std::find(back.begin(), back.end(), i) != back.end());
            }
    }
}

TEST_CASE("permutation equivariance of the edge set") {
    Eigen::MatrixXd x = random_matrix(18, 5, 77, 0.0, 1.0);
    auto base = build_graph(x, 0.8, 5);

    std::vector<int> perm(18);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(5);
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[bounded(rng, k)]);

    Eigen::MatrixXd xp(18, 5);
    for (int i = 0; i < 18; ++i) xp.row(perm[i]) = x.row(i);
    auto permuted = build_graph(xp, 0.8, 5);

    std::set<std::pair<int, int>> expected;
    for (const auto& e : base.edges) {
        int a = perm[e.src], b = perm[e.dst];
        expected.emplace(std::min(a, b), std::max(a, b));
    }
    std::set<std::pair<int, int>> got;
    for (const auto& e : permuted.edges) got.emplace(e.src, e.dst);
    CHECK(got == expected);
}

TEST_CASE("sample_neighborhood: caps, identity, determinism, no added edges") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(6, 2);  // complete graph on 6 nodes
    auto g = build_graph(x, 0.95, 3);
    REQUIRE(g.degree[0] == 5);

    auto view = sample_neighborhood(g, 2, 123);
    for (int i = 0; i < g.n_nodes; ++i) CHECK(view.incoming[i].size() == 2);

    auto same = sample_neighborhood(g, 2, 123);
    for (int i = 0; i < g.n_nodes; ++i) CHECK(view.incoming[i] == same.incoming[i]);

    auto unchanged = sample_neighborhood(g, 5, 123);
    for (int i = 0; i < g.n_nodes; ++i) CHECK(unchanged.incoming[i] == g.neighbors[i]);

    for (int trial = 0; trial < 8; ++trial) {
        Eigen::MatrixXd r = random_matrix(20, 3, 3000 + trial, 0.0, 1.0);
        auto graph = build_graph(r, 0.7, 6);
        auto v = sample_neighborhood(graph, 3, trial);
        for (int i = 0; i < graph.n_nodes; ++i) {
            CHECK(static_cast<int>(v.incoming[i].size()) <= 3);
            for (int j : v.incoming[i]) {
                const auto& full = graph.neighbors[i];
                CHECK(std::find(full.begin(), full.end(), j) != full.end());
            }
        }
    }
}

TEST_CASE("window_node_features: lags, degree channel, monitor") {
    auto panel = test_support::tiny_panel(3, 12, 21);
    panel.demand(0, 7) = 2;  // weeks 8,9,10 for article 0
    panel.demand(0, 8) = 4;
    panel.demand(0, 9) = 6;
    auto g = build_graph_from_scores(3, {{0, 1, 0.99}}, 0.95);  // node 2 isolated

    SUBCASE("P=1, lag=1: row is (y_t, normalized degree)") {
        auto w = window_node_features(g, panel, 10, 1, 1);
        REQUIRE(w.steps.size() == 1);
        CHECK(w.steps[0](0, 0) == panel.demand(0, 9));
        CHECK(w.steps[0](0, 1) == doctest::Approx(1.0));  // degree 1 / max degree 1
        CHECK(w.steps[0](2, 1) == 0.0);                   // isolated
    }
    SUBCASE("P=3 steps carry (2,4,6)") {
        auto w = window_node_features(g, panel, 10, 3, 1);
        REQUIRE(w.steps.size() == 3);
        CHECK(w.steps[0](0, 0) == 2);
        CHECK(w.steps[1](0, 0) == 4);
        CHECK(w.steps[2](0, 0) == 6);
    }
    SUBCASE("unavailable weeks contribute zero") {
        panel.available(0, 8) = false;
        auto w = window_node_features(g, panel, 10, 3, 1);
        CHECK(w.steps[1](0, 0) == 0.0);
    }
    SUBCASE("monitor sees only weeks up to the anchor") {
        AccessMonitor monitor;
        monitor.graph_limit = 10;
        window_node_features(g, panel, 10, 3, 2, &monitor);
        CHECK(monitor.violations == 0);
        CHECK(monitor.reads == 3LL * 3 * 2);
        monitor.graph_limit = 9;
        window_node_features(g, panel, 10, 3, 2, &monitor);
        CHECK(monitor.violations > 0);
    }
    SUBCASE("not enough history is rejected") {
        CHECK_THROWS_AS(window_node_features(g, panel, 2, 3, 1), Error);
    }
}

TEST_CASE("graph_stats: worked examples") {
    SUBCASE("empty edge set") {
        auto g = build_graph_from_scores(10, {}, 0.5);
        auto s = graph_stats(g);
        CHECK(s.mean_degree == 0.0);
        CHECK(s.isolated_fraction == 1.0);
        CHECK(s.edge_count == 0);
    }
    SUBCASE("triangle") {
        auto g = build_graph_from_scores(3, {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}}, 0.5);
        auto s = graph_stats(g);
        CHECK(s.mean_degree == doctest::Approx(2.0));
        CHECK(s.isolated_fraction == 0.0);
    }
    SUBCASE("path a-b-c") {
        auto g = build_graph_from_scores(3, {{0, 1, 1}, {1, 2, 1}}, 0.5);
        auto s = graph_stats(g);
        CHECK(s.mean_degree == doctest::Approx(4.0 / 3));
        CHECK(s.isolated_fraction == 0.0);
    }
}

TEST_CASE("graph save/load round-trip") {
    auto dir = test_support::scratch_dir("graph_io");
    Eigen::MatrixXd x = random_matrix(12, 4, 55, 0.0, 1.0);
    auto g = build_graph(x, 0.7, 5);
    std::vector<std::string> ids;
    for (int i = 0; i < 12; ++i) ids.push_back("A" + std::to_string(i));

    save_graph(g, ids, dir / "graph.csv", dir / "graph.meta.json",
               {{"schema_hash", "abc123"}});
    auto loaded = load_graph(dir / "graph.csv", dir / "graph.meta.json", ids);
    CHECK(loaded.meta.at("schema_hash") == "abc123");
    CHECK(loaded.graph.threshold == g.threshold);
    REQUIRE(loaded.graph.edges.size() == g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        CHECK(loaded.graph.edges[i].src == g.edges[i].src);
        CHECK(loaded.graph.edges[i].dst == g.edges[i].dst);
        CHECK(loaded.graph.edges[i].similarity == g.edges[i].similarity);
    }

    std::vector<std::string> wrong = ids;
    wrong[0] = "ZZZ";
    CHECK_THROWS_WITH_AS(load_graph(dir / "graph.csv", dir / "graph.meta.json", wrong),
                         doctest::Contains("unknown article"), Error);
}

TEST_CASE("synthetic clusters: complete within, empty across at tau 0.95") {
    SynthSpec spec;  // 60 articles, 12 clusters
    spec.seed = 7;
    auto synth = generate_synthetic_panel(spec);
    auto g = build_graph(synth.panel.static_features, 0.95, 16);

    std::set<std::pair<int, int>> edges;
    for (const auto& e : g.edges) edges.emplace(e.src, e.dst);
    for (int i = 0; i < spec.n_articles; ++i)
        for (int j = i + 1; j < spec.n_articles; ++j) {
            const bool same = synth.cluster[i] == synth.cluster[j];
            CHECK(edges.count({i, j}) == (same ? 1u : 0u));
        }
    CHECK(graph_stats(g).isolated_fraction == 0.0);
}
