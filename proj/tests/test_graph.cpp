#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "graphnc/graph.hpp"
#include "graphnc/linalg.hpp"
#include "graphnc/rng.hpp"
#include "test_util.hpp"

using namespace graphnc;
using graph::AttributedGraph;
using linalg::DenseMatrix;
using testutil::ScratchDir;

namespace {

DenseMatrix densify_adjacency(const AttributedGraph& g) {
    DenseMatrix a(g.num_nodes, g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k) {
            a(i, g.col_indices[k]) = 1.0;
        }
    }
    return a;
}

// Dense reference for the symmetric normalization, the CSR oracle.
DenseMatrix dense_normalized(const AttributedGraph& g) {
    DenseMatrix a = densify_adjacency(g);
    for (std::size_t i = 0; i < g.num_nodes; ++i) a(i, i) = 1.0;
    std::vector<double> inv_sqrt_deg(g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < g.num_nodes; ++j) deg += a(i, j);
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        for (std::size_t j = 0; j < g.num_nodes; ++j) {
            a(i, j) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    return a;
}

DenseMatrix densify_normalized(const graph::NormalizedAdjacency& a_hat) {
    DenseMatrix out(a_hat.mat.rows, a_hat.mat.cols);
    for (std::size_t i = 0; i < a_hat.mat.rows; ++i) {
        for (std::size_t k = a_hat.mat.row_offsets[i]; k < a_hat.mat.row_offsets[i + 1];
             ++k) {
            out(i, a_hat.mat.col_indices[k]) = a_hat.mat.values[k];
        }
    }
    return out;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("make_graph symmetrizes a single edge") {
    DenseMatrix x(3, 2);
    const auto g = graph::make_graph(3, {{0, 1}}, x, std::nullopt);
    CHECK(g.num_nodes == 3);
    CHECK(g.attr_dim() == 2);
    CHECK(g.num_undirected_edges() == 1);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 0));
    CHECK(!g.has_edge(0, 2));
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(2) == 0);
    CHECK(!g.labels.has_value());
}

TEST_CASE("make_graph drops self-loops and exact repeats with a warning count") {
    DenseMatrix x(2, 1);
    graph::LoadStats stats;
    const auto g = graph::make_graph(2, {{0, 1}, {1, 0}, {0, 0}}, x, std::nullopt, &stats);
    CHECK(g.num_undirected_edges() == 1);
    // Reversed listing of the same undirected edge is conventional and silent;
    // only the self-loop warns.
    CHECK(stats.dropped_self_loops == 1);
    CHECK(stats.dropped_duplicates == 0);
    CHECK(stats.warning_count() == 1);

    graph::LoadStats stats2;
    const auto g2 =
        graph::make_graph(2, {{0, 1}, {0, 1}, {1, 0}}, x, std::nullopt, &stats2);
    CHECK(g2.num_undirected_edges() == 1);
    CHECK(stats2.dropped_duplicates == 1);
}

TEST_CASE("make_graph rejects out-of-range endpoints and bad shapes") {
    DenseMatrix x(3, 2);
    CHECK_THROWS_AS(graph::make_graph(3, {{0, 5}}, x, std::nullopt), DimensionError);
    std::vector<std::uint8_t> short_labels = {0, 1};
    CHECK_THROWS_AS(graph::make_graph(3, {{0, 1}}, x, short_labels), DimensionError);
    DenseMatrix wrong_rows(2, 2);
    CHECK_THROWS_AS(graph::make_graph(3, {{0, 1}}, wrong_rows, std::nullopt),
                    DimensionError);
}

TEST_CASE("validate rejects a labeled-normal anomaly") {
    auto g = testutil::small_graph();
    g.labeled_normal[2] = 1;  // node 2 is an anomaly in the fixture
    CHECK_THROWS_AS(graph::validate(g), FormatError);
}

TEST_CASE("validate rejects hand-built asymmetric or malformed adjacency") {
    auto g = testutil::small_graph();
    SUBCASE("asymmetric") {
        // Remove one direction of the (0,1) edge.
        auto broken = g;
        const auto begin = broken.col_indices.begin() + broken.row_offsets[0];
        const auto end = broken.col_indices.begin() + broken.row_offsets[1];
        const auto it = std::find(begin, end, std::size_t{1});
        REQUIRE(it != end);
        broken.col_indices.erase(it);
        for (std::size_t r = 1; r <= broken.num_nodes; ++r) broken.row_offsets[r]--;
        CHECK_THROWS_AS(graph::validate(broken), FormatError);
    }
    SUBCASE("self-loop") {
        auto broken = g;
        broken.col_indices[broken.row_offsets[0]] = 0;
        CHECK_THROWS_AS(graph::validate(broken), FormatError);
    }
    SUBCASE("non-finite attribute") {
        auto broken = g;
        broken.attributes(0, 0) = std::nan("");
        CHECK_THROWS_AS(graph::validate(broken), FormatError);
    }
}

TEST_CASE("save and load round-trip bit-exactly") {
    ScratchDir dir("roundtrip");
    const auto g = testutil::small_graph(5, 77);
    graph::save_graph(g, dir.path());
    for (const char* name : {"edges.tsv", "features.tsv", "labels.tsv", "meta.json"}) {
        CHECK(std::filesystem::exists(dir / name));
    }
    const auto g2 = graph::load_graph(dir.path());
    CHECK(g2.num_nodes == g.num_nodes);
    CHECK(g2.row_offsets == g.row_offsets);
    CHECK(g2.col_indices == g.col_indices);
    CHECK(linalg::bitwise_equal(g2.attributes, g.attributes));
    REQUIRE(g2.labels.has_value());
    CHECK(*g2.labels == *g.labels);
    // The mask is a training-time artifact, not part of the dataset.
    CHECK(g2.num_labeled_normal() == 0);
}

TEST_CASE("load_graph reports missing files by name") {
    ScratchDir dir("missing");
    CHECK_THROWS_WITH_AS(graph::load_graph(dir.path()),
                         doctest::Contains("features.tsv"), IoError);
    testutil::write_file(dir / "features.tsv", "0\t1.0\n1\t2.0\n");
    CHECK_THROWS_WITH_AS(graph::load_graph(dir.path()),
                         doctest::Contains("edges.tsv"), IoError);
}

TEST_CASE("load_graph flags malformed lines with their line number") {
    ScratchDir dir("badlines");
    testutil::write_file(dir / "features.tsv", "0\t1.0\n1\t2.0\n2\t3.0\n");
    SUBCASE("edge endpoint out of range") {
        testutil::write_file(dir / "edges.tsv", "0\t1\n1\t9\n");
        CHECK_THROWS_WITH_AS(graph::load_graph(dir.path()), doctest::Contains("line 2"),
                             FormatError);
    }
    SUBCASE("non-numeric attribute") {
        testutil::write_file(dir / "features.tsv", "0\t1.0\n1\tpotato\n2\t3.0\n");
        testutil::write_file(dir / "edges.tsv", "0\t1\n");
        CHECK_THROWS_WITH_AS(graph::load_graph(dir.path()), doctest::Contains("line 2"),
                             FormatError);
    }
    SUBCASE("duplicate node id in features") {
        testutil::write_file(dir / "features.tsv", "0\t1.0\n0\t2.0\n2\t3.0\n");
        testutil::write_file(dir / "edges.tsv", "0\t1\n");
        CHECK_THROWS_AS(graph::load_graph(dir.path()), FormatError);
    }
    SUBCASE("label other than 0/1") {
        testutil::write_file(dir / "edges.tsv", "0\t1\n");
        testutil::write_file(dir / "labels.tsv", "0\t0\n1\t2\n2\t0\n");
        CHECK_THROWS_WITH_AS(graph::load_graph(dir.path()), doctest::Contains("line 2"),
                             FormatError);
    }
}

TEST_CASE("labels file may omit nodes, which default to normal") {
    ScratchDir dir("sparselabels");
    testutil::write_file(dir / "features.tsv", "0\t1.0\n1\t2.0\n2\t3.0\n");
    testutil::write_file(dir / "edges.tsv", "0\t1\n");
    testutil::write_file(dir / "labels.tsv", "1\t1\n");
    const auto g = graph::load_graph(dir.path());
    REQUIRE(g.labels.has_value());
    CHECK(*g.labels == std::vector<std::uint8_t>{0, 1, 0});
}

TEST_CASE("load_graph works without labels and tolerates shuffled ids") {
    ScratchDir dir("nolabels");
    testutil::write_file(dir / "features.tsv", "2\t3.0\t30\n0\t1.0\t10\n1\t2.0\t20\n");
    testutil::write_file(dir / "edges.tsv", "2\t0\n");
    const auto g = graph::load_graph(dir.path());
    CHECK(!g.labels.has_value());
    CHECK(g.attributes(0, 0) == 1.0);
    CHECK(g.attributes(2, 1) == 30.0);
    CHECK(g.has_edge(0, 2));
}

TEST_CASE("load_graph validates meta.json against the data when present") {
    ScratchDir dir("meta");
    testutil::write_file(dir / "features.tsv", "0\t1.0\n1\t2.0\n");
    testutil::write_file(dir / "edges.tsv", "0\t1\n");
    testutil::write_file(dir / "meta.json", "{\"num_nodes\": 5, \"attr_dim\": 1}\n");
    CHECK_THROWS_WITH_AS(graph::load_graph(dir.path()),
                         doctest::Contains("num_nodes"), FormatError);
}

TEST_CASE("normalized adjacency of isolated nodes is the identity") {
    DenseMatrix x(2, 1);
    const auto g = graph::make_graph(2, {}, x, std::nullopt);
    const auto a_hat = graph::normalize_adjacency(g);
    CHECK(a_hat.mat.nnz() == 2);
    const auto dense = densify_normalized(a_hat);
    CHECK(dense(0, 0) == 1.0);
    CHECK(dense(1, 1) == 1.0);
    CHECK(dense(0, 1) == 0.0);
}

TEST_CASE("normalized adjacency of a single edge is the all-half matrix") {
    DenseMatrix x(2, 1);
    const auto g = graph::make_graph(2, {{0, 1}}, x, std::nullopt);
    const auto dense = densify_normalized(graph::normalize_adjacency(g));
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) CHECK(dense(i, j) == doctest::Approx(0.5));
    }
}

TEST_CASE("normalized adjacency matches the dense oracle on random graphs") {
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
        const auto g = testutil::random_graph(20, 3, 0.2, seed);
        const auto got = densify_normalized(graph::normalize_adjacency(g));
        const auto want = dense_normalized(g);
        for (std::size_t i = 0; i < 20; ++i) {
            for (std::size_t j = 0; j < 20; ++j) {
                CHECK(std::abs(got(i, j) - want(i, j)) < 1e-12);
            }
        }
        // Symmetry, value range, strictly positive diagonal.
        for (std::size_t i = 0; i < 20; ++i) {
            CHECK(got(i, i) > 0.0);
            for (std::size_t j = 0; j < 20; ++j) {
                CHECK(got(i, j) == got(j, i));
                CHECK(got(i, j) <= 1.0);
                CHECK(got(i, j) >= 0.0);
            }
        }
    }
}

TEST_CASE("split marks exactly the floored fraction of normal nodes") {
    // 100 normals + 10 anomalies at ratio 0.15 -> exactly 15 labeled normals.
    Rng rng(5);
    DenseMatrix x = testutil::random_dense(110, 3, rng);
    std::vector<std::uint8_t> labels(110, 0);
    for (std::size_t i = 100; i < 110; ++i) labels[i] = 1;
    const auto g = graph::make_graph(110, {{0, 1}}, x, labels);

    const auto split = graph::split_labeled_normals(g, 0.15, 9);
    CHECK(split.num_labeled_normal() == 15);
    for (const auto i : split.labeled_normal_indices()) CHECK((*split.labels)[i] == 0);

    // The classic floating-point floor hazard: 0.3 * 10 must give 3, not 2.
    DenseMatrix x2(10, 1);
    const auto g2 = graph::make_graph(10, {}, x2, std::vector<std::uint8_t>(10, 0));
    CHECK(graph::split_labeled_normals(g2, 0.3, 1).num_labeled_normal() == 3);

    CHECK(graph::split_labeled_normals(g, 1.0, 2).num_labeled_normal() == 100);
}

TEST_CASE("split is deterministic per seed and varies across seeds") {
    const auto g = testutil::random_graph(60, 3, 0.1, 21);
    const auto a = graph::split_labeled_normals(g, 0.4, 7);
    const auto b = graph::split_labeled_normals(g, 0.4, 7);
    CHECK(a.labeled_normal == b.labeled_normal);
    const auto c = graph::split_labeled_normals(g, 0.4, 8);
    CHECK(a.labeled_normal != c.labeled_normal);
}

TEST_CASE("split rejects bad inputs") {
    const auto g = testutil::small_graph();
    CHECK_THROWS_AS(graph::split_labeled_normals(g, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(graph::split_labeled_normals(g, 1.5, 1), ConfigError);

    DenseMatrix x(3, 1);
    const auto unlabeled = graph::make_graph(3, {}, x, std::nullopt);
    CHECK_THROWS_AS(graph::split_labeled_normals(unlabeled, 0.5, 1), ConfigError);

    const auto all_anomalous =
        graph::make_graph(3, {}, x, std::vector<std::uint8_t>{1, 1, 1});
    CHECK_THROWS_AS(graph::split_labeled_normals(all_anomalous, 0.5, 1), Error);
}

TEST_CASE("synthetic generator plants the exact anomaly counts") {
    graph::SyntheticConfig cfg;
    cfg.num_nodes = 1000;
    cfg.contextual_anomaly_rate = 0.03;
    cfg.structural_anomaly_rate = 0.02;
    const auto g = graph::generate_synthetic(cfg, 4);
    graph::validate(g);
    REQUIRE(g.labels.has_value());
    std::size_t anomalies = 0;
    for (const auto l : *g.labels) anomalies += l;
    CHECK(anomalies == 50);
}

TEST_CASE("synthetic generator is deterministic per seed") {
    graph::SyntheticConfig cfg;
    cfg.num_nodes = 300;
    const auto a = graph::generate_synthetic(cfg, 11);
    const auto b = graph::generate_synthetic(cfg, 11);
    CHECK(a.col_indices == b.col_indices);
    CHECK(linalg::bitwise_equal(a.attributes, b.attributes));
    CHECK(*a.labels == *b.labels);
    const auto c = graph::generate_synthetic(cfg, 12);
    CHECK(!linalg::bitwise_equal(a.attributes, c.attributes));
}

TEST_CASE("synthetic generator rejects zero planted anomalies") {
    graph::SyntheticConfig cfg;
    cfg.num_nodes = 10;
    cfg.contextual_anomaly_rate = 0.0;
    cfg.structural_anomaly_rate = 0.0;
    CHECK_THROWS_AS(graph::generate_synthetic(cfg, 1), ConfigError);
}

TEST_CASE("structural rate zero plants no cliques") {
    graph::SyntheticConfig cfg;
    cfg.num_nodes = 400;
    cfg.contextual_anomaly_rate = 0.05;
    cfg.structural_anomaly_rate = 0.0;
    cfg.clique_size = 10;
    const auto g = graph::generate_synthetic(cfg, 2);
    // Contextual anomalies keep the background wiring, so no node should come
    // close to clique-degree inflation beyond the intra-cluster baseline.
    std::size_t max_degree = 0;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        max_degree = std::max(max_degree, g.degree(i));
    }
    CHECK(max_degree < 30);
}

TEST_CASE("planted anomalies sit farther from their cluster centroid") {
    graph::SyntheticConfig cfg;
    cfg.num_nodes = 600;
    cfg.num_clusters = 4;
    const auto g = graph::generate_synthetic(cfg, 8);

    // Cluster assignment is round-robin by construction; estimate centroids
    // from the normal nodes only, then compare mean distances.
    const std::size_t k = cfg.num_clusters;
    std::vector<DenseMatrix> sums(k, DenseMatrix(1, g.attr_dim()));
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if ((*g.labels)[i] != 0) continue;
        for (std::size_t j = 0; j < g.attr_dim(); ++j) {
            sums[i % k](0, j) += g.attributes(i, j);
        }
        counts[i % k] += 1.0;
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < g.attr_dim(); ++j) sums[c](0, j) /= counts[c];
    }
    double normal_dist = 0.0, anomaly_dist = 0.0, n_norm = 0.0, n_anom = 0.0;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < g.attr_dim(); ++j) {
            const double diff = g.attributes(i, j) - sums[i % k](0, j);
            d2 += diff * diff;
        }
        if ((*g.labels)[i] == 0) {
            normal_dist += std::sqrt(d2);
            n_norm += 1.0;
        } else {
            anomaly_dist += std::sqrt(d2);
            n_anom += 1.0;
        }
    }
    CHECK(anomaly_dist / n_anom > normal_dist / n_norm);
}

TEST_CASE("mask_attributes boundaries and exact counts") {
    auto g = testutil::random_graph(30, 10, 0.1, 31);

    const auto same = graph::mask_attributes(g, 0.0, 5);
    CHECK(linalg::bitwise_equal(same, g.attributes));

    const auto full = graph::mask_attributes(g, 1.0, 5);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        for (std::size_t j = 0; j < g.attr_dim(); ++j) {
            if (g.labeled_normal[i]) {
                CHECK(full(i, j) == 0.0);
            } else {
                CHECK(full(i, j) == g.attributes(i, j));
            }
        }
    }

    // omega = 0.3, M = 10 -> exactly 3 zeroed positions per labeled row.
    const auto masked = graph::mask_attributes(g, 0.3, 5);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        std::size_t zeros = 0;
        for (std::size_t j = 0; j < g.attr_dim(); ++j) {
            if (masked(i, j) == 0.0 && g.attributes(i, j) != 0.0) zeros++;
        }
        if (g.labeled_normal[i]) {
            CHECK(zeros == 3);
        } else {
            CHECK(zeros == 0);
        }
    }
}

TEST_CASE("mask_attributes is deterministic and node-independent") {
    const auto g = testutil::random_graph(40, 12, 0.1, 33);
    const auto a = graph::mask_attributes(g, 0.5, 9);
    const auto b = graph::mask_attributes(g, 0.5, 9);
    CHECK(linalg::bitwise_equal(a, b));
    const auto c = graph::mask_attributes(g, 0.5, 10);
    CHECK(!linalg::bitwise_equal(a, c));

    // Different labeled nodes should not all share one mask pattern.
    const auto labeled = g.labeled_normal_indices();
    REQUIRE(labeled.size() >= 2);
    std::set<std::vector<bool>> patterns;
    for (const auto i : labeled) {
        std::vector<bool> pattern;
        for (std::size_t j = 0; j < g.attr_dim(); ++j) {
            pattern.push_back(a(i, j) == 0.0 && g.attributes(i, j) != 0.0);
        }
        patterns.insert(pattern);
    }
    CHECK(patterns.size() > 1);
}

TEST_CASE("mask_attributes rejects omega outside the unit interval") {
    const auto g = testutil::small_graph();
    CHECK_THROWS_AS(graph::mask_attributes(g, -0.1, 1), ConfigError);
    CHECK_THROWS_AS(graph::mask_attributes(g, 1.1, 1), ConfigError);
}

}  // TEST_SUITE
