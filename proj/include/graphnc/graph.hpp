#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "graphnc/common.hpp"
#include "graphnc/linalg.hpp"

namespace graphnc::graph {

// Undirected attributed graph with optional ground-truth anomaly labels and
// the labeled-normal training mask. Immutable after construction: every
// operation that "changes" a graph returns a new value.
struct AttributedGraph {
    std::size_t num_nodes = 0;
    // Symmetric adjacency pattern in CSR form: no self-loops, no duplicates,
    // column indices strictly increasing within each row.
    std::vector<std::size_t> row_offsets;  // length num_nodes + 1
    std::vector<std::size_t> col_indices;
    linalg::DenseMatrix attributes;                   // num_nodes x attr_dim
    std::optional<std::vector<std::uint8_t>> labels;  // 1 = anomaly, 0 = normal
    std::vector<std::uint8_t> labeled_normal;         // training mask, length num_nodes

    std::size_t attr_dim() const { return attributes.cols(); }
    std::size_t degree(std::size_t i) const { return row_offsets[i + 1] - row_offsets[i]; }
    std::size_t num_undirected_edges() const { return col_indices.size() / 2; }
    bool has_edge(std::size_t i, std::size_t j) const;
    std::size_t num_labeled_normal() const;
    std::vector<std::size_t> labeled_normal_indices() const;
};

// Symmetrically normalized adjacency with self-loops:
// values are (A + I) scaled by 1/sqrt(deg_i * deg_j) with deg the A + I degrees.
struct NormalizedAdjacency {
    linalg::CsrMatrix mat;

    std::size_t num_nodes() const { return mat.rows; }
};

struct SyntheticConfig {
    std::size_t num_nodes = 2000;
    std::size_t attr_dim = 16;
    std::size_t num_clusters = 4;
    double contextual_anomaly_rate = 0.03;  // attribute outliers
    double structural_anomaly_rate = 0.02;  // planted-clique members
    std::size_t clique_size = 8;
    double feature_noise_scale = 1.0;
};

// Counts of malformed-but-recoverable edge lines dropped during construction.
struct LoadStats {
    std::size_t dropped_self_loops = 0;
    std::size_t dropped_duplicates = 0;  // exact ordered-pair repeats

    std::size_t warning_count() const { return dropped_self_loops + dropped_duplicates; }
};

// Builds a validated graph from an edge list. Edges are treated as
// undirected: the stored adjacency is the symmetrized union of both
// directions. Self-loops and exact repeats of an already-seen ordered pair
// are dropped and counted in stats; listing an edge once in each direction
// is the conventional undirected encoding and draws no warning.
AttributedGraph make_graph(std::size_t num_nodes,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           linalg::DenseMatrix attributes,
                           std::optional<std::vector<std::uint8_t>> labels,
                           LoadStats* stats = nullptr);

// Throws if any structural invariant is violated (asymmetry, unsorted or
// duplicate columns, self-loops, shape mismatches, labeled-normal anomalies).
void validate(const AttributedGraph& g);

// Reads `edges.tsv`, `features.tsv`, optional `labels.tsv`, and optional
// `meta.json` (validation only) from dataset_dir.
AttributedGraph load_graph(const std::filesystem::path& dataset_dir,
                           LoadStats* stats = nullptr);

// Writes the same layout `load_graph` reads; numeric text round-trips
// bit-exactly. Creates the directory if needed.
void save_graph(const AttributedGraph& g, const std::filesystem::path& dataset_dir);

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g);

// Returns a copy of g whose labeled_normal mask marks
// floor(ratio * #normal-nodes) uniformly sampled normal nodes.
AttributedGraph split_labeled_normals(const AttributedGraph& g, double ratio,
                                      std::uint64_t seed);

// Clustered normal nodes (Gaussian attribute clusters, intra-cluster random
// edges) with two planted anomaly types: contextual anomalies keep their
// edges but draw attributes from a wrong, inflated cluster distribution;
// structural anomalies keep their attributes but are wired into cliques.
AttributedGraph generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

// Returns a copy of the attribute matrix where each labeled-normal row has
// exactly floor(omega * attr_dim) positions (chosen uniformly without
// replacement, independently per node) set to 0. Other rows are untouched.
linalg::DenseMatrix mask_attributes(const AttributedGraph& g, double omega,
                                    std::uint64_t seed);

}  // namespace graphnc::graph
