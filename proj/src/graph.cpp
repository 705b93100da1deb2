#include "graphnc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "graphnc/rng.hpp"
#include "text_io.hpp"

namespace graphnc::graph {

namespace {

// Per-operation RNG stream tags so ops sharing a seed stay independent.
constexpr std::uint64_t kStreamGenerate = 11;
constexpr std::uint64_t kStreamSplit = 12;
constexpr std::uint64_t kStreamMask = 13;

// Synthetic-generator shape constants. Chosen so that the planted anomalies
// are clearly present but not trivially separable: detectors should land
// well above chance and visibly below perfect.
constexpr double kClusterCenterScale = 3.0;    // spread of cluster centers
constexpr double kContextualNoiseBoost = 2.5;  // attribute-noise inflation
constexpr std::size_t kIntraClusterLinks = 4;  // sampled partners per node

// floor(rate * count), guarded against the decimal rate sitting one ulp below
// its intended value (0.3 * 10 must count as 3, not 2).
std::size_t floor_fraction(double rate, std::size_t count) {
    return static_cast<std::size_t>(rate * static_cast<double>(count) + 1e-9);
}

}  // namespace

bool AttributedGraph::has_edge(std::size_t i, std::size_t j) const {
    const auto begin = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    const auto end = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    return std::binary_search(begin, end, j);
}

std::size_t AttributedGraph::num_labeled_normal() const {
    std::size_t count = 0;
    for (const auto flag : labeled_normal) count += flag != 0;
    return count;
}

std::vector<std::size_t> AttributedGraph::labeled_normal_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labeled_normal.size(); ++i) {
        if (labeled_normal[i]) idx.push_back(i);
    }
    return idx;
}

AttributedGraph make_graph(std::size_t num_nodes,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           linalg::DenseMatrix attributes,
                           std::optional<std::vector<std::uint8_t>> labels,
                           LoadStats* stats) {
    if (attributes.rows() != num_nodes) {
        throw DimensionError("make_graph: attribute rows (" +
                             std::to_string(attributes.rows()) + ") != num_nodes (" +
                             std::to_string(num_nodes) + ")");
    }
    if (labels && labels->size() != num_nodes) {
        throw DimensionError("make_graph: label count != num_nodes");
    }

    LoadStats local;
    std::unordered_set<std::uint64_t> seen_ordered;
    seen_ordered.reserve(edges.size() * 2);
    std::vector<std::vector<std::size_t>> adjacency(num_nodes);
    for (const auto& [src, dst] : edges) {
        if (src >= num_nodes || dst >= num_nodes) {
            throw DimensionError("make_graph: edge (" + std::to_string(src) + ", " +
                                 std::to_string(dst) + ") out of range for " +
                                 std::to_string(num_nodes) + " nodes");
        }
        if (src == dst) {
            ++local.dropped_self_loops;
            continue;
        }
        const std::uint64_t key =
            static_cast<std::uint64_t>(src) * num_nodes + static_cast<std::uint64_t>(dst);
        if (!seen_ordered.insert(key).second) {
            ++local.dropped_duplicates;
            continue;
        }
        adjacency[src].push_back(dst);
        adjacency[dst].push_back(src);
    }

    AttributedGraph g;
    g.num_nodes = num_nodes;
    g.attributes = std::move(attributes);
    g.labels = std::move(labels);
    g.labeled_normal.assign(num_nodes, 0);
    g.row_offsets.resize(num_nodes + 1, 0);
    for (std::size_t i = 0; i < num_nodes; ++i) {
        auto& row = adjacency[i];
        std::sort(row.begin(), row.end());
        // Listing an edge once per direction is legitimate undirected input;
        // it lands here as the same neighbor twice and is merged silently.
        row.erase(std::unique(row.begin(), row.end()), row.end());
        g.row_offsets[i + 1] = g.row_offsets[i] + row.size();
    }
    g.col_indices.reserve(g.row_offsets[num_nodes]);
    for (const auto& row : adjacency) {
        g.col_indices.insert(g.col_indices.end(), row.begin(), row.end());
    }

    if (stats) *stats = local;
    validate(g);
    return g;
}

void validate(const AttributedGraph& g) {
    if (g.row_offsets.size() != g.num_nodes + 1 || g.row_offsets.front() != 0 ||
        g.row_offsets.back() != g.col_indices.size()) {
        throw FormatError("graph: malformed CSR offsets");
    }
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if (g.row_offsets[i] > g.row_offsets[i + 1]) {
            throw FormatError("graph: CSR offsets not monotone");
        }
        for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k) {
            const std::size_t j = g.col_indices[k];
            if (j >= g.num_nodes) throw FormatError("graph: column index out of range");
            if (j == i) throw FormatError("graph: stored self-loop at node " +
                                          std::to_string(i));
            if (k > g.row_offsets[i] && g.col_indices[k - 1] >= j) {
                throw FormatError("graph: columns not strictly increasing in row " +
                                  std::to_string(i));
            }
            if (!g.has_edge(j, i)) {
                throw FormatError("graph: adjacency not symmetric at (" +
                                  std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }
    if (g.attributes.rows() != g.num_nodes) {
        throw DimensionError("graph: attribute rows != num_nodes");
    }
    if (!g.attributes.all_finite()) {
        throw FormatError("graph: non-finite attribute value");
    }
    if (g.labels && g.labels->size() != g.num_nodes) {
        throw DimensionError("graph: label count != num_nodes");
    }
    if (g.labeled_normal.size() != g.num_nodes) {
        throw DimensionError("graph: labeled_normal mask size != num_nodes");
    }
    if (g.labels) {
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            if (g.labeled_normal[i] && (*g.labels)[i] != 0) {
                throw FormatError("graph: node " + std::to_string(i) +
                                  " is labeled-normal but carries an anomaly label");
            }
        }
    }
}

namespace {

linalg::DenseMatrix read_features(const std::filesystem::path& path, std::size_t& attr_dim) {
    auto in = textio::open_input(path);
    const std::string name = path.filename().string();

    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        textio::strip_carriage_return(line);
        if (line.empty()) continue;
        const auto fields = textio::split_tabs(line);
        if (fields.size() < 2) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": expected node id and at least one attribute");
        }
        if (!rows.empty() && fields.size() - 1 != rows.front().size()) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": attribute count differs from previous lines");
        }
        ids.push_back(textio::parse_index(fields[0], name, line_no));
        std::vector<double> values(fields.size() - 1);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            values[j - 1] = textio::parse_real(fields[j], name, line_no);
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw FormatError(name + ": no feature rows");

    const std::size_t n = rows.size();
    attr_dim = rows.front().size();
    linalg::DenseMatrix x(n, attr_dim);
    std::vector<std::uint8_t> seen(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t id = ids[r];
        if (id >= n) {
            throw FormatError(name + ": node id " + std::to_string(id) +
                              " out of range for " + std::to_string(n) + " rows");
        }
        if (seen[id]) {
            throw FormatError(name + ": duplicate node id " + std::to_string(id));
        }
        seen[id] = 1;
        for (std::size_t j = 0; j < attr_dim; ++j) x(id, j) = rows[r][j];
    }
    return x;
}

std::vector<std::pair<std::size_t, std::size_t>> read_edges(
    const std::filesystem::path& path, std::size_t num_nodes) {
    auto in = textio::open_input(path);
    const std::string name = path.filename().string();

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        textio::strip_carriage_return(line);
        if (line.empty()) continue;
        const auto fields = textio::split_tabs(line);
        if (fields.size() != 2) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": expected 'src<TAB>dst'");
        }
        const std::size_t src = textio::parse_index(fields[0], name, line_no);
        const std::size_t dst = textio::parse_index(fields[1], name, line_no);
        if (src >= num_nodes || dst >= num_nodes) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": node index out of range (graph has " +
                              std::to_string(num_nodes) + " nodes)");
        }
        edges.emplace_back(src, dst);
    }
    return edges;
}

std::vector<std::uint8_t> read_labels(const std::filesystem::path& path,
                                      std::size_t num_nodes) {
    auto in = textio::open_input(path);
    const std::string name = path.filename().string();

    std::vector<std::uint8_t> labels(num_nodes, 0);
    std::vector<std::uint8_t> seen(num_nodes, 0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        textio::strip_carriage_return(line);
        if (line.empty()) continue;
        const auto fields = textio::split_tabs(line);
        if (fields.size() != 2) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": expected 'node_id<TAB>{0|1}'");
        }
        const std::size_t id = textio::parse_index(fields[0], name, line_no);
        if (id >= num_nodes) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": node index out of range");
        }
        if (seen[id]) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": duplicate label for node " + std::to_string(id));
        }
        seen[id] = 1;
        if (fields[1] == "0") {
            labels[id] = 0;
        } else if (fields[1] == "1") {
            labels[id] = 1;
        } else {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": label must be 0 or 1, got '" + std::string(fields[1]) +
                              "'");
        }
    }
    return labels;
}

void check_meta(const std::filesystem::path& path, std::size_t num_nodes,
                std::size_t attr_dim) {
    auto in = textio::open_input(path);
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("meta.json: " + std::string(e.what()));
    }
    if (!meta.contains("num_nodes") || !meta.contains("attr_dim")) {
        throw FormatError("meta.json: missing num_nodes or attr_dim");
    }
    const auto meta_nodes = meta["num_nodes"].get<std::size_t>();
    const auto meta_dim = meta["attr_dim"].get<std::size_t>();
    if (meta_nodes != num_nodes) {
        throw FormatError("meta.json: num_nodes " + std::to_string(meta_nodes) +
                          " does not match features.tsv (" + std::to_string(num_nodes) +
                          " rows)");
    }
    if (meta_dim != attr_dim) {
        throw FormatError("meta.json: attr_dim " + std::to_string(meta_dim) +
                          " does not match features.tsv (" + std::to_string(attr_dim) +
                          " columns)");
    }
}

}  // namespace

AttributedGraph load_graph(const std::filesystem::path& dataset_dir, LoadStats* stats) {
    namespace fs = std::filesystem;
    const fs::path edges_path = dataset_dir / "edges.tsv";
    const fs::path features_path = dataset_dir / "features.tsv";
    const fs::path labels_path = dataset_dir / "labels.tsv";
    const fs::path meta_path = dataset_dir / "meta.json";

    if (!fs::exists(features_path)) {
        throw IoError("missing " + features_path.string());
    }
    if (!fs::exists(edges_path)) {
        throw IoError("missing " + edges_path.string());
    }

    std::size_t attr_dim = 0;
    linalg::DenseMatrix x = read_features(features_path, attr_dim);
    const std::size_t num_nodes = x.rows();
    auto edges = read_edges(edges_path, num_nodes);

    std::optional<std::vector<std::uint8_t>> labels;
    if (fs::exists(labels_path)) labels = read_labels(labels_path, num_nodes);

    if (fs::exists(meta_path)) check_meta(meta_path, num_nodes, attr_dim);

    return make_graph(num_nodes, edges, std::move(x), std::move(labels), stats);
}

void save_graph(const AttributedGraph& g, const std::filesystem::path& dataset_dir) {
    namespace fs = std::filesystem;
    validate(g);
    fs::create_directories(dataset_dir);

    {
        auto out = textio::open_output(dataset_dir / "edges.tsv");
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k) {
                const std::size_t j = g.col_indices[k];
                if (i < j) out << i << '\t' << j << '\n';
            }
        }
    }
    {
        auto out = textio::open_output(dataset_dir / "features.tsv");
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            out << i;
            for (const double v : g.attributes.row(i)) {
                out << '\t' << textio::format_double(v);
            }
            out << '\n';
        }
    }
    if (g.labels) {
        auto out = textio::open_output(dataset_dir / "labels.tsv");
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            out << i << '\t' << static_cast<unsigned>((*g.labels)[i]) << '\n';
        }
    }
    {
        auto out = textio::open_output(dataset_dir / "meta.json");
        nlohmann::ordered_json meta;
        meta["num_nodes"] = g.num_nodes;
        meta["attr_dim"] = g.attr_dim();
        out << meta.dump(2) << '\n';
    }
}

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g) {
    const std::size_t n = g.num_nodes;
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Degree of A + I; the self-loop guarantees it is at least 1.
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
    }

    NormalizedAdjacency a_hat;
    a_hat.mat.rows = n;
    a_hat.mat.cols = n;
    a_hat.mat.row_offsets.resize(n + 1, 0);
    a_hat.mat.col_indices.reserve(g.col_indices.size() + n);
    a_hat.mat.values.reserve(g.col_indices.size() + n);
    for (std::size_t i = 0; i < n; ++i) {
        bool diagonal_emitted = false;
        for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k) {
            const std::size_t j = g.col_indices[k];
            if (!diagonal_emitted && j > i) {
                a_hat.mat.col_indices.push_back(i);
                a_hat.mat.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
                diagonal_emitted = true;
            }
            a_hat.mat.col_indices.push_back(j);
            a_hat.mat.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
        }
        if (!diagonal_emitted) {
            a_hat.mat.col_indices.push_back(i);
            a_hat.mat.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
        }
        a_hat.mat.row_offsets[i + 1] = a_hat.mat.col_indices.size();
    }
    return a_hat;
}

AttributedGraph split_labeled_normals(const AttributedGraph& g, double ratio,
                                      std::uint64_t seed) {
    if (!g.labels) {
        throw ConfigError("split_labeled_normals: graph has no labels");
    }
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ConfigError("split_labeled_normals: ratio must be in (0, 1], got " +
                          textio::format_double(ratio));
    }
    std::vector<std::size_t> normals;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if ((*g.labels)[i] == 0) normals.push_back(i);
    }
    if (normals.empty()) {
        throw Error("split_labeled_normals: graph has no normal nodes");
    }
    const std::size_t count = floor_fraction(ratio, normals.size());

    AttributedGraph out = g;
    out.labeled_normal.assign(g.num_nodes, 0);
    Rng rng(derive_seed(seed, kStreamSplit));
    for (const std::size_t k : sample_without_replacement(normals.size(), count, rng)) {
        out.labeled_normal[normals[k]] = 1;
    }
    return out;
}

AttributedGraph generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.num_nodes < 2) throw ConfigError("generate_synthetic: need at least 2 nodes");
    if (cfg.attr_dim < 1) throw ConfigError("generate_synthetic: attr_dim must be >= 1");
    if (cfg.num_clusters < 1 || cfg.num_clusters > cfg.num_nodes) {
        throw ConfigError("generate_synthetic: num_clusters must be in [1, num_nodes]");
    }
    if (!(cfg.contextual_anomaly_rate >= 0.0 && cfg.contextual_anomaly_rate < 0.5) ||
        !(cfg.structural_anomaly_rate >= 0.0 && cfg.structural_anomaly_rate < 0.5)) {
        throw ConfigError("generate_synthetic: anomaly rates must be in [0, 0.5)");
    }
    if (cfg.clique_size < 2) {
        throw ConfigError("generate_synthetic: clique_size must be >= 2");
    }

    const std::size_t n = cfg.num_nodes;
    const std::size_t m = cfg.attr_dim;
    const std::size_t num_contextual = floor_fraction(cfg.contextual_anomaly_rate, n);
    const std::size_t num_structural = floor_fraction(cfg.structural_anomaly_rate, n);
    if (num_contextual + num_structural == 0) {
        throw ConfigError(
            "generate_synthetic: anomaly rates yield zero anomalies; raise a rate or "
            "num_nodes");
    }

    Rng rng(derive_seed(seed, kStreamGenerate));

    // Cluster assignment is round-robin so every cluster has nearly equal size.
    const std::size_t num_clusters = cfg.num_clusters;
    std::vector<std::size_t> cluster(n);
    std::vector<std::vector<std::size_t>> members(num_clusters);
    for (std::size_t i = 0; i < n; ++i) {
        cluster[i] = i % num_clusters;
        members[cluster[i]].push_back(i);
    }

    linalg::DenseMatrix centers(num_clusters, m);
    for (double& c : centers.values()) c = rng.normal(0.0, kClusterCenterScale);

    linalg::DenseMatrix x(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        const auto center = centers.row(cluster[i]);
        const auto row = x.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            row[j] = center[j] + rng.normal(0.0, cfg.feature_noise_scale);
        }
    }

    // Intra-cluster random links; symmetrization roughly doubles the degree.
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(n * kIntraClusterLinks + num_structural * cfg.clique_size);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& pool = members[cluster[i]];
        if (pool.size() < 2) continue;
        for (std::size_t link = 0; link < kIntraClusterLinks; ++link) {
            std::size_t j = i;
            while (j == i) j = pool[rng.uniform_index(pool.size())];
            edges.emplace_back(i, j);
        }
    }

    // Pick disjoint anomaly sets: contextual first, structural after.
    const auto picked =
        sample_without_replacement(n, num_contextual + num_structural, rng);
    std::vector<std::uint8_t> labels(n, 0);
    for (const std::size_t i : picked) labels[i] = 1;

    // Contextual anomalies: edges untouched, attributes redrawn around a
    // different cluster's center with inflated noise, so they disagree with
    // their neighborhood without being isolated points.
    for (std::size_t a = 0; a < num_contextual; ++a) {
        const std::size_t i = picked[a];
        std::size_t other = cluster[i];
        if (num_clusters > 1) {
            while (other == cluster[i]) other = rng.uniform_index(num_clusters);
        }
        const auto center = centers.row(other);
        const auto row = x.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            row[j] = center[j] +
                     rng.normal(0.0, cfg.feature_noise_scale * kContextualNoiseBoost);
        }
    }

    // Structural anomalies: attributes untouched, wired into cliques in
    // chunks of clique_size. A trailing single node joins the previous chunk;
    // if it is the only structural node, it borrows partners from the start
    // of its own cluster instead (still a local density spike).
    if (num_structural > 0) {
        std::vector<std::size_t> structural(picked.begin() +
                                                static_cast<std::ptrdiff_t>(num_contextual),
                                            picked.end());
        std::vector<std::vector<std::size_t>> chunks;
        for (std::size_t pos = 0; pos < structural.size(); pos += cfg.clique_size) {
            const std::size_t end = std::min(pos + cfg.clique_size, structural.size());
            chunks.emplace_back(structural.begin() + static_cast<std::ptrdiff_t>(pos),
                                structural.begin() + static_cast<std::ptrdiff_t>(end));
        }
        if (chunks.size() > 1 && chunks.back().size() == 1) {
            chunks[chunks.size() - 2].push_back(chunks.back().front());
            chunks.pop_back();
        }
        if (chunks.size() == 1 && chunks.front().size() == 1) {
            const std::size_t lone = chunks.front().front();
            for (const std::size_t j : members[cluster[lone]]) {
                if (j != lone && chunks.front().size() < cfg.clique_size) {
                    chunks.front().push_back(j);
                }
            }
        }
        for (const auto& chunk : chunks) {
            for (std::size_t a = 0; a < chunk.size(); ++a) {
                for (std::size_t b = a + 1; b < chunk.size(); ++b) {
                    edges.emplace_back(chunk[a], chunk[b]);
                }
            }
        }
    }

    return make_graph(n, edges, std::move(x), std::move(labels), nullptr);
}

linalg::DenseMatrix mask_attributes(const AttributedGraph& g, double omega,
                                    std::uint64_t seed) {
    if (!(omega >= 0.0 && omega <= 1.0)) {
        throw ConfigError("mask_attributes: omega must be in [0, 1], got " +
                          textio::format_double(omega));
    }
    const std::size_t m = g.attr_dim();
    const std::size_t masked_per_node = floor_fraction(omega, m);

    linalg::DenseMatrix x_tilde = g.attributes;
    if (masked_per_node == 0) return x_tilde;
    Rng rng(derive_seed(seed, kStreamMask));
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if (!g.labeled_normal[i]) continue;
        const auto row = x_tilde.row(i);
        for (const std::size_t j : sample_without_replacement(m, masked_per_node, rng)) {
            row[j] = 0.0;
        }
    }
    return x_tilde;
}

}  // namespace graphnc::graph
