#include "graphnc/teachers.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "graphnc/checkpoint.hpp"
#include "graphnc/rng.hpp"
#include "text_io.hpp"

namespace graphnc::teachers {

namespace {

constexpr std::uint64_t kStreamDominantInit = 31;
constexpr std::uint64_t kStreamOcgnnInit = 32;

void require_trainable(const graph::AttributedGraph& g, const TeacherConfig& cfg,
                       const char* who) {
    if (g.num_labeled_normal() == 0) {
        throw TrainingError(std::string(who) +
                            ": no labeled-normal nodes (run the label split first)");
    }
    if (cfg.epochs < 1) throw ConfigError(std::string(who) + ": epochs must be >= 1");
    if (cfg.hidden_dim < 1) {
        throw ConfigError(std::string(who) + ": hidden_dim must be >= 1");
    }
    if (!(cfg.attribute_weight >= 0.0 && cfg.attribute_weight <= 1.0)) {
        throw ConfigError(std::string(who) + ": attribute_weight must be in [0, 1]");
    }
    if (!(cfg.learning_rate > 0.0)) {
        throw ConfigError(std::string(who) + ": learning_rate must be positive");
    }
}

TeacherScores finalize_scores(ScoreVector raw, TeacherKind kind) {
    TeacherScores out;
    out.kind = kind;
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    out.raw_min = *lo;
    out.raw_max = *hi;
    out.scores = normalize_scores(raw);
    return out;
}

}  // namespace

const char* kind_name(TeacherKind kind) {
    switch (kind) {
        case TeacherKind::dominant: return "dominant";
        case TeacherKind::ocgnn: return "ocgnn";
        case TeacherKind::file: return "file";
    }
    return "unknown";
}

ScoreVector normalize_scores(const ScoreVector& raw) {
    if (raw.empty()) throw ContractError("normalize_scores: empty input");
    for (const double s : raw) {
        if (!std::isfinite(s)) {
            throw ContractError("normalize_scores: non-finite score");
        }
    }
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double span = *hi - *lo;
    ScoreVector out(raw.size());
    if (span == 0.0) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - *lo) / span;
    return out;
}

TrainedTeacher train_dominant(const graph::AttributedGraph& g,
                              const graph::NormalizedAdjacency& a_hat,
                              const TeacherConfig& cfg) {
    require_trainable(g, cfg, "train_dominant");
    const std::size_t n = g.num_nodes;
    const std::size_t m = g.attr_dim();
    const std::size_t d = cfg.hidden_dim;
    const double lambda = cfg.attribute_weight;  // attribute-term share
    const double mu = 1.0 - lambda;              // edge-term share
    const auto labeled = g.labeled_normal_indices();
    const auto r = static_cast<double>(labeled.size());

    Rng rng(derive_seed(cfg.seed, kStreamDominantInit));
    gnn::EncoderParams encoder;
    encoder.w1 = linalg::glorot_init(m, d, rng);
    encoder.w2 = linalg::glorot_init(d, d, rng);
    linalg::DenseMatrix attr_decoder = linalg::glorot_init(d, m, rng);

    linalg::AdamState adam(cfg.learning_rate);
    gnn::EncoderCache cache;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        cache = gnn::encode(a_hat, g.attributes, encoder);
        const linalg::DenseMatrix& h = cache.embeddings;

        linalg::DenseMatrix d_h(n, d);
        linalg::DenseMatrix d_decoder(d, m);
        double loss = 0.0;

        if (lambda > 0.0) {
            // Attribute reconstruction on labeled rows: mean squared error
            // over |labeled| * M entries of X_hat = H * attr_decoder.
            const double inv = 1.0 / (r * static_cast<double>(m));
            linalg::DenseMatrix d_xhat(n, m);
            const linalg::DenseMatrix x_hat = linalg::matmul(h, attr_decoder);
            double attr_loss = 0.0;
            for (const std::size_t i : labeled) {
                for (std::size_t j = 0; j < m; ++j) {
                    const double diff = x_hat(i, j) - g.attributes(i, j);
                    attr_loss += diff * diff;
                    d_xhat(i, j) = lambda * 2.0 * diff * inv;
                }
            }
            loss += lambda * attr_loss * inv;
            linalg::add_inplace(d_decoder, linalg::matmul_tn(h, d_xhat));
            linalg::add_inplace(d_h, linalg::matmul_nt(d_xhat, attr_decoder));
        }

        if (mu > 0.0) {
            // Edge reconstruction on labeled rows: binary cross-entropy of
            // sigmoid(h_i . h_j) against the full 0/1 adjacency row, averaged
            // over |labeled| * N entries.
            const double inv = 1.0 / (r * static_cast<double>(n));
            double struct_loss = 0.0;
            for (const std::size_t i : labeled) {
                const auto hi = h.row(i);
                std::size_t edge_cursor = g.row_offsets[i];
                for (std::size_t j = 0; j < n; ++j) {
                    double logit = 0.0;
                    const auto hj = h.row(j);
                    for (std::size_t t = 0; t < d; ++t) logit += hi[t] * hj[t];
                    double target = 0.0;
                    if (edge_cursor < g.row_offsets[i + 1] &&
                        g.col_indices[edge_cursor] == j) {
                        target = 1.0;
                        ++edge_cursor;
                    }
                    struct_loss += target * linalg::softplus(-logit) +
                                   (1.0 - target) * linalg::softplus(logit);
                    const double d_logit =
                        mu * (linalg::sigmoid_scalar(logit) - target) * inv;
                    // logit = h_i . h_j touches both embeddings.
                    const auto dhi = d_h.row(i);
                    const auto dhj = d_h.row(j);
                    for (std::size_t t = 0; t < d; ++t) {
                        dhi[t] += d_logit * hj[t];
                        dhj[t] += d_logit * hi[t];
                    }
                }
            }
            loss += mu * struct_loss * inv;
        }

        if (!std::isfinite(loss)) {
            throw TrainingError("train_dominant: non-finite loss at epoch " +
                                std::to_string(epoch));
        }

        gnn::EncoderGrads grads = gnn::encode_backward(a_hat, encoder, cache, d_h);
        std::vector<linalg::AdamBlock> blocks;
        blocks.push_back({"teacher.w1", encoder.w1.values(), grads.w1.values()});
        blocks.push_back({"teacher.w2", encoder.w2.values(), grads.w2.values()});
        if (lambda > 0.0) {
            blocks.push_back(
                {"teacher.attr_decoder", attr_decoder.values(), d_decoder.values()});
        }
        adam.step(blocks);
    }

    // Score every node by its weighted reconstruction error.
    cache = gnn::encode(a_hat, g.attributes, encoder);
    const linalg::DenseMatrix& h = cache.embeddings;
    const linalg::DenseMatrix x_hat = linalg::matmul(h, attr_decoder);
    ScoreVector raw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double attr_sq = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double diff = x_hat(i, j) - g.attributes(i, j);
            attr_sq += diff * diff;
        }
        double struct_sq = 0.0;
        if (mu > 0.0) {
            const auto hi = h.row(i);
            std::size_t edge_cursor = g.row_offsets[i];
            for (std::size_t j = 0; j < n; ++j) {
                double logit = 0.0;
                const auto hj = h.row(j);
                for (std::size_t t = 0; t < d; ++t) logit += hi[t] * hj[t];
                double target = 0.0;
                if (edge_cursor < g.row_offsets[i + 1] &&
                    g.col_indices[edge_cursor] == j) {
                    target = 1.0;
                    ++edge_cursor;
                }
                const double diff = linalg::sigmoid_scalar(logit) - target;
                struct_sq += diff * diff;
            }
        }
        raw[i] = lambda * std::sqrt(attr_sq) + mu * std::sqrt(struct_sq);
    }

    TrainedTeacher out;
    out.scores = finalize_scores(std::move(raw), TeacherKind::dominant);
    out.encoder = std::move(encoder);
    out.embeddings = std::move(cache.embeddings);
    out.attr_decoder = std::move(attr_decoder);
    out.config = cfg;
    return out;
}

TrainedTeacher train_ocgnn(const graph::AttributedGraph& g,
                           const graph::NormalizedAdjacency& a_hat,
                           const TeacherConfig& cfg) {
    require_trainable(g, cfg, "train_ocgnn");
    const std::size_t n = g.num_nodes;
    const std::size_t d = cfg.hidden_dim;
    const auto labeled = g.labeled_normal_indices();
    const auto r = static_cast<double>(labeled.size());

    Rng rng(derive_seed(cfg.seed, kStreamOcgnnInit));
    gnn::EncoderParams encoder;
    encoder.w1 = linalg::glorot_init(g.attr_dim(), d, rng);
    encoder.w2 = linalg::glorot_init(d, d, rng);

    // Hypersphere center: mean labeled-normal embedding at initialization,
    // frozen for the rest of training.
    gnn::EncoderCache cache = gnn::encode(a_hat, g.attributes, encoder);
    linalg::DenseMatrix center(1, d);
    for (const std::size_t i : labeled) {
        const auto hi = cache.embeddings.row(i);
        for (std::size_t t = 0; t < d; ++t) center(0, t) += hi[t];
    }
    linalg::scale_inplace(center, 1.0 / r);

    linalg::AdamState adam(cfg.learning_rate);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch > 0) cache = gnn::encode(a_hat, g.attributes, encoder);
        const linalg::DenseMatrix& h = cache.embeddings;

        double loss = 0.0;
        linalg::DenseMatrix d_h(n, d);
        for (const std::size_t i : labeled) {
            const auto hi = h.row(i);
            const auto dhi = d_h.row(i);
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = hi[t] - center(0, t);
                loss += diff * diff;
                dhi[t] = 2.0 * diff / r;
            }
        }
        loss /= r;
        if (!std::isfinite(loss)) {
            throw TrainingError("train_ocgnn: non-finite loss at epoch " +
                                std::to_string(epoch));
        }

        gnn::EncoderGrads grads = gnn::encode_backward(a_hat, encoder, cache, d_h);
        std::vector<linalg::AdamBlock> blocks;
        blocks.push_back({"teacher.w1", encoder.w1.values(), grads.w1.values()});
        blocks.push_back({"teacher.w2", encoder.w2.values(), grads.w2.values()});
        adam.step(blocks);
    }

    cache = gnn::encode(a_hat, g.attributes, encoder);
    ScoreVector raw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto hi = cache.embeddings.row(i);
        double dist_sq = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            const double diff = hi[t] - center(0, t);
            dist_sq += diff * diff;
        }
        raw[i] = dist_sq;
    }

    TrainedTeacher out;
    out.scores = finalize_scores(std::move(raw), TeacherKind::ocgnn);
    out.encoder = std::move(encoder);
    out.embeddings = std::move(cache.embeddings);
    out.center = std::move(center);
    out.config = cfg;
    return out;
}

TeacherScores load_teacher_scores(const std::filesystem::path& path, std::size_t n) {
    auto in = textio::open_input(path);
    const std::string name = path.filename().string();

    ScoreVector raw(n, 0.0);
    std::vector<std::uint8_t> seen(n, 0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        textio::strip_carriage_return(line);
        if (line.empty()) continue;
        const auto fields = textio::split_tabs(line);
        if (fields.size() != 2) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": expected 'node_id<TAB>score'");
        }
        const std::size_t id = textio::parse_index(fields[0], name, line_no);
        if (id >= n) {
            throw FormatError(name + " line " + std::to_string(line_no) + ": node id " +
                              std::to_string(id) + " out of range (expected 0.." +
                              std::to_string(n - 1) + ")");
        }
        if (seen[id]) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": duplicate node id " + std::to_string(id));
        }
        const double score = textio::parse_real(fields[1], name, line_no);
        if (!std::isfinite(score)) {
            throw FormatError(name + " line " + std::to_string(line_no) +
                              ": non-finite score");
        }
        seen[id] = 1;
        raw[id] = score;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) {
            throw FormatError(name + ": missing score for node " + std::to_string(i));
        }
    }
    return finalize_scores(std::move(raw), TeacherKind::file);
}

void save_teacher_scores(const TeacherScores& scores, const std::filesystem::path& path) {
    auto out = textio::open_output(path);
    for (std::size_t i = 0; i < scores.scores.size(); ++i) {
        out << i << '\t' << textio::format_double(scores.scores[i]) << '\n';
    }
}

void save_teacher(const TrainedTeacher& teacher, const std::filesystem::path& path) {
    std::vector<std::pair<std::string, std::string>> metadata;
    metadata.emplace_back("format", "teacher");
    metadata.emplace_back("kind", kind_name(teacher.scores.kind));
    metadata.emplace_back("attr_dim", std::to_string(teacher.encoder.w1.rows()));
    metadata.emplace_back("hidden_dim", std::to_string(teacher.encoder.w1.cols()));
    metadata.emplace_back("epochs", std::to_string(teacher.config.epochs));
    metadata.emplace_back("learning_rate",
                          textio::format_double(teacher.config.learning_rate));
    metadata.emplace_back("attribute_weight",
                          textio::format_double(teacher.config.attribute_weight));
    metadata.emplace_back("seed", std::to_string(teacher.config.seed));
    metadata.emplace_back("raw_min", textio::format_double(teacher.scores.raw_min));
    metadata.emplace_back("raw_max", textio::format_double(teacher.scores.raw_max));

    std::vector<std::span<const double>> blocks;
    blocks.push_back(teacher.encoder.w1.values());
    blocks.push_back(teacher.encoder.w2.values());
    if (teacher.scores.kind == TeacherKind::dominant) {
        blocks.push_back(teacher.attr_decoder.values());
    } else if (teacher.scores.kind == TeacherKind::ocgnn) {
        blocks.push_back(teacher.center.values());
    }
    calib::write_checkpoint(path, metadata, blocks);
}

TrainedTeacher load_teacher(const std::filesystem::path& path) {
    const calib::CheckpointData data = calib::read_checkpoint(path);
    if (data.value("format") != "teacher") {
        throw FormatError(path.string() + ": not a teacher checkpoint");
    }
    const std::string& kind = data.value("kind");
    const std::size_t m = data.value_as_size("attr_dim");
    const std::size_t d = data.value_as_size("hidden_dim");

    TrainedTeacher teacher;
    teacher.config.hidden_dim = d;
    teacher.config.epochs = data.value_as_size("epochs");
    teacher.config.learning_rate = data.value_as_real("learning_rate");
    teacher.config.attribute_weight = data.value_as_real("attribute_weight");
    teacher.config.seed = data.value_as_size("seed");
    teacher.scores.raw_min = data.value_as_real("raw_min");
    teacher.scores.raw_max = data.value_as_real("raw_max");

    std::size_t tail = 0;
    if (kind == "dominant") {
        teacher.scores.kind = TeacherKind::dominant;
        tail = d * m;
    } else if (kind == "ocgnn") {
        teacher.scores.kind = TeacherKind::ocgnn;
        tail = d;
    } else {
        throw FormatError(path.string() + ": unknown teacher kind '" + kind + "'");
    }

    const std::size_t expected = m * d + d * d + tail;
    if (data.payload.size() != expected) {
        throw FormatError(path.string() + ": payload has " +
                          std::to_string(data.payload.size()) + " values, expected " +
                          std::to_string(expected));
    }

    auto cursor = data.payload.begin();
    const auto take = [&cursor](linalg::DenseMatrix& dst, std::size_t rows,
                                std::size_t cols) {
        dst = linalg::DenseMatrix(rows, cols);
        std::copy(cursor, cursor + static_cast<std::ptrdiff_t>(rows * cols),
                  dst.values().begin());
        cursor += static_cast<std::ptrdiff_t>(rows * cols);
    };
    take(teacher.encoder.w1, m, d);
    take(teacher.encoder.w2, d, d);
    if (teacher.scores.kind == TeacherKind::dominant) {
        take(teacher.attr_decoder, d, m);
    } else {
        take(teacher.center, 1, d);
    }
    return teacher;
}

}  // namespace graphnc::teachers
