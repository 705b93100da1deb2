#include "graphnc/calibration.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "graphnc/rng.hpp"
#include "text_io.hpp"

namespace graphnc::calib {

namespace {

// Stream tag for per-epoch mask resampling (the optional extension); the
// default single view uses the config seed directly.
constexpr std::uint64_t kStreamEpochMask = 41;

void validate_config(const TrainConfig& cfg) {
    if (!(cfg.alpha >= 0.0)) throw ConfigError("train_student: alpha must be >= 0");
    if (!(cfg.omega >= 0.0 && cfg.omega <= 1.0)) {
        throw ConfigError("train_student: omega must be in [0, 1]");
    }
    if (cfg.epochs < 1) throw ConfigError("train_student: epochs must be >= 1");
    if (cfg.hidden_dim < 1) throw ConfigError("train_student: hidden_dim must be >= 1");
    if (cfg.learning_rate && !(*cfg.learning_rate > 0.0)) {
        throw ConfigError("train_student: learning_rate must be positive");
    }
}

ScoreVector scores_column_to_vector(const linalg::DenseMatrix& column) {
    ScoreVector out(column.rows());
    for (std::size_t i = 0; i < column.rows(); ++i) out[i] = column(i, 0);
    return out;
}

}  // namespace

double default_student_learning_rate(std::size_t attr_dim) {
    return attr_dim > 32 ? 5e-3 : 5e-4;
}

ScoreDaResult score_da_loss(const ScoreVector& y_s, const ScoreVector& y_t) {
    if (y_s.size() != y_t.size()) {
        throw DimensionError("score_da_loss: score lengths differ (" +
                             std::to_string(y_s.size()) + " vs " +
                             std::to_string(y_t.size()) + ")");
    }
    if (y_s.empty()) throw DimensionError("score_da_loss: empty scores");
    ScoreDaResult result;
    result.grad.resize(y_s.size());
    const double inv_n = 1.0 / static_cast<double>(y_s.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < y_s.size(); ++i) {
        const double diff = y_s[i] - y_t[i];
        sum += diff * diff;
        result.grad[i] = 2.0 * diff * inv_n;
    }
    result.loss = sum * inv_n;
    return result;
}

NormRegResult norm_reg_loss(const linalg::DenseMatrix& h,
                            const linalg::DenseMatrix& h_tilde,
                            const std::vector<std::uint8_t>& labeled) {
    if (!h.same_shape(h_tilde)) {
        throw DimensionError("norm_reg_loss: embedding shapes differ");
    }
    if (labeled.size() != h.rows()) {
        throw DimensionError("norm_reg_loss: mask length != embedding rows");
    }
    std::size_t count = 0;
    for (const auto flag : labeled) count += flag != 0;
    if (count == 0) {
        throw ContractError("norm_reg_loss: labeled-normal mask is empty");
    }

    NormRegResult result;
    result.d_h = linalg::DenseMatrix(h.rows(), h.cols());
    result.d_h_tilde = linalg::DenseMatrix(h.rows(), h.cols());
    const double inv_count = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        if (!labeled[i]) continue;
        const auto hi = h.row(i);
        const auto ti = h_tilde.row(i);
        const auto dhi = result.d_h.row(i);
        const auto dti = result.d_h_tilde.row(i);
        for (std::size_t j = 0; j < h.cols(); ++j) {
            const double diff = hi[j] - ti[j];
            sum += diff * diff;
            dhi[j] = 2.0 * diff * inv_count;
            dti[j] = -dhi[j];
        }
    }
    result.loss = sum * inv_count;
    return result;
}

TrainedStudent train_student(const graph::AttributedGraph& g,
                             const graph::NormalizedAdjacency& a_hat,
                             const teachers::TeacherScores& y_t, const TrainConfig& cfg) {
    validate_config(cfg);
    if (y_t.scores.size() != g.num_nodes) {
        throw DimensionError("train_student: teacher scores length (" +
                             std::to_string(y_t.scores.size()) + ") != num_nodes (" +
                             std::to_string(g.num_nodes) + ")");
    }
    const bool use_consistency = cfg.alpha > 0.0;
    if (use_consistency && g.num_labeled_normal() == 0) {
        throw TrainingError(
            "train_student: alpha > 0 requires labeled-normal nodes (run the label "
            "split first)");
    }

    TrainedStudent student;
    student.config = cfg;
    student.teacher_kind = teachers::kind_name(y_t.kind);
    student.resolved_learning_rate =
        cfg.learning_rate ? *cfg.learning_rate
                          : default_student_learning_rate(g.attr_dim());
    student.params = gnn::init_student(g.attr_dim(), cfg.hidden_dim, cfg.seed);
    student.loss_trace.reserve(cfg.epochs);

    // Algorithm: the augmented view is built once, before the epoch loop.
    linalg::DenseMatrix x_tilde;
    if (use_consistency) x_tilde = graph::mask_attributes(g, cfg.omega, cfg.seed);

    linalg::AdamState adam(student.resolved_learning_rate);
    const linalg::DenseMatrix zero_scores(g.num_nodes, 1);
    const linalg::DenseMatrix no_embedding_grad;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (use_consistency && cfg.resample_mask_each_epoch && epoch > 0) {
            x_tilde = graph::mask_attributes(
                g, cfg.omega, derive_seed(cfg.seed, kStreamEpochMask + epoch));
        }

        const gnn::ForwardCache fwd = gnn::forward(a_hat, g.attributes, student.params);
        const ScoreDaResult alignment =
            score_da_loss(scores_column_to_vector(fwd.scores), y_t.scores);

        linalg::DenseMatrix d_scores(g.num_nodes, 1);
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            d_scores(i, 0) = alignment.grad[i];
        }

        LossRecord record;
        record.score_da = alignment.loss;
        gnn::StudentGrads grads;
        if (use_consistency) {
            const gnn::ForwardCache fwd_tilde = gnn::forward(a_hat, x_tilde, student.params);
            NormRegResult consistency = norm_reg_loss(
                fwd.enc.embeddings, fwd_tilde.enc.embeddings, g.labeled_normal);
            record.norm_reg = consistency.loss;
            linalg::scale_inplace(consistency.d_h, cfg.alpha);
            linalg::scale_inplace(consistency.d_h_tilde, cfg.alpha);
            // Original view first, augmented view second — fixed order.
            grads = gnn::backward(a_hat, student.params, fwd, d_scores, consistency.d_h);
            gnn::accumulate(grads, gnn::backward(a_hat, student.params, fwd_tilde,
                                                 zero_scores, consistency.d_h_tilde));
        } else {
            record.norm_reg = 0.0;
            grads = gnn::backward(a_hat, student.params, fwd, d_scores,
                                  no_embedding_grad);
        }
        record.total = record.score_da + cfg.alpha * record.norm_reg;
        if (!std::isfinite(record.total)) {
            throw TrainingError("train_student: non-finite loss at epoch " +
                                std::to_string(epoch));
        }

        std::vector<linalg::AdamBlock> blocks;
        blocks.push_back(
            {"w1", student.params.encoder.w1.values(), grads.w1.values()});
        blocks.push_back(
            {"w2", student.params.encoder.w2.values(), grads.w2.values()});
        blocks.push_back({"head_w", student.params.head_w.values(),
                          grads.head_w.values()});
        blocks.push_back({"head_b", {&student.params.head_b, 1}, {&grads.head_b, 1}});
        adam.step(blocks);
        ++student.params.version;  // invalidate caches taken before this step

        student.loss_trace.push_back(record);
    }
    return student;
}

ScoreVector infer(const TrainedStudent& student, const graph::AttributedGraph& g,
                  const graph::NormalizedAdjacency& a_hat) {
    if (g.attr_dim() != student.params.attr_dim()) {
        throw DimensionError("infer: graph attribute dim (" +
                             std::to_string(g.attr_dim()) +
                             ") != student input dim (" +
                             std::to_string(student.params.attr_dim()) + ")");
    }
    const gnn::ForwardCache fwd = gnn::forward(a_hat, g.attributes, student.params);
    return scores_column_to_vector(fwd.scores);
}

void write_loss_trace(const std::vector<LossRecord>& trace,
                      const std::filesystem::path& path) {
    auto out = textio::open_output(path);
    out << "epoch,total,score_da,norm_reg\n";
    for (std::size_t epoch = 0; epoch < trace.size(); ++epoch) {
        out << epoch << ',' << textio::format_double(trace[epoch].total) << ','
            << textio::format_double(trace[epoch].score_da) << ','
            << textio::format_double(trace[epoch].norm_reg) << '\n';
    }
}

void save_student(const TrainedStudent& student, const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, std::string>>&
                      extra_metadata) {
    std::vector<std::pair<std::string, std::string>> metadata;
    metadata.emplace_back("format", "student");
    metadata.emplace_back("attr_dim", std::to_string(student.params.attr_dim()));
    metadata.emplace_back("hidden_dim", std::to_string(student.params.hidden_dim()));
    metadata.emplace_back("alpha", textio::format_double(student.config.alpha));
    metadata.emplace_back("omega", textio::format_double(student.config.omega));
    metadata.emplace_back("learning_rate",
                          textio::format_double(student.resolved_learning_rate));
    metadata.emplace_back("epochs", std::to_string(student.config.epochs));
    metadata.emplace_back("seed", std::to_string(student.config.seed));
    metadata.emplace_back("teacher", student.teacher_kind);
    metadata.emplace_back("resample_mask_each_epoch",
                          student.config.resample_mask_each_epoch ? "1" : "0");
    for (const auto& kv : extra_metadata) metadata.push_back(kv);

    const double head_b = student.params.head_b;
    std::vector<std::span<const double>> blocks;
    blocks.push_back(student.params.encoder.w1.values());
    blocks.push_back(student.params.encoder.w2.values());
    blocks.push_back(student.params.head_w.values());
    blocks.push_back(std::span<const double>(&head_b, 1));
    write_checkpoint(path, metadata, blocks);
}

TrainedStudent load_student(const std::filesystem::path& path) {
    const CheckpointData data = read_checkpoint(path);
    if (data.value("format") != "student") {
        throw FormatError(path.string() + ": not a student checkpoint");
    }
    const std::size_t m = data.value_as_size("attr_dim");
    const std::size_t d = data.value_as_size("hidden_dim");
    const std::size_t expected = m * d + d * d + d + 1;
    if (data.payload.size() != expected) {
        throw FormatError(path.string() + ": payload has " +
                          std::to_string(data.payload.size()) + " values, expected " +
                          std::to_string(expected));
    }

    TrainedStudent student;
    student.config.alpha = data.value_as_real("alpha");
    student.config.omega = data.value_as_real("omega");
    student.config.epochs = data.value_as_size("epochs");
    student.config.hidden_dim = d;
    student.config.seed = data.value_as_size("seed");
    student.config.resample_mask_each_epoch =
        data.value("resample_mask_each_epoch") == "1";
    student.resolved_learning_rate = data.value_as_real("learning_rate");
    student.config.learning_rate = student.resolved_learning_rate;
    student.teacher_kind = data.value("teacher");

    auto cursor = data.payload.begin();
    const auto take = [&cursor](linalg::DenseMatrix& dst, std::size_t rows,
                                std::size_t cols) {
        dst = linalg::DenseMatrix(rows, cols);
        std::copy(cursor, cursor + static_cast<std::ptrdiff_t>(rows * cols),
                  dst.values().begin());
        cursor += static_cast<std::ptrdiff_t>(rows * cols);
    };
    take(student.params.encoder.w1, m, d);
    take(student.params.encoder.w2, d, d);
    take(student.params.head_w, d, 1);
    student.params.head_b = *cursor;
    student.params.version = 0;
    return student;
}

std::optional<std::string> student_metadata(const std::filesystem::path& path,
                                            const std::string& key) {
    const CheckpointData data = read_checkpoint(path);
    for (const auto& [k, v] : data.metadata) {
        if (k == key) return v;
    }
    return std::nullopt;
}

}  // namespace graphnc::calib
