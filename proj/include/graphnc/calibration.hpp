#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphnc/checkpoint.hpp"
#include "graphnc/common.hpp"
#include "graphnc/gnn.hpp"
#include "graphnc/graph.hpp"
#include "graphnc/teachers.hpp"

namespace graphnc::calib {

struct TrainConfig {
    double alpha = 0.01;  // weight of the representation-consistency term
    double omega = 0.30;  // attribute mask ratio for the augmented view
    // When unset, picked by attribute dimension (wide-attribute graphs train
    // with 5e-3, narrow ones with 5e-4).
    std::optional<double> learning_rate;
    std::size_t epochs = 500;
    std::size_t hidden_dim = 64;
    std::uint64_t seed = 0;
    bool resample_mask_each_epoch = false;  // default: one fixed augmented view
};

double default_student_learning_rate(std::size_t attr_dim);

struct LossRecord {
    double total = 0.0;
    double score_da = 0.0;  // score-distribution alignment term
    double norm_reg = 0.0;  // representation-consistency term (unweighted)
};

struct TrainedStudent {
    gnn::StudentParams params;
    TrainConfig config;
    double resolved_learning_rate = 0.0;
    std::string teacher_kind;
    std::vector<LossRecord> loss_trace;  // one record per epoch
};

struct ScoreDaResult {
    double loss = 0.0;
    ScoreVector grad;  // d loss / d y_s, per node
};

// Mean squared gap between student and teacher scores over ALL nodes,
// labeled and unlabeled alike.
ScoreDaResult score_da_loss(const ScoreVector& y_s, const ScoreVector& y_t);

struct NormRegResult {
    double loss = 0.0;
    linalg::DenseMatrix d_h;        // gradient on the original-view embeddings
    linalg::DenseMatrix d_h_tilde;  // gradient on the augmented-view embeddings
};

// Mean squared embedding gap between the two views, restricted to
// labeled-normal rows; gradients are zero on all other rows.
NormRegResult norm_reg_loss(const linalg::DenseMatrix& h,
                            const linalg::DenseMatrix& h_tilde,
                            const std::vector<std::uint8_t>& labeled);

// The full calibration loop: one fixed augmented view, then per epoch a
// forward pass on each view, the joint loss (alignment + alpha * consistency),
// exact backprop through both views into the shared weights, and one Adam
// step. Teacher scores are read-only throughout.
TrainedStudent train_student(const graph::AttributedGraph& g,
                             const graph::NormalizedAdjacency& a_hat,
                             const teachers::TeacherScores& y_t, const TrainConfig& cfg);

// Student forward scores on the unmasked graph; the deployment scoring path.
ScoreVector infer(const TrainedStudent& student, const graph::AttributedGraph& g,
                  const graph::NormalizedAdjacency& a_hat);

void write_loss_trace(const std::vector<LossRecord>& trace,
                      const std::filesystem::path& path);

// Student checkpoint: GNC1 container with W1, W2, head_w, head_b blocks.
// extra_metadata is appended verbatim (callers stash run context there).
void save_student(const TrainedStudent& student, const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, std::string>>&
                      extra_metadata = {});
TrainedStudent load_student(const std::filesystem::path& path);

// Metadata echoed back by load_student for callers that stashed run context.
std::optional<std::string> student_metadata(const std::filesystem::path& path,
                                            const std::string& key);

}  // namespace graphnc::calib
