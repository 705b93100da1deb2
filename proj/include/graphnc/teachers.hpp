#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "graphnc/common.hpp"
#include "graphnc/gnn.hpp"
#include "graphnc/graph.hpp"
#include "graphnc/linalg.hpp"

namespace graphnc::teachers {

enum class TeacherKind { dominant, ocgnn, file };

const char* kind_name(TeacherKind kind);

// Frozen per-node anomaly-score distribution handed to calibration. Scores
// are min-max normalized to [0, 1]; raw_min/raw_max record the original range.
struct TeacherScores {
    ScoreVector scores;
    TeacherKind kind = TeacherKind::file;
    double raw_min = 0.0;
    double raw_max = 0.0;
};

struct TeacherConfig {
    std::size_t hidden_dim = 32;
    std::size_t epochs = 100;
    double learning_rate = 5e-3;
    // Reconstruction mix for the autoencoder teacher: the attribute term gets
    // this weight, the edge term gets the complement. 1 = attribute-only.
    double attribute_weight = 0.5;
    std::uint64_t seed = 0;
};

// A trained built-in teacher: its scores plus everything needed to persist
// and audit it. attr_decoder is empty for the one-class teacher; center is
// empty for the reconstruction teacher.
struct TrainedTeacher {
    TeacherScores scores;
    gnn::EncoderParams encoder;
    linalg::DenseMatrix embeddings;    // final encoder output, N x d
    linalg::DenseMatrix attr_decoder;  // d x M
    linalg::DenseMatrix center;        // 1 x d
    TeacherConfig config;
};

// (s - min) / (max - min); an all-equal input maps to all 0.5. Rank-preserving.
ScoreVector normalize_scores(const ScoreVector& raw);

// Graph-autoencoder teacher: 2-layer GCN encoder, linear attribute decoder,
// inner-product edge decoder. The reconstruction loss is restricted to
// labeled-normal rows; every node is scored by its weighted reconstruction
// error (attribute distance and adjacency-row distance).
TrainedTeacher train_dominant(const graph::AttributedGraph& g,
                              const graph::NormalizedAdjacency& a_hat,
                              const TeacherConfig& cfg);

// One-class teacher: 2-layer GCN encoder; the hypersphere center is the mean
// labeled-normal embedding at initialization and stays frozen; training pulls
// labeled-normal embeddings toward it. Score = squared distance to center.
TrainedTeacher train_ocgnn(const graph::AttributedGraph& g,
                           const graph::NormalizedAdjacency& a_hat,
                           const TeacherConfig& cfg);

// Adapter for externally computed detectors: reads `node_id<TAB>score` with
// ids 0..n-1 each exactly once, then min-max normalizes.
TeacherScores load_teacher_scores(const std::filesystem::path& path, std::size_t n);

void save_teacher_scores(const TeacherScores& scores, const std::filesystem::path& path);

void save_teacher(const TrainedTeacher& teacher, const std::filesystem::path& path);
TrainedTeacher load_teacher(const std::filesystem::path& path);

}  // namespace graphnc::teachers
