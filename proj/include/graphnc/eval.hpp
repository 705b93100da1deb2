#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphnc/common.hpp"
#include "graphnc/graph.hpp"
#include "graphnc/linalg.hpp"

namespace graphnc::eval {

struct EvalReport {
    double auroc = 0.0;
    double auprc = 0.0;
    double fpr = 0.0;  // at the contamination-quantile threshold
    double fnr = 0.0;
    double threshold = 0.0;
    double normal_score_mean = 0.0;
    double normal_score_variance = 0.0;  // population variance
    // Mean distance of labeled-normal embeddings to their mean embedding;
    // absent when the caller has no embeddings (score-file evaluation).
    std::optional<double> prototype_deviation;
    std::size_t num_nodes = 0;
    std::size_t num_anomalies = 0;
    std::size_t num_labeled_normal = 0;
    std::uint64_t seed = 0;
};

// Probability that a random anomaly outscores a random normal, ties at 1/2.
// Inputs are already restricted to the evaluation set.
double auroc(const ScoreVector& scores, const std::vector<std::uint8_t>& labels);

// Average precision: step-interpolated area under the precision-recall curve.
// Ranking is by descending score, ties broken by ascending position.
double auprc(const ScoreVector& scores, const std::vector<std::uint8_t>& labels);

// fpr = #(normal with score >= tau) / #normal;
// fnr = #(anomaly with score <  tau) / #anomaly.
std::pair<double, double> fpr_fnr(const ScoreVector& scores,
                                  const std::vector<std::uint8_t>& labels, double tau);

// The (1 - anomaly-rate) empirical quantile of the scores: the k-th smallest
// value with k = #scores - #anomalies (0-indexed).
double contamination_threshold(const ScoreVector& scores,
                               const std::vector<std::uint8_t>& labels);

double normal_mean(const ScoreVector& scores, const std::vector<std::uint8_t>& labels);
double normal_variance(const ScoreVector& scores,
                       const std::vector<std::uint8_t>& labels);

double prototype_deviation(const linalg::DenseMatrix& embeddings,
                           const std::vector<std::uint8_t>& labeled);

// Full report over the evaluation set (all nodes NOT in the labeled-normal
// training mask). Labels must be present; embeddings, when given, feed the
// prototype-deviation diagnostic (which looks at the labeled-normal rows).
EvalReport evaluate(const ScoreVector& scores, const graph::AttributedGraph& g,
                    const std::optional<linalg::DenseMatrix>& embeddings,
                    std::uint64_t seed);

std::string report_to_json(const EvalReport& report);
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace graphnc::eval
