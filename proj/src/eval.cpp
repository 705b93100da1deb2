#include "graphnc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "text_io.hpp"

namespace graphnc::eval {

namespace {

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

ClassCounts require_both_classes(const ScoreVector& scores,
                                 const std::vector<std::uint8_t>& labels,
                                 const char* who) {
    if (scores.size() != labels.size()) {
        throw DimensionError(std::string(who) + ": scores and labels lengths differ");
    }
    ClassCounts counts;
    for (const auto label : labels) {
        if (label) {
            ++counts.positives;
        } else {
            ++counts.negatives;
        }
    }
    if (counts.positives == 0 || counts.negatives == 0) {
        throw ContractError(std::string(who) +
                            ": need both classes in the evaluation set (got " +
                            std::to_string(counts.positives) + " anomalies, " +
                            std::to_string(counts.negatives) + " normals)");
    }
    return counts;
}

}  // namespace

double auroc(const ScoreVector& scores, const std::vector<std::uint8_t>& labels) {
    const ClassCounts counts = require_both_classes(scores, labels, "auroc");

    // Mann-Whitney rank sum with tie-averaged ranks; equivalent to counting
    // anomaly-over-normal pairs with ties worth 1/2.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        // 1-based ranks i+1 .. j+1 share the average rank.
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) positive_rank_sum += avg_rank;
        }
        i = j + 1;
    }

    const auto p = static_cast<double>(counts.positives);
    const auto n = static_cast<double>(counts.negatives);
    const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * n);
}

double auprc(const ScoreVector& scores, const std::vector<std::uint8_t>& labels) {
    const ClassCounts counts = require_both_classes(scores, labels, "auprc");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // deterministic tie rule: ascending position
    });

    double average_precision = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 1; rank <= order.size(); ++rank) {
        if (labels[order[rank - 1]]) {
            ++hits;
            average_precision +=
                static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    return average_precision / static_cast<double>(counts.positives);
}

std::pair<double, double> fpr_fnr(const ScoreVector& scores,
                                  const std::vector<std::uint8_t>& labels, double tau) {
    const ClassCounts counts = require_both_classes(scores, labels, "fpr_fnr");
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i]) {
            if (scores[i] < tau) ++false_negatives;
        } else {
            if (scores[i] >= tau) ++false_positives;
        }
    }
    return {static_cast<double>(false_positives) / static_cast<double>(counts.negatives),
            static_cast<double>(false_negatives) / static_cast<double>(counts.positives)};
}

double contamination_threshold(const ScoreVector& scores,
                               const std::vector<std::uint8_t>& labels) {
    const ClassCounts counts = require_both_classes(scores, labels, "threshold");
    ScoreVector sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    return sorted[sorted.size() - counts.positives];
}

double normal_mean(const ScoreVector& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("normal_mean: scores and labels lengths differ");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) {
            sum += scores[i];
            ++count;
        }
    }
    if (count == 0) throw ContractError("normal_mean: no normal nodes");
    return sum / static_cast<double>(count);
}

double normal_variance(const ScoreVector& scores,
                       const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("normal_variance: scores and labels lengths differ");
    }
    std::size_t count = 0;
    for (const auto label : labels) count += label == 0;
    if (count < 2) {
        throw ContractError("normal_variance: need at least 2 normal nodes");
    }
    const double mean = normal_mean(scores, labels);
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) {
            const double diff = scores[i] - mean;
            sum_sq += diff * diff;
        }
    }
    return sum_sq / static_cast<double>(count);
}

double prototype_deviation(const linalg::DenseMatrix& embeddings,
                           const std::vector<std::uint8_t>& labeled) {
    if (labeled.size() != embeddings.rows()) {
        throw DimensionError("prototype_deviation: mask length != embedding rows");
    }
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        if (labeled[i]) members.push_back(i);
    }
    if (members.empty()) {
        throw ContractError("prototype_deviation: labeled-normal mask is empty");
    }

    const std::size_t d = embeddings.cols();
    std::vector<double> prototype(d, 0.0);
    for (const std::size_t i : members) {
        const auto row = embeddings.row(i);
        for (std::size_t j = 0; j < d; ++j) prototype[j] += row[j];
    }
    for (double& v : prototype) v /= static_cast<double>(members.size());

    double total = 0.0;
    for (const std::size_t i : members) {
        const auto row = embeddings.row(i);
        double dist_sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = row[j] - prototype[j];
            dist_sq += diff * diff;
        }
        total += std::sqrt(dist_sq);
    }
    return total / static_cast<double>(members.size());
}

EvalReport evaluate(const ScoreVector& scores, const graph::AttributedGraph& g,
                    const std::optional<linalg::DenseMatrix>& embeddings,
                    std::uint64_t seed) {
    if (!g.labels) {
        throw ConfigError("evaluate: dataset has no labels.tsv; evaluation needs "
                          "ground truth");
    }
    if (scores.size() != g.num_nodes) {
        throw DimensionError("evaluate: score count (" + std::to_string(scores.size()) +
                             ") != num_nodes (" + std::to_string(g.num_nodes) + ")");
    }

    // The labeled-normal training nodes are held out; everything else is test.
    ScoreVector eval_scores;
    std::vector<std::uint8_t> eval_labels;
    eval_scores.reserve(g.num_nodes);
    eval_labels.reserve(g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if (g.labeled_normal[i]) continue;
        eval_scores.push_back(scores[i]);
        eval_labels.push_back((*g.labels)[i]);
    }

    EvalReport report;
    report.auroc = auroc(eval_scores, eval_labels);
    report.auprc = auprc(eval_scores, eval_labels);
    report.threshold = contamination_threshold(eval_scores, eval_labels);
    const auto [fpr_value, fnr_value] = fpr_fnr(eval_scores, eval_labels, report.threshold);
    report.fpr = fpr_value;
    report.fnr = fnr_value;
    report.normal_score_mean = normal_mean(eval_scores, eval_labels);
    report.normal_score_variance = normal_variance(eval_scores, eval_labels);
    if (embeddings && g.num_labeled_normal() > 0) {
        report.prototype_deviation = prototype_deviation(*embeddings, g.labeled_normal);
    }
    report.num_nodes = g.num_nodes;
    report.num_anomalies = 0;
    for (const auto label : eval_labels) report.num_anomalies += label != 0;
    report.num_labeled_normal = g.num_labeled_normal();
    report.seed = seed;
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["auroc"] = report.auroc;
    j["auprc"] = report.auprc;
    j["fpr"] = report.fpr;
    j["fnr"] = report.fnr;
    j["threshold"] = report.threshold;
    j["normal_score_mean"] = report.normal_score_mean;
    j["normal_score_variance"] = report.normal_score_variance;
    if (report.prototype_deviation) {
        j["prototype_deviation"] = *report.prototype_deviation;
    } else {
        j["prototype_deviation"] = nullptr;
    }
    j["num_nodes"] = report.num_nodes;
    j["num_anomalies"] = report.num_anomalies;
    j["num_labeled_normal"] = report.num_labeled_normal;
    j["seed"] = report.seed;
    return j.dump(2) + "\n";
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
    auto out = textio::open_output(path);
    out << report_to_json(report);
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    auto out = textio::open_output(path);
    out << "metric,value\n";
    out << "auroc," << textio::format_double(report.auroc) << '\n';
    out << "auprc," << textio::format_double(report.auprc) << '\n';
    out << "fpr," << textio::format_double(report.fpr) << '\n';
    out << "fnr," << textio::format_double(report.fnr) << '\n';
    out << "threshold," << textio::format_double(report.threshold) << '\n';
    out << "normal_score_mean," << textio::format_double(report.normal_score_mean)
        << '\n';
    out << "normal_score_variance,"
        << textio::format_double(report.normal_score_variance) << '\n';
    if (report.prototype_deviation) {
        out << "prototype_deviation,"
            << textio::format_double(*report.prototype_deviation) << '\n';
    }
    out << "num_nodes," << report.num_nodes << '\n';
    out << "num_anomalies," << report.num_anomalies << '\n';
    out << "num_labeled_normal," << report.num_labeled_normal << '\n';
    out << "seed," << report.seed << '\n';
}

}  // namespace graphnc::eval
