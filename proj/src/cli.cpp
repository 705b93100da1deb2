#include "graphnc/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphnc/calibration.hpp"
#include "graphnc/common.hpp"
#include "graphnc/eval.hpp"
#include "graphnc/gnn.hpp"
#include "graphnc/graph.hpp"
#include "graphnc/linalg.hpp"
#include "graphnc/teachers.hpp"
#include "text_io.hpp"

namespace graphnc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class PhaseTimer {
public:
    void start(const std::string& phase) {
        phase_ = phase;
        begin_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto end = std::chrono::steady_clock::now();
        durations_[phase_] =
            std::chrono::duration_cast<std::chrono::milliseconds>(end - begin_).count();
    }
    ordered_json to_json() const {
        ordered_json j;
        for (const auto& [phase, ms] : durations_) j[phase] = ms;
        return j;
    }

private:
    std::string phase_;
    std::chrono::steady_clock::time_point begin_;
    std::vector<std::pair<std::string, long long>> durations_raw_;
    std::map<std::string, long long> durations_;
};

// The manifest lives NEXT TO the output directory (<out>.manifest.json), so
// the directory itself holds only bit-reproducible artifacts.
fs::path manifest_path_for(const fs::path& out_dir) {
    fs::path p = out_dir;
    p += ".manifest.json";
    return p;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& argv, const ordered_json& config,
                    const ordered_json& inputs, const std::vector<std::string>& outputs,
                    const std::vector<std::uint64_t>& seeds, const PhaseTimer& timer) {
    ordered_json manifest;
    manifest["command"] = command;
    manifest["tool_version"] = kVersion;
    manifest["argv"] = argv;
    manifest["config"] = config;
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    manifest["seeds"] = seeds;
    manifest["durations_ms"] = timer.to_json();
    auto out = textio::open_output(manifest_path_for(out_dir));
    out << manifest.dump(2) << '\n';
}

void ensure_fresh_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_directory(dir)) {
        throw IoError(dir.string() + " exists and is not a directory");
    }
    if (fs::is_directory(dir) && !fs::is_empty(dir)) {
        if (!force) {
            throw IoError(dir.string() +
                          " already exists and is not empty (pass --force to overwrite)");
        }
    }
    fs::create_directories(dir);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string item = text.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (item.empty()) {
            throw ConfigError("--seeds: empty entry in '" + text + "'");
        }
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            seeds.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("--seeds: '" + item + "' is not a non-negative integer");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (seeds.empty()) throw ConfigError("--seeds: no seeds given");
    return seeds;
}

struct SplitOpts {
    double label_ratio = 0.15;
    std::uint64_t split_seed = 0;
};

void add_split_flags(CLI::App* cmd, SplitOpts& opts) {
    cmd->add_option("--label-ratio", opts.label_ratio,
                    "Fraction of normal nodes marked as labeled training normals")
        ->capture_default_str();
    cmd->add_option("--split-seed", opts.split_seed,
                    "Seed for the labeled-normal split (kept separate from the "
                    "model seed so sweeps share one split)")
        ->capture_default_str();
}

graph::AttributedGraph load_and_split(const std::string& data_dir, const SplitOpts& opts) {
    graph::AttributedGraph g = graph::load_graph(data_dir);
    if (g.labels) {
        g = graph::split_labeled_normals(g, opts.label_ratio, opts.split_seed);
    }
    return g;
}

double mean_of(const std::vector<double>& xs) {
    double sum = 0.0;
    for (const double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
    const double mean = mean_of(xs);
    double sum_sq = 0.0;
    for (const double x : xs) sum_sq += (x - mean) * (x - mean);
    return std::sqrt(sum_sq / static_cast<double>(xs.size()));
}

ordered_json aggregate_entry(const std::vector<double>& values) {
    ordered_json j;
    j["mean"] = mean_of(values);
    j["std"] = std_of(values);
    j["values"] = values;
    return j;
}

ordered_json comparison_json(const eval::EvalReport& teacher,
                             const eval::EvalReport& student) {
    ordered_json j;
    const auto put = [&j](const std::string& name, double t, double s) {
        j["teacher_" + name] = t;
        j["student_" + name] = s;
        j["delta_" + name] = s - t;
    };
    put("auroc", teacher.auroc, student.auroc);
    put("auprc", teacher.auprc, student.auprc);
    put("variance", teacher.normal_score_variance, student.normal_score_variance);
    put("fpr", teacher.fpr, student.fpr);
    put("fnr", teacher.fnr, student.fnr);
    return j;
}

void write_json_file(const ordered_json& j, const fs::path& path) {
    auto out = textio::open_output(path);
    out << j.dump(2) << '\n';
}

// ---- generate ----

struct GenerateOpts {
    std::string out;
    graph::SyntheticConfig cfg;
    std::optional<double> anomaly_rate;  // shorthand: 60/40 contextual/structural
    std::uint64_t seed = 0;
    bool force = false;
};

int cmd_generate(const GenerateOpts& opts) {
    PhaseTimer timer;
    graph::SyntheticConfig cfg = opts.cfg;
    if (opts.anomaly_rate) {
        if (!(*opts.anomaly_rate >= 0.0 && *opts.anomaly_rate < 0.5)) {
            throw ConfigError("--anomaly-rate must be in [0, 0.5)");
        }
        cfg.contextual_anomaly_rate = 0.6 * *opts.anomaly_rate;
        cfg.structural_anomaly_rate = 0.4 * *opts.anomaly_rate;
    }

    ensure_fresh_dir(opts.out, opts.force);

    timer.start("generate");
    const graph::AttributedGraph g = graph::generate_synthetic(cfg, opts.seed);
    timer.stop();
    timer.start("write");
    graph::save_graph(g, opts.out);
    timer.stop();

    ordered_json config;
    config["nodes"] = cfg.num_nodes;
    config["attr_dim"] = cfg.attr_dim;
    config["clusters"] = cfg.num_clusters;
    config["contextual_rate"] = cfg.contextual_anomaly_rate;
    config["structural_rate"] = cfg.structural_anomaly_rate;
    config["clique_size"] = cfg.clique_size;
    config["noise"] = cfg.feature_noise_scale;
    config["seed"] = opts.seed;

    std::vector<std::string> argv{"generate",
                                  "--out",
                                  opts.out,
                                  "--nodes",
                                  std::to_string(cfg.num_nodes),
                                  "--attr-dim",
                                  std::to_string(cfg.attr_dim),
                                  "--clusters",
                                  std::to_string(cfg.num_clusters),
                                  "--contextual-rate",
                                  textio::format_double(cfg.contextual_anomaly_rate),
                                  "--structural-rate",
                                  textio::format_double(cfg.structural_anomaly_rate),
                                  "--clique-size",
                                  std::to_string(cfg.clique_size),
                                  "--noise",
                                  textio::format_double(cfg.feature_noise_scale),
                                  "--seed",
                                  std::to_string(opts.seed),
                                  "--force"};
    write_manifest(opts.out, "generate", argv, config, ordered_json::object(),
                   {"edges.tsv", "features.tsv", "labels.tsv", "meta.json"},
                   {opts.seed}, timer);
    return 0;
}

// ---- train-teacher ----

struct TrainTeacherOpts {
    std::string data;
    std::string out;
    std::string teacher;  // dominant | ocgnn
    SplitOpts split;
    teachers::TeacherConfig cfg;
    bool json_to_stdout = false;
    bool force = false;
};

int cmd_train_teacher(const TrainTeacherOpts& opts) {
    PhaseTimer timer;
    ensure_fresh_dir(opts.out, opts.force);

    timer.start("load");
    const graph::AttributedGraph g = load_and_split(opts.data, opts.split);
    const graph::NormalizedAdjacency a_hat = graph::normalize_adjacency(g);
    timer.stop();

    timer.start("train");
    const teachers::TrainedTeacher teacher =
        opts.teacher == "dominant" ? teachers::train_dominant(g, a_hat, opts.cfg)
                                   : teachers::train_ocgnn(g, a_hat, opts.cfg);
    timer.stop();

    timer.start("evaluate");
    const eval::EvalReport report =
        eval::evaluate(teacher.scores.scores, g, std::nullopt, opts.cfg.seed);
    timer.stop();

    timer.start("write");
    teachers::save_teacher_scores(teacher.scores, fs::path(opts.out) / "scores.tsv");
    teachers::save_teacher(teacher, fs::path(opts.out) / "teacher.ckpt");
    eval::write_report_json(report, fs::path(opts.out) / "report.json");
    eval::write_report_csv(report, fs::path(opts.out) / "report.csv");
    timer.stop();

    if (opts.json_to_stdout) std::cout << eval::report_to_json(report);

    ordered_json config;
    config["teacher"] = opts.teacher;
    config["hidden_dim"] = opts.cfg.hidden_dim;
    config["epochs"] = opts.cfg.epochs;
    config["learning_rate"] = opts.cfg.learning_rate;
    config["attribute_weight"] = opts.cfg.attribute_weight;
    config["label_ratio"] = opts.split.label_ratio;
    config["split_seed"] = opts.split.split_seed;
    config["seed"] = opts.cfg.seed;

    ordered_json inputs;
    inputs["data"] = opts.data;

    std::vector<std::string> argv{"train-teacher",
                                  "--data",
                                  opts.data,
                                  "--out",
                                  opts.out,
                                  "--teacher",
                                  opts.teacher,
                                  "--hidden",
                                  std::to_string(opts.cfg.hidden_dim),
                                  "--epochs",
                                  std::to_string(opts.cfg.epochs),
                                  "--lr",
                                  textio::format_double(opts.cfg.learning_rate),
                                  "--lambda",
                                  textio::format_double(opts.cfg.attribute_weight),
                                  "--label-ratio",
                                  textio::format_double(opts.split.label_ratio),
                                  "--split-seed",
                                  std::to_string(opts.split.split_seed),
                                  "--seed",
                                  std::to_string(opts.cfg.seed),
                                  "--force"};
    write_manifest(opts.out, "train-teacher", argv, config, inputs,
                   {"scores.tsv", "teacher.ckpt", "report.json", "report.csv"},
                   {opts.cfg.seed}, timer);
    return 0;
}

// ---- calibrate ----

struct CalibrateOpts {
    std::string data;
    std::string out;
    std::string teacher_scores;
    SplitOpts split;
    calib::TrainConfig cfg;
    std::optional<double> lr;
    std::vector<std::uint64_t> seeds;  // singleton => flat layout
    bool sweep = false;
    bool json_to_stdout = false;
    bool force = false;
};

struct CalibrationRun {
    eval::EvalReport teacher_report;
    eval::EvalReport student_report;
};

CalibrationRun run_one_calibration(const graph::AttributedGraph& g,
                                   const graph::NormalizedAdjacency& a_hat,
                                   const teachers::TeacherScores& teacher_scores,
                                   const CalibrateOpts& opts, std::uint64_t seed,
                                   const fs::path& dir) {
    calib::TrainConfig cfg = opts.cfg;
    cfg.learning_rate = opts.lr;
    cfg.seed = seed;

    const calib::TrainedStudent student = calib::train_student(g, a_hat, teacher_scores, cfg);

    const gnn::ForwardCache fwd = gnn::forward(a_hat, g.attributes, student.params);
    ScoreVector student_scores(g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i) student_scores[i] = fwd.scores(i, 0);

    CalibrationRun result;
    result.teacher_report = eval::evaluate(teacher_scores.scores, g, std::nullopt, seed);
    result.student_report = eval::evaluate(student_scores, g, fwd.enc.embeddings, seed);

    fs::create_directories(dir);
    std::vector<std::pair<std::string, std::string>> extra;
    extra.emplace_back("label_ratio", textio::format_double(opts.split.label_ratio));
    extra.emplace_back("split_seed", std::to_string(opts.split.split_seed));
    calib::save_student(student, dir / "student.ckpt", extra);
    {
        auto out = textio::open_output(dir / "scores.tsv");
        for (std::size_t i = 0; i < student_scores.size(); ++i) {
            out << i << '\t' << textio::format_double(student_scores[i]) << '\n';
        }
    }
    calib::write_loss_trace(student.loss_trace, dir / "loss_trace.csv");
    eval::write_report_json(result.student_report, dir / "report.json");
    eval::write_report_csv(result.student_report, dir / "report.csv");
    write_json_file(comparison_json(result.teacher_report, result.student_report),
                    dir / "comparison.json");
    return result;
}

int cmd_calibrate(const CalibrateOpts& opts) {
    PhaseTimer timer;
    ensure_fresh_dir(opts.out, opts.force);

    timer.start("load");
    const graph::AttributedGraph g = load_and_split(opts.data, opts.split);
    const graph::NormalizedAdjacency a_hat = graph::normalize_adjacency(g);
    const teachers::TeacherScores teacher_scores =
        teachers::load_teacher_scores(opts.teacher_scores, g.num_nodes);
    timer.stop();

    std::vector<std::string> outputs;
    timer.start("train");
    ordered_json last_report_json;
    if (!opts.sweep) {
        const std::uint64_t seed = opts.seeds.front();
        const CalibrationRun run = run_one_calibration(g, a_hat, teacher_scores, opts,
                                                       seed, opts.out);
        outputs = {"student.ckpt", "scores.tsv", "loss_trace.csv",
                   "report.json",  "report.csv", "comparison.json"};
        if (opts.json_to_stdout) {
            std::cout << eval::report_to_json(run.student_report);
        }
    } else {
        std::vector<eval::EvalReport> reports;
        eval::EvalReport teacher_report;
        for (const std::uint64_t seed : opts.seeds) {
            const fs::path dir = fs::path(opts.out) / ("seed_" + std::to_string(seed));
            const CalibrationRun run =
                run_one_calibration(g, a_hat, teacher_scores, opts, seed, dir);
            reports.push_back(run.student_report);
            teacher_report = run.teacher_report;
            const std::string prefix = "seed_" + std::to_string(seed) + "/";
            for (const char* name : {"student.ckpt", "scores.tsv", "loss_trace.csv",
                                     "report.json", "report.csv", "comparison.json"}) {
                outputs.push_back(prefix + name);
            }
        }

        ordered_json aggregate;
        aggregate["seeds"] = opts.seeds;
        aggregate["teacher_auroc"] = teacher_report.auroc;
        aggregate["teacher_auprc"] = teacher_report.auprc;
        aggregate["teacher_variance"] = teacher_report.normal_score_variance;
        aggregate["teacher_fpr"] = teacher_report.fpr;
        aggregate["teacher_fnr"] = teacher_report.fnr;
        const auto collect = [&reports](auto getter) {
            std::vector<double> values;
            values.reserve(reports.size());
            for (const auto& r : reports) values.push_back(getter(r));
            return values;
        };
        aggregate["auroc"] =
            aggregate_entry(collect([](const auto& r) { return r.auroc; }));
        aggregate["auprc"] =
            aggregate_entry(collect([](const auto& r) { return r.auprc; }));
        aggregate["fpr"] = aggregate_entry(collect([](const auto& r) { return r.fpr; }));
        aggregate["fnr"] = aggregate_entry(collect([](const auto& r) { return r.fnr; }));
        aggregate["normal_score_variance"] = aggregate_entry(
            collect([](const auto& r) { return r.normal_score_variance; }));
        aggregate["prototype_deviation"] = aggregate_entry(collect(
            [](const auto& r) { return r.prototype_deviation.value_or(0.0); }));
        write_json_file(aggregate, fs::path(opts.out) / "aggregate.json");
        outputs.push_back("aggregate.json");
        if (opts.json_to_stdout) std::cout << aggregate.dump(2) << '\n';
    }
    timer.stop();

    ordered_json config;
    config["alpha"] = opts.cfg.alpha;
    config["omega"] = opts.cfg.omega;
    config["epochs"] = opts.cfg.epochs;
    config["hidden_dim"] = opts.cfg.hidden_dim;
    if (opts.lr) {
        config["learning_rate"] = *opts.lr;
    } else {
        config["learning_rate"] =
            calib::default_student_learning_rate(g.attr_dim());
    }
    config["resample_mask_each_epoch"] = opts.cfg.resample_mask_each_epoch;
    config["label_ratio"] = opts.split.label_ratio;
    config["split_seed"] = opts.split.split_seed;

    ordered_json inputs;
    inputs["data"] = opts.data;
    inputs["teacher_scores"] = opts.teacher_scores;

    std::vector<std::string> argv{"calibrate", "--data", opts.data, "--out", opts.out,
                                  "--teacher-scores", opts.teacher_scores};
    const auto push_flag = [&argv](const std::string& flag, const std::string& value) {
        argv.push_back(flag);
        argv.push_back(value);
    };
    push_flag("--alpha", textio::format_double(opts.cfg.alpha));
    push_flag("--omega", textio::format_double(opts.cfg.omega));
    push_flag("--epochs", std::to_string(opts.cfg.epochs));
    push_flag("--hidden", std::to_string(opts.cfg.hidden_dim));
    if (opts.lr) push_flag("--lr", textio::format_double(*opts.lr));
    if (opts.cfg.resample_mask_each_epoch) argv.push_back("--resample-mask");
    push_flag("--label-ratio", textio::format_double(opts.split.label_ratio));
    push_flag("--split-seed", std::to_string(opts.split.split_seed));
    if (opts.sweep) {
        std::string list;
        for (std::size_t i = 0; i < opts.seeds.size(); ++i) {
            if (i) list += ',';
            list += std::to_string(opts.seeds[i]);
        }
        push_flag("--seeds", list);
    } else {
        push_flag("--seed", std::to_string(opts.seeds.front()));
    }
    argv.push_back("--force");

    write_manifest(opts.out, "calibrate", argv, config, inputs, outputs, opts.seeds,
                   timer);
    return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
    std::string data;
    std::string scores;
    std::string out;
    SplitOpts split;
    std::uint64_t seed = 0;
    bool json_to_stdout = false;
    bool force = false;
};

int cmd_evaluate(const EvaluateOpts& opts) {
    PhaseTimer timer;
    ensure_fresh_dir(opts.out, opts.force);

    timer.start("load");
    const graph::AttributedGraph g = load_and_split(opts.data, opts.split);
    const teachers::TeacherScores scores =
        teachers::load_teacher_scores(opts.scores, g.num_nodes);
    timer.stop();

    timer.start("evaluate");
    const eval::EvalReport report = eval::evaluate(scores.scores, g, std::nullopt,
                                                   opts.seed);
    timer.stop();

    timer.start("write");
    eval::write_report_json(report, fs::path(opts.out) / "report.json");
    eval::write_report_csv(report, fs::path(opts.out) / "report.csv");
    timer.stop();

    if (opts.json_to_stdout) std::cout << eval::report_to_json(report);

    ordered_json config;
    config["label_ratio"] = opts.split.label_ratio;
    config["split_seed"] = opts.split.split_seed;
    config["seed"] = opts.seed;
    ordered_json inputs;
    inputs["data"] = opts.data;
    inputs["scores"] = opts.scores;
    std::vector<std::string> argv{"evaluate",
                                  "--data",
                                  opts.data,
                                  "--scores",
                                  opts.scores,
                                  "--out",
                                  opts.out,
                                  "--label-ratio",
                                  textio::format_double(opts.split.label_ratio),
                                  "--split-seed",
                                  std::to_string(opts.split.split_seed),
                                  "--seed",
                                  std::to_string(opts.seed),
                                  "--force"};
    write_manifest(opts.out, "evaluate", argv, config, inputs,
                   {"report.json", "report.csv"}, {opts.seed}, timer);
    return 0;
}

// ---- dump-embeddings ----

struct DumpOpts {
    std::string data;
    std::string checkpoint;
    std::string out;
    SplitOpts split;
    bool force = false;
};

int cmd_dump_embeddings(const DumpOpts& opts) {
    PhaseTimer timer;
    ensure_fresh_dir(opts.out, opts.force);

    timer.start("load");
    SplitOpts split = opts.split;
    // Prefer the split recorded at training time so the mask column matches.
    if (const auto ratio = calib::student_metadata(opts.checkpoint, "label_ratio")) {
        split.label_ratio = std::stod(*ratio);
    }
    if (const auto seed = calib::student_metadata(opts.checkpoint, "split_seed")) {
        split.split_seed = std::stoull(*seed);
    }
    const graph::AttributedGraph g = load_and_split(opts.data, split);
    const graph::NormalizedAdjacency a_hat = graph::normalize_adjacency(g);
    const calib::TrainedStudent student = calib::load_student(opts.checkpoint);
    timer.stop();

    timer.start("forward");
    const gnn::ForwardCache fwd = gnn::forward(a_hat, g.attributes, student.params);
    const linalg::DenseMatrix& h = fwd.enc.embeddings;
    timer.stop();

    timer.start("write");
    {
        auto out = textio::open_output(fs::path(opts.out) / "embeddings.csv");
        out << "node_id,label,is_labeled_normal";
        for (std::size_t j = 0; j < h.cols(); ++j) out << ",h_" << j;
        out << '\n';
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            const unsigned label = g.labels ? (*g.labels)[i] : 0;
            out << i << ',' << label << ',' << unsigned{g.labeled_normal[i] != 0};
            for (const double v : h.row(i)) out << ',' << textio::format_double(v);
            out << '\n';
        }
    }
    timer.stop();

    ordered_json config;
    config["label_ratio"] = split.label_ratio;
    config["split_seed"] = split.split_seed;
    ordered_json inputs;
    inputs["data"] = opts.data;
    inputs["checkpoint"] = opts.checkpoint;
    std::vector<std::string> argv{"dump-embeddings",
                                  "--data",
                                  opts.data,
                                  "--checkpoint",
                                  opts.checkpoint,
                                  "--out",
                                  opts.out,
                                  "--force"};
    write_manifest(opts.out, "dump-embeddings", argv, config, inputs,
                   {"embeddings.csv"}, {}, timer);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Teacher-student anomaly-score calibration for attributed graphs"};
    app.require_subcommand(1);

    bool serial = false;
    bool parallel = false;
    app.add_flag("--serial", serial,
                 "Force the bitwise-deterministic serial kernels (default)");
    app.add_flag("--parallel", parallel,
                 "Enable the row-parallel kernels (identical results, faster on "
                 "multicore hosts)")
        ->excludes("--serial");

    GenerateOpts gen;
    CLI::App* c_gen = app.add_subcommand("generate", "Write a synthetic dataset");
    c_gen->add_option("--out", gen.out, "Dataset directory to create")->required();
    c_gen->add_option("--nodes", gen.cfg.num_nodes)->capture_default_str();
    c_gen->add_option("--attr-dim", gen.cfg.attr_dim)->capture_default_str();
    c_gen->add_option("--clusters", gen.cfg.num_clusters)->capture_default_str();
    double anomaly_rate = 0.0;
    CLI::Option* rate_opt =
        c_gen->add_option("--anomaly-rate", anomaly_rate,
                          "Total anomaly fraction (60% contextual, 40% structural)");
    c_gen->add_option("--contextual-rate", gen.cfg.contextual_anomaly_rate)
        ->capture_default_str()
        ->excludes(rate_opt);
    c_gen->add_option("--structural-rate", gen.cfg.structural_anomaly_rate)
        ->capture_default_str()
        ->excludes(rate_opt);
    c_gen->add_option("--clique-size", gen.cfg.clique_size)->capture_default_str();
    c_gen->add_option("--noise", gen.cfg.feature_noise_scale)->capture_default_str();
    c_gen->add_option("--seed", gen.seed)->capture_default_str();
    c_gen->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

    TrainTeacherOpts tt;
    CLI::App* c_tt = app.add_subcommand("train-teacher", "Train a frozen teacher");
    c_tt->add_option("--data", tt.data, "Dataset directory")->required();
    c_tt->add_option("--out", tt.out, "Output directory")->required();
    c_tt->add_option("--teacher", tt.teacher, "Teacher kind")
        ->required()
        ->check(CLI::IsMember({"dominant", "ocgnn"}));
    c_tt->add_option("--hidden", tt.cfg.hidden_dim)->capture_default_str();
    c_tt->add_option("--epochs", tt.cfg.epochs)->capture_default_str();
    c_tt->add_option("--lr", tt.cfg.learning_rate)->capture_default_str();
    c_tt->add_option("--lambda", tt.cfg.attribute_weight,
                     "Attribute-vs-edge reconstruction mix (1 = attributes only)")
        ->capture_default_str();
    add_split_flags(c_tt, tt.split);
    c_tt->add_option("--seed", tt.cfg.seed)->capture_default_str();
    c_tt->add_flag("--json", tt.json_to_stdout, "Print the report to stdout");
    c_tt->add_flag("--force", tt.force, "Overwrite a non-empty output directory");

    CalibrateOpts cal;
    std::uint64_t cal_seed = 0;
    std::string cal_seeds;
    CLI::App* c_cal = app.add_subcommand(
        "calibrate", "Train the student against frozen teacher scores");
    c_cal->add_option("--data", cal.data, "Dataset directory")->required();
    c_cal->add_option("--out", cal.out, "Output directory")->required();
    c_cal->add_option("--teacher-scores", cal.teacher_scores,
                      "Teacher scores file (node_id<TAB>score)")
        ->required();
    c_cal->add_option("--alpha", cal.cfg.alpha)->capture_default_str();
    c_cal->add_option("--omega", cal.cfg.omega)->capture_default_str();
    c_cal->add_option("--epochs", cal.cfg.epochs)->capture_default_str();
    c_cal->add_option("--hidden", cal.cfg.hidden_dim)->capture_default_str();
    double cal_lr = 0.0;
    CLI::Option* cal_lr_opt = c_cal->add_option(
        "--lr", cal_lr, "Learning rate (default picked by attribute dimension)");
    c_cal->add_flag("--resample-mask", cal.cfg.resample_mask_each_epoch,
                    "Draw a fresh augmented view every epoch");
    add_split_flags(c_cal, cal.split);
    CLI::Option* seed_opt = c_cal->add_option("--seed", cal_seed)->capture_default_str();
    c_cal->add_option("--seeds", cal_seeds, "Comma-separated seed sweep")
        ->excludes(seed_opt);
    c_cal->add_flag("--json", cal.json_to_stdout, "Print the report to stdout");
    c_cal->add_flag("--force", cal.force, "Overwrite a non-empty output directory");

    EvaluateOpts ev;
    CLI::App* c_ev = app.add_subcommand("evaluate", "Score an arbitrary scores file");
    c_ev->add_option("--data", ev.data, "Dataset directory")->required();
    c_ev->add_option("--scores", ev.scores, "Scores file (node_id<TAB>score)")
        ->required();
    c_ev->add_option("--out", ev.out, "Output directory")->required();
    add_split_flags(c_ev, ev.split);
    c_ev->add_option("--seed", ev.seed)->capture_default_str();
    c_ev->add_flag("--json", ev.json_to_stdout, "Print the report to stdout");
    c_ev->add_flag("--force", ev.force, "Overwrite a non-empty output directory");

    DumpOpts dump;
    CLI::App* c_dump = app.add_subcommand(
        "dump-embeddings", "Export final-layer node representations as CSV");
    c_dump->add_option("--data", dump.data, "Dataset directory")->required();
    c_dump->add_option("--checkpoint", dump.checkpoint, "Student checkpoint")
        ->required();
    c_dump->add_option("--out", dump.out, "Output directory")->required();
    add_split_flags(c_dump, dump.split);
    c_dump->add_flag("--force", dump.force, "Overwrite a non-empty output directory");

    std::string replay_manifest_path;
    std::string replay_out;
    CLI::App* c_replay = app.add_subcommand(
        "replay", "Re-run a command from its manifest into a new directory");
    c_replay->add_option("--manifest", replay_manifest_path, "Manifest file")
        ->required();
    c_replay->add_option("--out", replay_out, "New output directory")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("graphnc");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    linalg::set_exec_mode(parallel ? linalg::ExecMode::parallel
                                   : linalg::ExecMode::serial);

    try {
        if (c_gen->parsed()) {
            if (rate_opt->count() > 0) gen.anomaly_rate = anomaly_rate;
            return cmd_generate(gen);
        }
        if (c_tt->parsed()) return cmd_train_teacher(tt);
        if (c_cal->parsed()) {
            if (cal_lr_opt->count() > 0) cal.lr = cal_lr;
            if (!cal_seeds.empty()) {
                cal.seeds = parse_seed_list(cal_seeds);
                cal.sweep = true;
            } else {
                cal.seeds = {cal_seed};
                cal.sweep = false;
            }
            return cmd_calibrate(cal);
        }
        if (c_ev->parsed()) return cmd_evaluate(ev);
        if (c_dump->parsed()) return cmd_dump_embeddings(dump);
        if (c_replay->parsed()) {
            return replay_manifest(replay_manifest_path, replay_out);
        }
        std::cerr << "error: no command given\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

int run_main(int argc, char** argv) {
    std::vector<std::string> args;
    args.reserve(argc > 0 ? static_cast<std::size_t>(argc - 1) : 0);
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

int replay_manifest(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& new_out) {
    ordered_json manifest;
    {
        auto in = textio::open_input(manifest_path);
        try {
            in >> manifest;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(manifest_path.string() + ": " + std::string(e.what()));
        }
    }
    if (!manifest.contains("argv") || !manifest["argv"].is_array()) {
        throw FormatError(manifest_path.string() + ": manifest has no argv record");
    }
    std::vector<std::string> args;
    for (const auto& item : manifest["argv"]) args.push_back(item.get<std::string>());
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] == "--out") {
            args[i + 1] = new_out.string();
            replaced = true;
            break;
        }
    }
    if (!replaced) {
        throw FormatError(manifest_path.string() + ": recorded argv has no --out flag");
    }
    return run(args);
}

}  // namespace graphnc::cli
