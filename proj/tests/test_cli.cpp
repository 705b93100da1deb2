#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using testutil::ScratchDir;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the installed binary with shell redirection; scratch paths carry no
// spaces so no quoting gymnastics are needed.
CliResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out_path = dir / "cli_stdout.txt";
    const fs::path err_path = dir / "cli_stderr.txt";
    const std::string cmd = std::string(GRAPHNC_CLI_PATH) + " " + args + " >" +
                            out_path.string() + " 2>" + err_path.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testutil::read_file(out_path);
    r.err = testutil::read_file(err_path);
    return r;
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        files[fs::relative(entry.path(), root).string()] =
            testutil::read_file(entry.path());
    }
    return files;
}

std::string make_dataset(const ScratchDir& dir, const std::string& name,
                         const std::string& extra = "") {
    const fs::path data = dir / name;
    const CliResult r = run_cli("generate --out " + data.string() +
                                    " --nodes 120 --attr-dim 6 --seed 3 " + extra,
                                dir.path());
    REQUIRE(r.code == 0);
    return data.string();
}

json parse_json_file(const fs::path& path) {
    return json::parse(testutil::read_file(path));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help exits cleanly and lists the subcommands") {
    ScratchDir dir("cli_help");
    const CliResult r = run_cli("--help", dir.path());
    CHECK(r.code == 0);
    for (const char* name :
         {"generate", "train-teacher", "calibrate", "evaluate", "dump-embeddings",
          "replay"}) {
        CAPTURE(name);
        CHECK(r.out.find(name) != std::string::npos);
    }
}

TEST_CASE("bad command lines exit with code 2 and an error line") {
    ScratchDir dir("cli_badargs");
    SUBCASE("unknown flag") {
        const CliResult r = run_cli("generate --bogus 1", dir.path());
        CHECK(r.code == 2);
        CHECK(r.err.rfind("error:", 0) == 0);
    }
    SUBCASE("missing required option") {
        const CliResult r = run_cli("train-teacher --out x", dir.path());
        CHECK(r.code == 2);
        CHECK(r.err.rfind("error:", 0) == 0);
    }
    SUBCASE("serial and parallel are mutually exclusive") {
        const CliResult r = run_cli(
            "--serial --parallel generate --out " + (dir / "d").string(), dir.path());
        CHECK(r.code == 2);
    }
    SUBCASE("anomaly-rate excludes the per-kind rates") {
        const CliResult r = run_cli("generate --out " + (dir / "d").string() +
                                        " --anomaly-rate 0.1 --contextual-rate 0.05",
                                    dir.path());
        CHECK(r.code == 2);
    }
    SUBCASE("unknown teacher name lists the valid choices") {
        const CliResult r = run_cli("train-teacher --data " + (dir / "d").string() +
                                        " --out " + (dir / "t").string() +
                                        " --teacher bogus",
                                    dir.path());
        CHECK(r.code == 2);
        CHECK(r.err.find("dominant") != std::string::npos);
        CHECK(r.err.find("ocgnn") != std::string::npos);
    }
}

TEST_CASE("generate writes a complete, deterministic dataset plus manifest") {
    ScratchDir dir("cli_generate");
    const std::string d1 = make_dataset(dir, "d1");
    const auto tree = snapshot_tree(d1);
    REQUIRE(tree.size() == 4);
    CHECK(tree.count("features.tsv") == 1);
    CHECK(tree.count("edges.tsv") == 1);
    CHECK(tree.count("labels.tsv") == 1);
    CHECK(tree.count("meta.json") == 1);

    const fs::path manifest = fs::path(d1 + ".manifest.json");
    REQUIRE(fs::exists(manifest));
    const json m = parse_json_file(manifest);
    CHECK(m.at("command") == "generate");
    CHECK(m.at("argv").is_array());
    CHECK(m.at("seeds").is_array());
    CHECK(m.at("durations_ms").is_object());

    const std::string d2 = make_dataset(dir, "d2");
    CHECK(snapshot_tree(d2) == tree);
}

TEST_CASE("generate rejects an out-of-range anomaly rate") {
    ScratchDir dir("cli_genrate");
    const CliResult r = run_cli(
        "generate --out " + (dir / "d").string() + " --anomaly-rate 0.6", dir.path());
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error:", 0) == 0);
}

TEST_CASE("train-teacher emits scores, checkpoint, and reports") {
    ScratchDir dir("cli_teacher");
    const std::string data = make_dataset(dir, "d");
    const fs::path out = dir / "tt";
    const CliResult r = run_cli("train-teacher --data " + data + " --out " +
                                    out.string() +
                                    " --teacher ocgnn --hidden 8 --epochs 30",
                                dir.path());
    REQUIRE(r.code == 0);
    for (const char* name : {"scores.tsv", "teacher.ckpt", "report.json", "report.csv"}) {
        CAPTURE(name);
        CHECK(fs::exists(out / name));
    }
    const json report = parse_json_file(out / "report.json");
    const double auroc = report.at("auroc").get<double>();
    CHECK(auroc > 0.5);
    CHECK(auroc <= 1.0);
    CHECK(report.at("num_nodes") == 120);

    // One normalized score per node, tab-separated, already min-max scaled.
    std::istringstream scores(testutil::read_file(out / "scores.tsv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(scores, line)) {
        const auto tab = line.find('\t');
        REQUIRE(tab != std::string::npos);
        const double value = std::stod(line.substr(tab + 1));
        CHECK(value >= 0.0);
        CHECK(value <= 1.0);
        ++rows;
    }
    CHECK(rows == 120);
}

TEST_CASE("evaluate reproduces a teacher report byte for byte") {
    ScratchDir dir("cli_evaluate");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 30",
                    dir.path())
                .code == 0);
    const fs::path ev = dir / "ev";
    const CliResult r =
        run_cli("evaluate --data " + data + " --scores " + (tt / "scores.tsv").string() +
                    " --out " + ev.string(),
                dir.path());
    REQUIRE(r.code == 0);
    CHECK(testutil::read_file(ev / "report.json") ==
          testutil::read_file(tt / "report.json"));
    CHECK(testutil::read_file(ev / "report.csv") ==
          testutil::read_file(tt / "report.csv"));
}

TEST_CASE("calibrate emits the full artifact set and leaves inputs untouched") {
    ScratchDir dir("cli_calibrate");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 30",
                    dir.path())
                .code == 0);
    const auto data_before = snapshot_tree(data);
    const auto teacher_before = snapshot_tree(tt);

    const fs::path cal = dir / "cal";
    const CliResult r = run_cli(
        "calibrate --data " + data + " --teacher-scores " +
            (tt / "scores.tsv").string() + " --out " + cal.string() +
            " --epochs 40 --hidden 8 --seed 2",
        dir.path());
    REQUIRE(r.code == 0);
    for (const char* name : {"student.ckpt", "scores.tsv", "loss_trace.csv",
                             "report.json", "report.csv", "comparison.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(cal / name));
    }
    const json cmp = parse_json_file(cal / "comparison.json");
    for (const char* key : {"teacher_auroc", "student_auroc", "delta_auroc",
                            "teacher_variance", "student_variance"}) {
        CAPTURE(key);
        CHECK(cmp.contains(key));
    }
    const json report = parse_json_file(cal / "report.json");
    CHECK(report.at("prototype_deviation").is_number());

    CHECK(snapshot_tree(data) == data_before);
    CHECK(snapshot_tree(tt) == teacher_before);
}

TEST_CASE("omega zero writes an all-zero consistency column") {
    ScratchDir dir("cli_omega0");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 20",
                    dir.path())
                .code == 0);
    const fs::path cal = dir / "cal";
    REQUIRE(run_cli("calibrate --data " + data + " --teacher-scores " +
                        (tt / "scores.tsv").string() + " --out " + cal.string() +
                        " --epochs 25 --hidden 8 --omega 0 --alpha 0.5",
                    dir.path())
                .code == 0);

    std::istringstream trace(testutil::read_file(cal / "loss_trace.csv"));
    std::string line;
    REQUIRE(std::getline(trace, line));
    CHECK(line == "epoch,total,score_da,norm_reg");
    std::size_t rows = 0;
    while (std::getline(trace, line)) {
        const auto last_comma = line.rfind(',');
        CHECK(std::stod(line.substr(last_comma + 1)) == 0.0);
        ++rows;
    }
    CHECK(rows == 25);
}

TEST_CASE("alpha zero writes an all-zero consistency column") {
    ScratchDir dir("cli_alpha0");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 20",
                    dir.path())
                .code == 0);
    const fs::path cal = dir / "cal";
    REQUIRE(run_cli("calibrate --data " + data + " --teacher-scores " +
                        (tt / "scores.tsv").string() + " --out " + cal.string() +
                        " --epochs 20 --hidden 8 --alpha 0",
                    dir.path())
                .code == 0);

    std::istringstream trace(testutil::read_file(cal / "loss_trace.csv"));
    std::string line;
    REQUIRE(std::getline(trace, line));
    std::size_t rows = 0;
    while (std::getline(trace, line)) {
        const auto last_comma = line.rfind(',');
        CHECK(std::stod(line.substr(last_comma + 1)) == 0.0);
        ++rows;
    }
    CHECK(rows == 20);
}

TEST_CASE("a malformed scores line reports its line number") {
    ScratchDir dir("cli_badscores");
    const std::string data = make_dataset(dir, "d");
    const fs::path scores = dir / "scores.tsv";
    {
        std::ofstream out(scores);
        out << "0\t0.25\n1\t0.75\n2\tnot_a_number\n";
    }
    const CliResult r = run_cli("evaluate --data " + data + " --scores " +
                                    scores.string() + " --out " +
                                    (dir / "ev").string(),
                                dir.path());
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error:", 0) == 0);
    CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("seed sweeps create per-seed runs plus an aggregate") {
    ScratchDir dir("cli_sweep");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 20",
                    dir.path())
                .code == 0);
    const fs::path cal = dir / "sweep";
    const CliResult r = run_cli("calibrate --data " + data + " --teacher-scores " +
                                    (tt / "scores.tsv").string() + " --out " +
                                    cal.string() + " --epochs 25 --hidden 8 --seeds 5,9",
                                dir.path());
    REQUIRE(r.code == 0);
    CHECK(fs::exists(cal / "seed_5" / "student.ckpt"));
    CHECK(fs::exists(cal / "seed_9" / "student.ckpt"));
    CHECK(!fs::exists(cal / "student.ckpt"));

    const json agg = parse_json_file(cal / "aggregate.json");
    const json& auroc = agg.at("auroc");
    CHECK(auroc.at("values").size() == 2);
    CHECK(auroc.contains("mean"));
    CHECK(auroc.contains("std"));
    CHECK(agg.at("teacher_auroc").is_number());
    CHECK(agg.at("seeds") == json::array({5, 9}));

    SUBCASE("seed and seeds are mutually exclusive") {
        const CliResult bad = run_cli(
            "calibrate --data " + data + " --teacher-scores " +
                (tt / "scores.tsv").string() + " --out " + (dir / "x").string() +
                " --seed 1 --seeds 1,2",
            dir.path());
        CHECK(bad.code == 2);
    }
}

TEST_CASE("replay reproduces a calibration run byte for byte") {
    ScratchDir dir("cli_replay");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 20",
                    dir.path())
                .code == 0);
    const fs::path cal = dir / "cal";
    REQUIRE(run_cli("calibrate --data " + data + " --teacher-scores " +
                        (tt / "scores.tsv").string() + " --out " + cal.string() +
                        " --epochs 30 --hidden 8 --seed 4",
                    dir.path())
                .code == 0);

    const fs::path redo = dir / "redo";
    const CliResult r = run_cli("replay --manifest " +
                                    (cal.string() + ".manifest.json") + " --out " +
                                    redo.string(),
                                dir.path());
    REQUIRE(r.code == 0);
    CHECK(snapshot_tree(redo) == snapshot_tree(cal));
}

TEST_CASE("output directories are protected unless forced") {
    ScratchDir dir("cli_force");
    const std::string data = make_dataset(dir, "d");
    const CliResult again =
        run_cli("generate --out " + data + " --nodes 120 --attr-dim 6 --seed 3",
                dir.path());
    CHECK(again.code == 1);
    CHECK(again.err.find("already exists and is not empty") != std::string::npos);

    const CliResult forced = run_cli(
        "generate --out " + data + " --nodes 120 --attr-dim 6 --seed 3 --force",
        dir.path());
    CHECK(forced.code == 0);
}

TEST_CASE("missing inputs fail with a single error line") {
    ScratchDir dir("cli_missing");
    const CliResult r = run_cli("train-teacher --data " + (dir / "nope").string() +
                                    " --out " + (dir / "out").string() +
                                    " --teacher ocgnn",
                                dir.path());
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error:", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("dump-embeddings writes one labeled row per node") {
    ScratchDir dir("cli_dump");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 20",
                    dir.path())
                .code == 0);
    const fs::path cal = dir / "cal";
    REQUIRE(run_cli("calibrate --data " + data + " --teacher-scores " +
                        (tt / "scores.tsv").string() + " --out " + cal.string() +
                        " --epochs 20 --hidden 8",
                    dir.path())
                .code == 0);
    const fs::path dump = dir / "dump";
    const CliResult r = run_cli("dump-embeddings --data " + data + " --checkpoint " +
                                    (cal / "student.ckpt").string() + " --out " +
                                    dump.string(),
                                dir.path());
    REQUIRE(r.code == 0);

    std::istringstream csv(testutil::read_file(dump / "embeddings.csv"));
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line.rfind("node_id,label,is_labeled_normal,h_0", 0) == 0);

    // The compactness diagnostic recomputed from the exported rows must
    // agree with the one the calibration run reported.
    std::vector<std::vector<double>> labeled_rows;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        std::vector<double> fields;
        std::istringstream fs_line(line);
        for (std::string cell; std::getline(fs_line, cell, ',');) {
            fields.push_back(std::stod(cell));
        }
        REQUIRE(fields.size() >= 4);
        if (fields[2] == 1.0) {
            labeled_rows.emplace_back(fields.begin() + 3, fields.end());
        }
    }
    CHECK(rows == 120);
    REQUIRE(!labeled_rows.empty());
    std::vector<double> centroid(labeled_rows.front().size(), 0.0);
    for (const auto& row : labeled_rows) {
        for (std::size_t j = 0; j < row.size(); ++j) centroid[j] += row[j];
    }
    for (double& c : centroid) c /= static_cast<double>(labeled_rows.size());
    double deviation = 0.0;
    for (const auto& row : labeled_rows) {
        double sq = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            sq += (row[j] - centroid[j]) * (row[j] - centroid[j]);
        }
        deviation += std::sqrt(sq);
    }
    deviation /= static_cast<double>(labeled_rows.size());
    const json report = parse_json_file(cal / "report.json");
    CHECK(deviation ==
          doctest::Approx(report.at("prototype_deviation").get<double>())
              .epsilon(1e-9));
}

TEST_CASE("evaluating the labels as scores yields a perfect report") {
    ScratchDir dir("cli_perfect");
    const std::string data = make_dataset(dir, "d");

    // Rewrite the generated labels as a scores file.
    std::istringstream labels(testutil::read_file(fs::path(data) / "labels.tsv"));
    std::ostringstream scores;
    for (std::string line; std::getline(labels, line);) {
        scores << line << '\n';
    }
    testutil::write_file(dir / "label_scores.tsv", scores.str());

    const fs::path ev = dir / "ev";
    REQUIRE(run_cli("evaluate --data " + data + " --scores " +
                        (dir / "label_scores.tsv").string() + " --out " + ev.string(),
                    dir.path())
                .code == 0);
    const json report = parse_json_file(ev / "report.json");
    CHECK(report.at("auroc") == 1.0);
    CHECK(report.at("auprc") == 1.0);
}

TEST_CASE("serial and parallel execution write identical scores") {
    ScratchDir dir("cli_modes");
    const std::string data = make_dataset(dir, "d");
    const fs::path tt = dir / "tt";
    REQUIRE(run_cli("train-teacher --data " + data + " --out " + tt.string() +
                        " --teacher ocgnn --hidden 8 --epochs 20",
                    dir.path())
                .code == 0);
    const std::string common = "calibrate --data " + data + " --teacher-scores " +
                               (tt / "scores.tsv").string() +
                               " --epochs 30 --hidden 8 --seed 6 --out ";
    const fs::path serial = dir / "serial", parallel = dir / "parallel";
    REQUIRE(run_cli("--serial " + common + serial.string(), dir.path()).code == 0);
    REQUIRE(run_cli("--parallel " + common + parallel.string(), dir.path()).code == 0);
    CHECK(testutil::read_file(serial / "scores.tsv") ==
          testutil::read_file(parallel / "scores.tsv"));
    CHECK(testutil::read_file(serial / "student.ckpt") ==
          testutil::read_file(parallel / "student.ckpt"));
}

}  // TEST_SUITE
