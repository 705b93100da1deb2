// Compares the serial reference kernels against the OpenMP row-parallel mode.
// Also verifies (bitwise) that both modes agree on every benchmarked op.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "graphnc/calibration.hpp"
#include "graphnc/gnn.hpp"
#include "graphnc/graph.hpp"
#include "graphnc/linalg.hpp"
#include "graphnc/rng.hpp"
#include "graphnc/teachers.hpp"

namespace {

using graphnc::linalg::DenseMatrix;
using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int repeats) {
    // One warm-up, then best-of-N to dodge scheduler noise.
    fn();
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto start = Clock::now();
        fn();
        const auto end = Clock::now();
        const double ms =
            std::chrono::duration<double, std::milli>(end - start).count();
        if (ms < best) best = ms;
    }
    return best;
}

struct BenchCase {
    std::string name;
    std::function<DenseMatrix()> run;
};

void report(const std::string& name, double serial_ms, double parallel_ms,
            bool identical) {
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n",
                name.c_str(), serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "bitwise-identical" : "MISMATCH");
}

}  // namespace

int main() {
    using namespace graphnc;

    graph::SyntheticConfig cfg;
    cfg.num_nodes = 4000;
    cfg.attr_dim = 32;
    const graph::AttributedGraph g =
        graph::split_labeled_normals(graph::generate_synthetic(cfg, 7), 0.15, 7);
    const graph::NormalizedAdjacency a_hat = graph::normalize_adjacency(g);

    Rng rng(123);
    DenseMatrix a(512, 256), b(256, 512), c(512, 128);
    for (double& v : a.values()) v = rng.normal();
    for (double& v : b.values()) v = rng.normal();
    for (double& v : c.values()) v = rng.normal();
    DenseMatrix w1 = linalg::glorot_init(cfg.attr_dim, 64, rng);
    DenseMatrix w2 = linalg::glorot_init(64, 64, rng);

    std::vector<BenchCase> cases;
    cases.push_back({"matmul 512x256x512", [&] { return linalg::matmul(a, b); }});
    cases.push_back(
        {"matmul_tn 512x256x128", [&] { return linalg::matmul_tn(a, c); }});
    cases.push_back({"spmm 4000-node graph",
                     [&] { return linalg::spmm(a_hat.mat, g.attributes); }});
    cases.push_back({"gcn encode", [&] {
                         gnn::EncoderParams params{w1, w2};
                         return gnn::encode(a_hat, g.attributes, params).embeddings;
                     }});

    const int repeats = 5;
    std::printf("graph: %zu nodes, %zu undirected edges, %zu attrs\n\n", g.num_nodes,
                g.num_undirected_edges(), g.attr_dim());
    for (const auto& c : cases) {
        linalg::set_exec_mode(linalg::ExecMode::serial);
        const DenseMatrix serial_out = c.run();
        const double serial_ms = time_ms([&] { (void)c.run(); }, repeats);

        linalg::set_exec_mode(linalg::ExecMode::parallel);
        const DenseMatrix parallel_out = c.run();
        const double parallel_ms = time_ms([&] { (void)c.run(); }, repeats);

        report(c.name, serial_ms, parallel_ms,
               linalg::bitwise_equal(serial_out, parallel_out));
    }

    // End-to-end: a short student training run in both modes.
    teachers::TeacherConfig tcfg;
    tcfg.epochs = 20;
    linalg::set_exec_mode(linalg::ExecMode::serial);
    const teachers::TrainedTeacher teacher = teachers::train_dominant(g, a_hat, tcfg);

    calib::TrainConfig scfg;
    scfg.epochs = 30;
    const auto train_once = [&] {
        return calib::train_student(g, a_hat, teacher.scores, scfg);
    };

    linalg::set_exec_mode(linalg::ExecMode::serial);
    const calib::TrainedStudent serial_student = train_once();
    const double serial_ms = time_ms([&] { (void)train_once(); }, 3);

    linalg::set_exec_mode(linalg::ExecMode::parallel);
    const calib::TrainedStudent parallel_student = train_once();
    const double parallel_ms = time_ms([&] { (void)train_once(); }, 3);

    const bool same =
        linalg::bitwise_equal(serial_student.params.encoder.w1,
                              parallel_student.params.encoder.w1) &&
        linalg::bitwise_equal(serial_student.params.encoder.w2,
                              parallel_student.params.encoder.w2) &&
        linalg::bitwise_equal(serial_student.params.head_w,
                              parallel_student.params.head_w) &&
        serial_student.params.head_b == parallel_student.params.head_b;
    std::printf("\n");
    report("student training (30 ep)", serial_ms, parallel_ms, same);
    return 0;
}
