#include "graphnc/linalg.hpp"

#include <cmath>
#include <cstddef>

namespace graphnc::linalg {

namespace {

ExecMode g_exec_mode = ExecMode::serial;

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch (" +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ")");
    }
}

}  // namespace

void set_exec_mode(ExecMode mode) { g_exec_mode = mode; }
ExecMode exec_mode() { return g_exec_mode; }

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
    DenseMatrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
        if (r.size() != m.cols()) throw DimensionError("from_rows: ragged rows");
        std::size_t j = 0;
        for (double x : r) m(i, j++) = x;
        ++i;
    }
    return m;
}

bool DenseMatrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) return false;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) {
        if (av[k] != bv[k]) return false;
        // Bit-level check also distinguishes 0.0 from -0.0.
        if (std::signbit(av[k]) != std::signbit(bv[k])) return false;
    }
    return true;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ (" +
                             std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + ")");
    }
    DenseMatrix c(a.rows(), b.cols());
    const auto n = static_cast<std::ptrdiff_t>(a.rows());
    const std::size_t inner = a.cols();
    const std::size_t cols = b.cols();
    const bool par = g_exec_mode == ExecMode::parallel;
    // Each output row is owned by one thread and its k-sum runs in ascending
    // order, so serial and parallel results are bitwise identical.
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto ai = a.row(static_cast<std::size_t>(i));
        const auto ci = c.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const auto bk = b.row(k);
            for (std::size_t j = 0; j < cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: row counts differ (" +
                             std::to_string(a.rows()) + " vs " +
                             std::to_string(b.rows()) + ")");
    }
    DenseMatrix c(a.cols(), b.cols());
    const auto out_rows = static_cast<std::ptrdiff_t>(a.cols());
    const std::size_t inner = a.rows();
    const std::size_t cols = b.cols();
    const bool par = g_exec_mode == ExecMode::parallel;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t i = 0; i < out_rows; ++i) {
        const auto ci = c.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < inner; ++k) {
            const double aki = a(k, static_cast<std::size_t>(i));
            if (aki == 0.0) continue;
            const auto bk = b.row(k);
            for (std::size_t j = 0; j < cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: column counts differ (" +
                             std::to_string(a.cols()) + " vs " +
                             std::to_string(b.cols()) + ")");
    }
    DenseMatrix c(a.rows(), b.rows());
    const auto n = static_cast<std::ptrdiff_t>(a.rows());
    const std::size_t inner = a.cols();
    const std::size_t out_cols = b.rows();
    const bool par = g_exec_mode == ExecMode::parallel;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto ai = a.row(static_cast<std::size_t>(i));
        const auto ci = c.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < out_cols; ++j) {
            const auto bj = b.row(j);
            double sum = 0.0;
            for (std::size_t k = 0; k < inner; ++k) sum += ai[k] * bj[k];
            ci[j] = sum;
        }
    }
    return c;
}

DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& h) {
    if (a.cols != h.rows()) {
        throw DimensionError("spmm: inner dimensions differ (" + std::to_string(a.cols) +
                             " vs " + std::to_string(h.rows()) + ")");
    }
    DenseMatrix c(a.rows, h.cols());
    const auto n = static_cast<std::ptrdiff_t>(a.rows);
    const std::size_t cols = h.cols();
    const bool par = g_exec_mode == ExecMode::parallel;
    // Neighbors are visited in ascending column order within each row in both
    // modes, so the floating-point sums match bitwise.
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto ci = c.row(static_cast<std::size_t>(i));
        const std::size_t begin = a.row_offsets[static_cast<std::size_t>(i)];
        const std::size_t end = a.row_offsets[static_cast<std::size_t>(i) + 1];
        for (std::size_t k = begin; k < end; ++k) {
            const double w = a.values[k];
            const auto hk = h.row(a.col_indices[k]);
            for (std::size_t j = 0; j < cols; ++j) ci[j] += w * hk[j];
        }
    }
    return c;
}

DenseMatrix relu(const DenseMatrix& x) {
    DenseMatrix y(x.rows(), x.cols());
    const auto xs = x.values();
    const auto ys = y.values();
    for (std::size_t k = 0; k < xs.size(); ++k) ys[k] = xs[k] > 0.0 ? xs[k] : 0.0;
    return y;
}

DenseMatrix relu_derivative(const DenseMatrix& x) {
    DenseMatrix y(x.rows(), x.cols());
    const auto xs = x.values();
    const auto ys = y.values();
    for (std::size_t k = 0; k < xs.size(); ++k) ys[k] = xs[k] > 0.0 ? 1.0 : 0.0;
    return y;
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    // log(1 + exp(x)) = log1p(exp(-|x|)) + max(x, 0)
    return std::log1p(std::exp(-std::abs(x))) + (x > 0.0 ? x : 0.0);
}

DenseMatrix sigmoid(const DenseMatrix& x) {
    DenseMatrix y(x.rows(), x.cols());
    const auto xs = x.values();
    const auto ys = y.values();
    for (std::size_t k = 0; k < xs.size(); ++k) ys[k] = sigmoid_scalar(xs[k]);
    return y;
}

DenseMatrix sigmoid_derivative(const DenseMatrix& x) {
    DenseMatrix y(x.rows(), x.cols());
    const auto xs = x.values();
    const auto ys = y.values();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double s = sigmoid_scalar(xs[k]);
        ys[k] = s * (1.0 - s);
    }
    return y;
}

MseResult mse(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "mse");
    if (a.empty()) throw DimensionError("mse: empty input");
    MseResult result;
    result.grad = DenseMatrix(a.rows(), a.cols());
    const auto av = a.values();
    const auto bv = b.values();
    const auto gv = result.grad.values();
    const double inv_count = 1.0 / static_cast<double>(av.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < av.size(); ++k) {
        const double diff = av[k] - bv[k];
        sum += diff * diff;
        gv[k] = 2.0 * diff * inv_count;
    }
    result.loss = sum * inv_count;
    return result;
}

DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows + cols == 0) throw DimensionError("glorot_init: empty shape");
    const double gain = std::sqrt(6.0 / static_cast<double>(rows + cols));
    DenseMatrix w(rows, cols);
    for (double& x : w.values()) x = rng.uniform(-gain, gain);
    return w;
}

DenseMatrix glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    return glorot_init(rows, cols, rng);
}

void add_inplace(DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "add_inplace");
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) av[k] += bv[k];
}

void add_scaled_inplace(DenseMatrix& a, const DenseMatrix& b, double s) {
    require_same_shape(a, b, "add_scaled_inplace");
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) av[k] += s * bv[k];
}

void scale_inplace(DenseMatrix& a, double s) {
    for (double& x : a.values()) x *= s;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "hadamard");
    DenseMatrix c(a.rows(), a.cols());
    const auto av = a.values();
    const auto bv = b.values();
    const auto cv = c.values();
    for (std::size_t k = 0; k < av.size(); ++k) cv[k] = av[k] * bv[k];
    return c;
}

void AdamState::step(std::span<AdamBlock> blocks) {
    if (m_.empty()) {
        m_.resize(blocks.size());
        v_.resize(blocks.size());
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            m_[b].assign(blocks[b].value.size(), 0.0);
            v_[b].assign(blocks[b].value.size(), 0.0);
        }
    }
    if (blocks.size() != m_.size()) {
        throw ContractError("adam: block count changed between steps");
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& blk = blocks[b];
        if (blk.value.size() != m_[b].size() || blk.grad.size() != blk.value.size()) {
            throw ContractError("adam: block '" + blk.name + "' changed size");
        }
        for (double g : blk.grad) {
            if (!std::isfinite(g)) {
                throw TrainingError("non-finite gradient in parameter '" + blk.name + "'");
            }
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto value = blocks[b].value;
        auto grad = blocks[b].grad;
        auto& m = m_[b];
        auto& v = v_[b];
        for (std::size_t k = 0; k < value.size(); ++k) {
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * grad[k];
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * grad[k] * grad[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            value[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
}

}  // namespace graphnc::linalg
