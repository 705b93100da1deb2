#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "graphnc/common.hpp"
#include "graphnc/rng.hpp"

namespace graphnc::linalg {

// Execution mode for the compute kernels. Serial is the default; parallel
// switches the matrix kernels to their OpenMP row-parallel variants. Both
// modes accumulate every output element in the same index order, so results
// are bitwise identical; parallel only changes which thread owns which rows.
enum class ExecMode { serial, parallel };

void set_exec_mode(ExecMode mode);
ExecMode exec_mode();

// Dense row-major matrix of 64-bit reals. A column vector is an N×1 matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// True when both matrices have the same shape and bit-identical elements.
bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b);

// Square sparse matrix in CSR form. Column indices are strictly increasing
// within each row; values[k] pairs with col_indices[k].
struct CsrMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_offsets;  // length rows + 1
    std::vector<std::size_t> col_indices;
    std::vector<double> values;

    std::size_t nnz() const { return col_indices.size(); }
};

// c = a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// c = transpose(a) * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// c = a * transpose(b)
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
// c = a * h for sparse a, dense h
DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& h);

DenseMatrix relu(const DenseMatrix& x);
// 1 where x > 0, else 0 (the subgradient at 0 is taken as 0).
DenseMatrix relu_derivative(const DenseMatrix& x);
DenseMatrix sigmoid(const DenseMatrix& x);
// s(x) * (1 - s(x)), evaluated from the stable sigmoid.
DenseMatrix sigmoid_derivative(const DenseMatrix& x);

// Numerically stable scalar sigmoid: never exponentiates a positive argument.
double sigmoid_scalar(double x);
// log(1 + exp(x)) without overflow for large |x|.
double softplus(double x);

struct MseResult {
    double loss = 0.0;
    DenseMatrix grad;  // d loss / d a
};
// Mean squared error over all elements: loss = sum((a-b)^2) / size.
MseResult mse(const DenseMatrix& a, const DenseMatrix& b);

// Uniform(-g, g) with g = sqrt(6 / (rows + cols)), drawn in row-major order.
DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);
DenseMatrix glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Elementwise helpers.
void add_inplace(DenseMatrix& a, const DenseMatrix& b);                    // a += b
void add_scaled_inplace(DenseMatrix& a, const DenseMatrix& b, double s);   // a += s*b
void scale_inplace(DenseMatrix& a, double s);                              // a *= s
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);          // a .* b

// One named parameter tensor paired with its gradient for an optimizer step.
struct AdamBlock {
    std::string name;
    std::span<double> value;
    std::span<const double> grad;
};

// Adam with bias correction. Moment buffers are allocated on the first step
// and must see the same block layout on every subsequent step.
class AdamState {
public:
    AdamState(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
              double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    // Applies one update to every block; increments the shared step counter
    // once. Throws TrainingError naming the offending block if any gradient
    // element is non-finite.
    void step(std::span<AdamBlock> blocks);

    double learning_rate() const { return lr_; }
    long long step_count() const { return step_count_; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long long step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace graphnc::linalg
