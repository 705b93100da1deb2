#pragma once

#include <cstdint>

#include "graphnc/graph.hpp"
#include "graphnc/linalg.hpp"

namespace graphnc::gnn {

// Two-layer graph-convolution encoder over the normalized adjacency A_hat:
// H1 = ReLU(A_hat X W1), H2 = A_hat H1 W2, with a linear (unsquashed) final
// layer. Shared by the student and the built-in teacher detectors.
struct EncoderParams {
    linalg::DenseMatrix w1;  // attr_dim x hidden_dim
    linalg::DenseMatrix w2;  // hidden_dim x hidden_dim
};

// Every intermediate the backward pass needs.
struct EncoderCache {
    linalg::DenseMatrix propagated_x;  // A_hat * X
    linalg::DenseMatrix pre_hidden;    // (A_hat * X) * W1, before ReLU
    linalg::DenseMatrix hidden;        // ReLU of pre_hidden
    linalg::DenseMatrix propagated_h;  // A_hat * hidden
    linalg::DenseMatrix embeddings;    // final-layer representations, N x d
};

struct EncoderGrads {
    linalg::DenseMatrix w1;
    linalg::DenseMatrix w2;
};

EncoderCache encode(const graph::NormalizedAdjacency& a_hat, const linalg::DenseMatrix& x,
                    const EncoderParams& params);

// Exact gradients of the encoder given d(loss)/d(embeddings).
EncoderGrads encode_backward(const graph::NormalizedAdjacency& a_hat,
                             const EncoderParams& params, const EncoderCache& cache,
                             const linalg::DenseMatrix& d_embeddings);

// Student detector: the encoder plus a single sigmoid scoring unit, so scores
// live in (0, 1) and are directly comparable to normalized teacher scores.
struct StudentParams {
    EncoderParams encoder;
    linalg::DenseMatrix head_w;  // hidden_dim x 1
    double head_b = 0.0;
    // Bumped on every in-place parameter update; forward caches record the
    // version they were computed against so stale reuse is caught.
    std::uint64_t version = 0;

    std::size_t attr_dim() const { return encoder.w1.rows(); }
    std::size_t hidden_dim() const { return encoder.w1.cols(); }
};

struct ForwardCache {
    EncoderCache enc;
    linalg::DenseMatrix logits;  // N x 1
    linalg::DenseMatrix scores;  // N x 1, strictly inside (0, 1)
    std::uint64_t params_version = 0;
};

struct StudentGrads {
    linalg::DenseMatrix w1;
    linalg::DenseMatrix w2;
    linalg::DenseMatrix head_w;
    double head_b = 0.0;
};

// Accumulates `extra` into `total` (used to sum the two training views).
void accumulate(StudentGrads& total, const StudentGrads& extra);

// Glorot-initialized weights, zero head bias; deterministic per seed.
StudentParams init_student(std::size_t attr_dim, std::size_t hidden_dim,
                           std::uint64_t seed);

ForwardCache forward(const graph::NormalizedAdjacency& a_hat,
                     const linalg::DenseMatrix& x, const StudentParams& params);

// Exact gradients of d_scores^T * scores + <d_embeddings, embeddings> pulled
// back to the parameters; d_embeddings may be empty when only the score head
// carries loss. Throws ContractError if the cache predates a parameter update.
StudentGrads backward(const graph::NormalizedAdjacency& a_hat, const StudentParams& params,
                      const ForwardCache& cache, const linalg::DenseMatrix& d_scores,
                      const linalg::DenseMatrix& d_embeddings);

}  // namespace graphnc::gnn
