#include "graphnc/gnn.hpp"

#include <string>

namespace graphnc::gnn {

namespace {

constexpr std::uint64_t kStreamStudentInit = 21;

void require_conforming(const graph::NormalizedAdjacency& a_hat,
                        const linalg::DenseMatrix& x, const EncoderParams& params) {
    if (x.rows() != a_hat.num_nodes()) {
        throw DimensionError("encode: attribute rows (" + std::to_string(x.rows()) +
                             ") != graph nodes (" + std::to_string(a_hat.num_nodes()) +
                             ")");
    }
    if (x.cols() != params.w1.rows()) {
        throw DimensionError("encode: attribute dim (" + std::to_string(x.cols()) +
                             ") != weight input dim (" + std::to_string(params.w1.rows()) +
                             ")");
    }
    if (params.w1.cols() != params.w2.rows() || params.w2.rows() != params.w2.cols()) {
        throw DimensionError("encode: layer widths disagree");
    }
}

}  // namespace

EncoderCache encode(const graph::NormalizedAdjacency& a_hat, const linalg::DenseMatrix& x,
                    const EncoderParams& params) {
    require_conforming(a_hat, x, params);
    EncoderCache cache;
    cache.propagated_x = linalg::spmm(a_hat.mat, x);
    cache.pre_hidden = linalg::matmul(cache.propagated_x, params.w1);
    cache.hidden = linalg::relu(cache.pre_hidden);
    cache.propagated_h = linalg::spmm(a_hat.mat, cache.hidden);
    cache.embeddings = linalg::matmul(cache.propagated_h, params.w2);
    return cache;
}

EncoderGrads encode_backward(const graph::NormalizedAdjacency& a_hat,
                             const EncoderParams& params, const EncoderCache& cache,
                             const linalg::DenseMatrix& d_embeddings) {
    if (!d_embeddings.same_shape(cache.embeddings)) {
        throw DimensionError("encode_backward: upstream gradient shape mismatch");
    }
    EncoderGrads grads;
    // embeddings = propagated_h * W2
    grads.w2 = linalg::matmul_tn(cache.propagated_h, d_embeddings);
    linalg::DenseMatrix d_propagated_h = linalg::matmul_nt(d_embeddings, params.w2);
    // propagated_h = A_hat * hidden, and A_hat is symmetric, so the adjoint is
    // another multiplication by A_hat.
    linalg::DenseMatrix d_hidden = linalg::spmm(a_hat.mat, d_propagated_h);
    linalg::DenseMatrix d_pre_hidden =
        linalg::hadamard(d_hidden, linalg::relu_derivative(cache.pre_hidden));
    // pre_hidden = propagated_x * W1
    grads.w1 = linalg::matmul_tn(cache.propagated_x, d_pre_hidden);
    return grads;
}

void accumulate(StudentGrads& total, const StudentGrads& extra) {
    linalg::add_inplace(total.w1, extra.w1);
    linalg::add_inplace(total.w2, extra.w2);
    linalg::add_inplace(total.head_w, extra.head_w);
    total.head_b += extra.head_b;
}

StudentParams init_student(std::size_t attr_dim, std::size_t hidden_dim,
                           std::uint64_t seed) {
    if (attr_dim < 1 || hidden_dim < 1) {
        throw ConfigError("init_student: attr_dim and hidden_dim must be >= 1");
    }
    Rng rng(derive_seed(seed, kStreamStudentInit));
    StudentParams params;
    params.encoder.w1 = linalg::glorot_init(attr_dim, hidden_dim, rng);
    params.encoder.w2 = linalg::glorot_init(hidden_dim, hidden_dim, rng);
    params.head_w = linalg::glorot_init(hidden_dim, 1, rng);
    params.head_b = 0.0;
    params.version = 0;
    return params;
}

ForwardCache forward(const graph::NormalizedAdjacency& a_hat,
                     const linalg::DenseMatrix& x, const StudentParams& params) {
    ForwardCache cache;
    cache.enc = encode(a_hat, x, params.encoder);
    cache.logits = linalg::matmul(cache.enc.embeddings, params.head_w);
    for (double& v : cache.logits.values()) v += params.head_b;
    cache.scores = linalg::sigmoid(cache.logits);
    cache.params_version = params.version;
    return cache;
}

StudentGrads backward(const graph::NormalizedAdjacency& a_hat, const StudentParams& params,
                      const ForwardCache& cache, const linalg::DenseMatrix& d_scores,
                      const linalg::DenseMatrix& d_embeddings) {
    if (cache.params_version != params.version) {
        throw ContractError(
            "backward: forward cache is stale (parameters updated since forward)");
    }
    if (!d_scores.same_shape(cache.scores)) {
        throw DimensionError("backward: d_scores shape mismatch");
    }
    if (!d_embeddings.empty() && !d_embeddings.same_shape(cache.enc.embeddings)) {
        throw DimensionError("backward: d_embeddings shape mismatch");
    }

    // scores = sigmoid(logits): d_logits = d_scores .* s .* (1 - s).
    linalg::DenseMatrix d_logits(cache.logits.rows(), 1);
    for (std::size_t i = 0; i < d_logits.rows(); ++i) {
        const double s = cache.scores(i, 0);
        d_logits(i, 0) = d_scores(i, 0) * s * (1.0 - s);
    }

    StudentGrads grads;
    // logits = embeddings * head_w + head_b
    grads.head_w = linalg::matmul_tn(cache.enc.embeddings, d_logits);
    grads.head_b = 0.0;
    for (const double v : d_logits.values()) grads.head_b += v;

    linalg::DenseMatrix d_embed_total = linalg::matmul_nt(d_logits, params.head_w);
    if (!d_embeddings.empty()) linalg::add_inplace(d_embed_total, d_embeddings);

    EncoderGrads enc_grads =
        encode_backward(a_hat, params.encoder, cache.enc, d_embed_total);
    grads.w1 = std::move(enc_grads.w1);
    grads.w2 = std::move(enc_grads.w2);
    return grads;
}

}  // namespace graphnc::gnn
