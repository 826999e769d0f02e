#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "nipred/nn/ops.hpp"

namespace nipred::nn {

/// How the rows of Q/K/V are grouped: `batch` sequences of `seq` rows each. Keys
/// at or beyond lengths[b] are masked; with `causal`, query i sees keys j <= i only.
struct AttentionLayout {
    std::size_t batch = 1;
    std::size_t seq = 0;
    bool causal = false;
    std::vector<std::size_t> lengths;  // empty: all positions valid
};

/// softmax(Q K^T / sqrt(d_k)) V per head, where each head owns a contiguous block
/// of d_k = width / heads columns. Masked logits are -inf, so masked keys get
/// exactly zero weight.
inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, const AttentionLayout& layout) {
    const auto rows = q.rows(), width = q.cols();
    require(k.shape() == q.shape() && v.shape() == q.shape(), ErrorCode::ShapeMismatch,
            "attention Q/K/V shapes " + shape_str(q.shape()) + " " + shape_str(k.shape()) + " " + shape_str(v.shape()));
    require(heads > 0 && width % heads == 0, ErrorCode::ShapeMismatch, "width not divisible by heads");
    const auto B = layout.batch, T = layout.seq == 0 ? rows : layout.seq;
    require(B * T == rows, ErrorCode::ShapeMismatch, "attention layout does not cover the rows");
    require(layout.lengths.empty() || layout.lengths.size() == B, ErrorCode::ShapeMismatch, "attention lengths");
    const auto dk = width / heads;
    require(dk > 0, ErrorCode::ShapeMismatch, "d_k must be positive");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    const bool causal = layout.causal;
    std::vector<std::size_t> lengths = layout.lengths;
    if (lengths.empty()) lengths.assign(B, T);

    const auto Q = detail::cmat(q.node().value, rows, width);
    const auto K = detail::cmat(k.node().value, rows, width);
    const auto V = detail::cmat(v.node().value, rows, width);
    std::vector<double> out(rows * width, 0.0);
    auto O = detail::mat(out, rows, width);
    std::vector<double> probs(B * heads * T * T, 0.0);

    const auto Ti = static_cast<Eigen::Index>(T), dki = static_cast<Eigen::Index>(dk);
    RowMatrix S(Ti, Ti);
    for (std::size_t b = 0; b < B; ++b) {
        const auto r0 = static_cast<Eigen::Index>(b * T);
        const auto len = std::max<std::size_t>(1, std::min(lengths[b], T));
        for (std::size_t h = 0; h < heads; ++h) {
            const auto c0 = static_cast<Eigen::Index>(h * dk);
            S.noalias() = Q.block(r0, c0, Ti, dki) * K.block(r0, c0, Ti, dki).transpose();
            MatMap P(probs.data() + (b * heads + h) * T * T, Ti, Ti);
            for (std::size_t i = 0; i < T; ++i) {
                const std::size_t visible = causal ? std::min(i + 1, len) : len;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, S(i, j) * inv_sqrt);
                double s = 0;
                for (std::size_t j = 0; j < visible; ++j) s += P(i, j) = std::exp(S(i, j) * inv_sqrt - mx);
                for (std::size_t j = 0; j < visible; ++j) P(i, j) /= s;
            }
            O.block(r0, c0, Ti, dki).noalias() = P * V.block(r0, c0, Ti, dki);
        }
    }

    return make_result(q.shape(), std::move(out), {q, k, v},
                       [B, T, heads, dk, width, rows, inv_sqrt, probs = std::move(probs)](Node& self) {
                           auto& Qn = *self.inputs[0];
                           auto& Kn = *self.inputs[1];
                           auto& Vn = *self.inputs[2];
                           const auto Qv = detail::cmat(Qn.value, rows, width);
                           const auto Kv = detail::cmat(Kn.value, rows, width);
                           const auto Vv = detail::cmat(Vn.value, rows, width);
                           const auto dO = detail::cmat(self.grad, rows, width);
                           const auto Ti = static_cast<Eigen::Index>(T), dki = static_cast<Eigen::Index>(dk);
                           RowMatrix dP(Ti, Ti), dS(Ti, Ti);
                           for (std::size_t b = 0; b < B; ++b) {
                               const auto r0 = static_cast<Eigen::Index>(b * T);
                               for (std::size_t h = 0; h < heads; ++h) {
                                   const auto c0 = static_cast<Eigen::Index>(h * dk);
                                   ConstMatMap P(probs.data() + (b * heads + h) * T * T, Ti, Ti);
                                   const auto dOh = dO.block(r0, c0, Ti, dki);
                                   if (Vn.requires_grad)
                                       detail::mat(Vn.grad, rows, width).block(r0, c0, Ti, dki).noalias() += P.transpose() * dOh;
                                   if (!Qn.requires_grad && !Kn.requires_grad) continue;
                                   dP.noalias() = dOh * Vv.block(r0, c0, Ti, dki).transpose();
                                   for (Eigen::Index i = 0; i < Ti; ++i) {
                                       const double dot = dP.row(i).dot(P.row(i));
                                       dS.row(i) = (P.row(i).array() * (dP.row(i).array() - dot)).matrix() * inv_sqrt;
                                   }
                                   if (Qn.requires_grad)
                                       detail::mat(Qn.grad, rows, width).block(r0, c0, Ti, dki).noalias() +=
                                           dS * Kv.block(r0, c0, Ti, dki);
                                   if (Kn.requires_grad)
                                       detail::mat(Kn.grad, rows, width).block(r0, c0, Ti, dki).noalias() +=
                                           dS.transpose() * Qv.block(r0, c0, Ti, dki);
                               }
                           }
                       });
}

/// Single-head convenience form.
inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
    return attention(q, k, v, 1, AttentionLayout{1, q.rows(), causal, {}});
}

}  // namespace nipred::nn
