#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "nipred/core/rng.hpp"
#include "nipred/nn/tensor.hpp"

namespace nipred::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

namespace detail {
inline MatMap mat(std::vector<double>& v, std::size_t r, std::size_t c) {
    return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
inline ConstMatMap cmat(const std::vector<double>& v, std::size_t r, std::size_t c) {
    return ConstMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
inline void check_same(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
            std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    std::vector<double> out(x.size());
    const auto xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
    return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
        auto& in = *self.inputs[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
    });
}
}  // namespace detail

/// (m,k) x (k,n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto m = a.rows(), k = a.cols(), n = b.cols();
    require(b.rows() == k, ErrorCode::ShapeMismatch, "matmul inner dims " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(m * n);
    detail::mat(out, m, n).noalias() = detail::cmat(a.node().value, m, k) * detail::cmat(b.node().value, k, n);
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        const auto dC = detail::cmat(self.grad, m, n);
        if (A.requires_grad) detail::mat(A.grad, m, k).noalias() += dC * detail::cmat(B.value, k, n).transpose();
        if (B.requires_grad) detail::mat(B.grad, k, n).noalias() += detail::cmat(A.value, m, k).transpose() * dC;
    });
}

/// x W + b with b broadcast over rows. `bias` may be undefined.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const auto m = x.rows(), k = x.cols(), n = w.cols();
    require(w.rows() == k, ErrorCode::ShapeMismatch, "linear " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
    const bool has_bias = bias.defined();
    if (has_bias) require(bias.size() == n, ErrorCode::ShapeMismatch, "linear bias width");
    std::vector<double> out(m * n);
    auto O = detail::mat(out, m, n);
    O.noalias() = detail::cmat(x.node().value, m, k) * detail::cmat(w.node().value, k, n);
    if (has_bias) O.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().data(), static_cast<Eigen::Index>(n));
    std::vector<Tensor> inputs{x, w};
    if (has_bias) inputs.push_back(bias);
    return make_result({m, n}, std::move(out), std::move(inputs), [m, k, n, has_bias](Node& self) {
        auto& X = *self.inputs[0];
        auto& W = *self.inputs[1];
        const auto dO = detail::cmat(self.grad, m, n);
        if (X.requires_grad) detail::mat(X.grad, m, k).noalias() += dO * detail::cmat(W.value, k, n).transpose();
        if (W.requires_grad) detail::mat(W.grad, k, n).noalias() += detail::cmat(X.value, m, k).transpose() * dO;
        if (has_bias && self.inputs[2]->requires_grad) {
            // plain row-order loop: Eigen's vectorized column sums regroup by buffer alignment
            auto& B = *self.inputs[2];
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t j = 0; j < n; ++j) B.grad[j] += self.grad[r * n + j];
        }
    });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (auto& in : self.inputs)
            if (in->requires_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (A.requires_grad) A.grad[i] += self.grad[i];
            if (B.requires_grad) B.grad[i] -= self.grad[i];
        }
    });
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (A.requires_grad) A.grad[i] += self.grad[i] * B.value[i];
            if (B.requires_grad) B.grad[i] += self.grad[i] * A.value[i];
        }
    });
}

inline Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
    return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
        auto& A = *self.inputs[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i] * s;
    });
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::unary(
        x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
    return detail::unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

/// tanh approximation of GELU.
inline Tensor gelu(const Tensor& x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    return detail::unary(
        x,
        [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v))); },
        [](double v, double) {
            const double u = c * (v + 0.044715 * v * v * v);
            const double t = std::tanh(u);
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * v * v);
        });
}

inline Tensor sum(const Tensor& x) {
    double s = 0;
    for (double v : x.value()) s += v;
    return make_result({1}, {s}, {x}, [](Node& self) {
        auto& X = *self.inputs[0];
        for (auto& g : X.grad) g += self.grad[0];
    });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

/// Numerically stable softmax along axis 1 (rows) or 0 (columns) of a matrix.
inline Tensor softmax(const Tensor& x, int axis = 1) {
    require(axis == 0 || axis == 1 || axis == -1, ErrorCode::InvalidArgument, "softmax axis");
    const auto r = x.rows(), c = x.cols();
    const bool by_row = axis != 0;
    const auto outer = by_row ? r : c, inner = by_row ? c : r;
    auto at = [=](std::size_t o, std::size_t i) { return by_row ? o * c + i : i * c + o; };
    std::vector<double> out(x.size());
    const auto xv = x.value();
    for (std::size_t o = 0; o < outer; ++o) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, xv[at(o, i)]);
        double s = 0;
        for (std::size_t i = 0; i < inner; ++i) s += out[at(o, i)] = std::exp(xv[at(o, i)] - mx);
        for (std::size_t i = 0; i < inner; ++i) out[at(o, i)] /= s;
    }
    return make_result(x.shape(), std::move(out), {x}, [=](Node& self) {
        auto& X = *self.inputs[0];
        for (std::size_t o = 0; o < outer; ++o) {
            double dot = 0;
            for (std::size_t i = 0; i < inner; ++i) dot += self.grad[at(o, i)] * self.value[at(o, i)];
            for (std::size_t i = 0; i < inner; ++i) X.grad[at(o, i)] += self.value[at(o, i)] * (self.grad[at(o, i)] - dot);
        }
    });
}

/// Row-wise layer normalization with learned gain and shift.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
    const auto r = x.rows(), c = x.cols();
    require(gamma.size() == c && beta.size() == c, ErrorCode::ShapeMismatch, "layer_norm params width");
    std::vector<double> out(x.size()), xhat(x.size()), rstd(r);
    const auto xv = x.value();
    const auto g = gamma.value(), b = beta.value();
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0;
        for (std::size_t j = 0; j < c; ++j) mu += xv[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0;
        for (std::size_t j = 0; j < c; ++j) var += (xv[i * c + j] - mu) * (xv[i * c + j] - mu);
        var /= static_cast<double>(c);
        rstd[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            xhat[i * c + j] = (xv[i * c + j] - mu) * rstd[i];
            out[i * c + j] = xhat[i * c + j] * g[j] + b[j];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gamma, beta},
                       [r, c, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                           auto& X = *self.inputs[0];
                           auto& G = *self.inputs[1];
                           auto& B = *self.inputs[2];
                           for (std::size_t i = 0; i < r; ++i) {
                               const double* dy = &self.grad[i * c];
                               const double* xh = &xhat[i * c];
                               if (G.requires_grad)
                                   for (std::size_t j = 0; j < c; ++j) G.grad[j] += dy[j] * xh[j];
                               if (B.requires_grad)
                                   for (std::size_t j = 0; j < c; ++j) B.grad[j] += dy[j];
                               if (!X.requires_grad) continue;
                               double m1 = 0, m2 = 0;
                               for (std::size_t j = 0; j < c; ++j) {
                                   const double dxh = dy[j] * G.value[j];
                                   m1 += dxh;
                                   m2 += dxh * xh[j];
                               }
                               m1 /= static_cast<double>(c);
                               m2 /= static_cast<double>(c);
                               for (std::size_t j = 0; j < c; ++j)
                                   X.grad[i * c + j] += rstd[i] * (dy[j] * G.value[j] - m1 - xh[j] * m2);
                           }
                       });
}

/// Rows of `table` selected by id: out[i] = table[ids[i]].
inline Tensor embedding(const Tensor& table, std::span<const int> ids) {
    const auto v = table.rows(), d = table.cols();
    std::vector<double> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            fail(ErrorCode::IdOutOfRange, "id " + std::to_string(ids[i]) + " outside table of " + std::to_string(v));
        std::copy_n(table.value().data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
    }
    std::vector<int> idv(ids.begin(), ids.end());
    return make_result({ids.size(), d}, std::move(out), {table}, [d, idv = std::move(idv)](Node& self) {
        auto& T = *self.inputs[0];
        for (std::size_t i = 0; i < idv.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) T.grad[static_cast<std::size_t>(idv[i]) * d + j] += self.grad[i * d + j];
    });
}

/// Selected rows of a matrix.
inline Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
    const auto c = x.cols();
    std::vector<double> out(rows.size() * c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] < x.rows(), ErrorCode::IdOutOfRange, "gather_rows index");
        std::copy_n(x.value().data() + rows[i] * c, c, out.data() + i * c);
    }
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return make_result({rows.size(), c}, std::move(out), {x}, [c, idx = std::move(idx)](Node& self) {
        auto& X = *self.inputs[0];
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) X.grad[idx[i] * c + j] += self.grad[i * c + j];
    });
}

inline Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
    const auto r = x.rows(), c = x.cols();
    require(start + count <= c, ErrorCode::ShapeMismatch, "slice_cols out of range");
    std::vector<double> out(r * count);
    for (std::size_t i = 0; i < r; ++i) std::copy_n(x.value().data() + i * c + start, count, out.data() + i * count);
    return make_result({r, count}, std::move(out), {x}, [r, c, start, count](Node& self) {
        auto& X = *self.inputs[0];
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j) X.grad[i * c + start + j] += self.grad[i * count + j];
    });
}

/// Inverted dropout. Identity when not training or rate is 0.
inline Tensor dropout(const Tensor& x, double rate, Rng* rng, bool training) {
    if (!training || rate <= 0.0 || rng == nullptr) return x;
    require(rate < 1.0, ErrorCode::InvalidArgument, "dropout rate must be < 1");
    std::vector<double> mask(x.size()), out(x.size());
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = uniform01(*rng) >= rate ? keep : 0.0;
        out[i] = x.value()[i] * mask[i];
    }
    return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
        auto& X = *self.inputs[0];
        for (std::size_t i = 0; i < mask.size(); ++i) X.grad[i] += self.grad[i] * mask[i];
    });
}

/// Mean negative log-likelihood of `targets` under row-wise softmax(logits), over
/// rows whose mask entry is nonzero. An empty mask means all rows count.
inline Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, std::span<const std::uint8_t> mask = {}) {
    const auto n = logits.rows(), c = logits.cols();
    require(targets.size() == n, ErrorCode::ShapeMismatch, "cross_entropy targets length");
    require(mask.empty() || mask.size() == n, ErrorCode::ShapeMismatch, "cross_entropy mask length");
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += (mask.empty() || mask[i]) ? 1 : 0;
    if (count == 0) fail(ErrorCode::AllMasked, "every position is masked");
    const auto lv = logits.value();
    std::vector<double> probs(n * c, 0.0);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(mask.empty() || mask[i])) continue;
        const int t = targets[i];
        if (t < 0 || static_cast<std::size_t>(t) >= c) fail(ErrorCode::LabelOutOfRange, "target " + std::to_string(t));
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) s += probs[i * c + j] = std::exp(lv[i * c + j] - mx);
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= s;
        total += mx + std::log(s) - lv[i * c + static_cast<std::size_t>(t)];
    }
    const double inv = 1.0 / static_cast<double>(count);
    std::vector<int> tv(targets.begin(), targets.end());
    std::vector<std::uint8_t> mv(mask.begin(), mask.end());
    return make_result({1}, {total * inv}, {logits},
                       [n, c, inv, probs = std::move(probs), tv = std::move(tv), mv = std::move(mv)](Node& self) {
                           auto& L = *self.inputs[0];
                           const double g = self.grad[0] * inv;
                           for (std::size_t i = 0; i < n; ++i) {
                               if (!(mv.empty() || mv[i])) continue;
                               for (std::size_t j = 0; j < c; ++j) L.grad[i * c + j] += g * probs[i * c + j];
                               L.grad[i * c + static_cast<std::size_t>(tv[i])] -= g;
                           }
                       });
}

}  // namespace nipred::nn
