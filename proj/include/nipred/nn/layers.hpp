#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nipred/core/rng.hpp"
#include "nipred/nn/attention.hpp"
#include "nipred/nn/ops.hpp"

namespace nipred::nn {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

/// Tracked tensor with entries drawn from U(-bound, bound).
inline Tensor uniform_param(Shape shape, double bound, Rng& rng) {
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = uniform(rng, -bound, bound);
    return Tensor::from(std::move(shape), std::move(v), true);
}

inline Tensor constant_param(Shape shape, double value) {
    auto t = Tensor::zeros(std::move(shape), true);
    std::fill(t.value().begin(), t.value().end(), value);
    return t;
}

/// Per-forward switches: dropout is active only while training.
struct ForwardContext {
    bool training = false;
    double dropout = 0.0;
    Rng* rng = nullptr;
};

struct Linear {
    Tensor weight;  // (in, out)
    Tensor bias;    // (out), may be undefined

    static Linear init(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0, bool with_bias = true) {
        Linear l;
        l.weight = uniform_param({in, out}, gain / std::sqrt(static_cast<double>(in)), rng);
        if (with_bias) l.bias = constant_param({out}, 0.0);
        return l;
    }
    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
    void collect(const std::string& prefix, ParamList& out) const {
        out.push_back({prefix + ".weight", weight});
        if (bias.defined()) out.push_back({prefix + ".bias", bias});
    }
};

struct LayerNorm {
    Tensor gamma, beta;

    static LayerNorm init(std::size_t width) { return {constant_param({width}, 1.0), constant_param({width}, 0.0)}; }
    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
    void collect(const std::string& prefix, ParamList& out) const {
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }
};

/// h0[i] = W_e[ids[i]] + W_p[positions[i]]. Several sequences may be stacked as rows.
inline Tensor embed(const Tensor& token_table, const Tensor& position_table, std::span<const int> ids,
                    std::span<const int> positions) {
    require(ids.size() == positions.size(), ErrorCode::ShapeMismatch, "ids/positions length");
    return add(embedding(token_table, ids), embedding(position_table, positions));
}

inline Tensor embed(const Tensor& token_table, const Tensor& position_table, std::span<const int> ids) {
    std::vector<int> pos(ids.size());
    std::iota(pos.begin(), pos.end(), 0);
    return embed(token_table, position_table, ids, pos);
}

/// Query/key/value/output projections. Head h owns columns [h*d_k, (h+1)*d_k).
struct AttentionParams {
    Linear query, key, value, output;
    std::size_t heads = 1;

    std::size_t d_k() const { return query.weight.cols() / heads; }
};

/// Pre-norm block: h + Attn(LN(h)), then + FFN(LN(.)), FFN = Linear-GELU-Linear.
struct TransformerBlock {
    LayerNorm ln1, ln2;
    AttentionParams attn;
    Linear ff_in, ff_out;

    static TransformerBlock init(std::size_t width, std::size_t heads, std::size_t layers, Rng& rng) {
        require(heads > 0 && width % heads == 0, ErrorCode::ShapeMismatch, "width must be divisible by heads");
        TransformerBlock b;
        b.ln1 = LayerNorm::init(width);
        b.ln2 = LayerNorm::init(width);
        const double residual_gain = 1.0 / std::sqrt(2.0 * static_cast<double>(std::max<std::size_t>(1, layers)));
        b.attn.query = Linear::init(width, width, rng);
        b.attn.key = Linear::init(width, width, rng);
        b.attn.value = Linear::init(width, width, rng);
        b.attn.output = Linear::init(width, width, rng, residual_gain);
        b.attn.heads = heads;
        b.ff_in = Linear::init(width, 4 * width, rng);
        b.ff_out = Linear::init(4 * width, width, rng, residual_gain);
        return b;
    }

    void collect(const std::string& prefix, ParamList& out) const {
        ln1.collect(prefix + ".ln1", out);
        attn.query.collect(prefix + ".attn.query", out);
        attn.key.collect(prefix + ".attn.key", out);
        attn.value.collect(prefix + ".attn.value", out);
        attn.output.collect(prefix + ".attn.output", out);
        ln2.collect(prefix + ".ln2", out);
        ff_in.collect(prefix + ".ff_in", out);
        ff_out.collect(prefix + ".ff_out", out);
    }
};

inline Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& p, const AttentionLayout& layout) {
    return p.output(attention(p.query(x), p.key(x), p.value(x), p.heads, layout));
}

/// Output has the input's shape.
inline Tensor transformer_block(const Tensor& h, const TransformerBlock& p, const AttentionLayout& layout,
                                const ForwardContext& ctx = {}) {
    auto a = multi_head_self_attention(p.ln1(h), p.attn, layout);
    auto h1 = add(h, dropout(a, ctx.dropout, ctx.rng, ctx.training));
    auto f = p.ff_out(gelu(p.ff_in(p.ln2(h1))));
    return add(h1, dropout(f, ctx.dropout, ctx.rng, ctx.training));
}

/// Gate blocks are stored side by side in the order input, forget, output, cell.
enum class Gate : std::size_t { Input = 0, Forget = 1, Output = 2, Cell = 3 };

struct LstmParams {
    Tensor W;  // (input_dim, 4*hidden)
    Tensor U;  // (hidden, 4*hidden)
    Tensor b;  // (4*hidden)
    std::size_t input_dim = 0;
    std::size_t hidden = 64;

    static LstmParams init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
        LstmParams p;
        p.input_dim = input_dim;
        p.hidden = hidden;
        const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        p.W = uniform_param({input_dim, 4 * hidden}, bound, rng);
        p.U = uniform_param({hidden, 4 * hidden}, bound, rng);
        p.b = constant_param({4 * hidden}, 0.0);
        for (std::size_t j = 0; j < hidden; ++j) p.b.value()[hidden + j] = 1.0;  // forget-gate bias
        return p;
    }

    void collect(const std::string& prefix, ParamList& out) const {
        out.push_back({prefix + ".W", W});
        out.push_back({prefix + ".U", U});
        out.push_back({prefix + ".b", b});
    }
};

struct LstmState {
    Tensor h, c;
};

/// i,f,o = sigmoid(W x + U h + b), g = tanh(...), c' = f*c + i*g, h' = o*tanh(c').
/// Rows of x/h/c are independent batch entries.
inline LstmState lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmParams& p) {
    const auto H = p.hidden;
    require(x.cols() == p.input_dim, ErrorCode::ShapeMismatch, "lstm input width " + shape_str(x.shape()));
    require(h_prev.cols() == H && c_prev.cols() == H && h_prev.rows() == x.rows() && c_prev.rows() == x.rows(),
            ErrorCode::ShapeMismatch, "lstm state shape");
    auto z = add(linear(x, p.W, p.b), matmul(h_prev, p.U));
    auto i = sigmoid(slice_cols(z, 0, H));
    auto f = sigmoid(slice_cols(z, H, H));
    auto o = sigmoid(slice_cols(z, 2 * H, H));
    auto g = tanh(slice_cols(z, 3 * H, H));
    auto c = add(mul(f, c_prev), mul(i, g));
    return {mul(o, tanh(c)), c};
}

}  // namespace nipred::nn
