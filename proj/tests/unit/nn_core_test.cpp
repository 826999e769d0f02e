#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "nipred/nn/adam.hpp"
#include "nipred/nn/checkpoint.hpp"
#include "nipred/nn/early_stopping.hpp"
#include "nipred/nn/grad_check.hpp"
#include "nipred/nn/layers.hpp"
#include "oracles.hpp"

using namespace nipred;
using namespace nipred::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0, bool grad = false) {
    std::vector<double> v(numel(s));
    for (auto& x : v) x = uniform(rng, -scale, scale);
    return Tensor::from(std::move(s), std::move(v), grad);
}

oracle::Mat to_mat(const Tensor& t, std::size_t r0, std::size_t nrows, std::size_t c0, std::size_t ncols) {
    oracle::Mat m(nrows, std::vector<double>(ncols));
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < ncols; ++j) m[i][j] = t(r0 + i, c0 + j);
    return m;
}

}  // namespace

TEST(Linear, BiasGradientIsExactRowOrderSum) {
    // bit-exact regardless of where the buffers land in memory
    Rng rng(21);
    for (std::size_t rows : {1u, 7u, 300u}) {
        auto x = random_tensor({rows, 5}, rng, 1.0, true);
        auto w = random_tensor({5, 33}, rng, 1.0, true);
        auto b = random_tensor({1, 33}, rng, 1.0, true);
        auto up = random_tensor({rows, 33}, rng);
        sum(mul(linear(x, w, b), up)).backward();
        for (std::size_t j = 0; j < 33; ++j) {
            double s = 0;
            for (std::size_t r = 0; r < rows; ++r) s += up.value()[r * 33 + j];
            EXPECT_EQ(b.grad()[j], s);
        }
    }
}

TEST(Softmax, HandValues) {
    auto a = softmax(Tensor::from({1, 2}, {0, 0}));
    EXPECT_DOUBLE_EQ(a(0, 0), 0.5);
    auto b = softmax(Tensor::from({1, 2}, {1000, 1000}));
    EXPECT_DOUBLE_EQ(b(0, 1), 0.5);
    auto c = softmax(Tensor::from({1, 2}, {0, std::log(3.0)}));
    EXPECT_NEAR(c(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(c(0, 1), 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor({4, 7}, rng, 30.0);
        auto p = softmax(x);
        std::vector<double> shifted(x.value().begin(), x.value().end());
        for (auto& v : shifted) v += 123.25;
        auto q = softmax(Tensor::from({4, 7}, shifted));
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < 7; ++j) {
                EXPECT_GE(p(i, j), 0.0);
                EXPECT_NEAR(p(i, j), q(i, j), 1e-12);
                s += p(i, j);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Softmax, AxisZeroNormalizesColumns) {
    auto p = softmax(Tensor::from({2, 2}, {0, 1, 0, 1}), 0);
    EXPECT_DOUBLE_EQ(p(0, 0) + p(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(Attention, SinglePositionReturnsValueRow) {
    Rng rng(1);
    auto q = random_tensor({1, 4}, rng), k = random_tensor({1, 4}, rng), v = random_tensor({1, 4}, rng);
    auto out = attention(q, k, v, false);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(out(0, j), v(0, j));
}

TEST(Attention, ZeroQueryAveragesValues) {
    Rng rng(2);
    auto q = Tensor::zeros({3, 2});
    auto k = random_tensor({3, 2}, rng), v = random_tensor({3, 2}, rng);
    auto out = attention(q, k, v, false);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out(1, j), (v(0, j) + v(1, j) + v(2, j)) / 3, 1e-15);
    auto causal = attention(q, k, v, true);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(causal(1, j), (v(0, j) + v(1, j)) / 2, 1e-15);
}

TEST(Attention, ThreePositionHandCase) {
    auto q = Tensor::from({3, 2}, {1, 0, 0, 1, 1, 1});
    auto k = Tensor::from({3, 2}, {1, 2, 0, -1, 0.5, 0.5});
    auto v = Tensor::from({3, 2}, {1, 0, 0, 1, 2, 3});
    auto out = attention(q, k, v, false);
    auto ref = oracle::attention(to_mat(q, 0, 3, 0, 2), to_mat(k, 0, 3, 0, 2), to_mat(v, 0, 3, 0, 2), false, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out(i, j), ref[i][j], 1e-12);
}

TEST(Attention, MatchesScalarOracleMultiHeadBatched) {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t heads = 1 + uniform_index(rng, 3), dk = 1 + uniform_index(rng, 4), T = 1 + uniform_index(rng, 6);
        const std::size_t B = 1 + uniform_index(rng, 3), W = heads * dk;
        AttentionLayout layout{B, T, trial % 2 == 0, {}};
        for (std::size_t b = 0; b < B; ++b) layout.lengths.push_back(1 + uniform_index(rng, T));
        auto q = random_tensor({B * T, W}, rng, 2.0), k = random_tensor({B * T, W}, rng, 2.0),
             v = random_tensor({B * T, W}, rng, 2.0);
        auto out = attention(q, k, v, heads, layout);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t h = 0; h < heads; ++h) {
                auto ref = oracle::attention(to_mat(q, b * T, T, h * dk, dk), to_mat(k, b * T, T, h * dk, dk),
                                             to_mat(v, b * T, T, h * dk, dk), layout.causal, layout.lengths[b]);
                for (std::size_t i = 0; i < T; ++i) {
                    for (std::size_t j = 0; j < dk; ++j) ASSERT_NEAR(out(b * T + i, h * dk + j), ref[i][j], 1e-12);
                }
            }
    }
}

TEST(Attention, CausalOutputIgnoresLaterPositionsExactly) {
    Rng rng(11);
    auto q = random_tensor({5, 4}, rng), k = random_tensor({5, 4}, rng), v = random_tensor({5, 4}, rng);
    AttentionLayout layout{1, 5, true, {}};
    auto base = attention(q, k, v, 2, layout);
    for (std::size_t j = 1; j < 5; ++j) {
        auto k2 = k.detach(), v2 = v.detach(), q2 = q.detach();
        for (std::size_t c = 0; c < 4; ++c) {
            k2.value()[j * 4 + c] += 5.0;
            v2.value()[j * 4 + c] -= 3.0;
            q2.value()[j * 4 + c] *= 2.0;
        }
        auto out = attention(q2, k2, v2, 2, layout);
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out(i, c), base(i, c));
    }
}

TEST(Attention, RejectsMismatchedShapes) {
    auto a = Tensor::zeros({3, 4}), b = Tensor::zeros({2, 4});
    EXPECT_THROW(attention(a, b, a, false), Error);
    EXPECT_THROW(attention(a, a, a, 3, AttentionLayout{1, 3, false, {}}), Error);
}

TEST(TransformerBlock, ZeroOutputWeightsGiveIdentity) {
    Rng rng(5);
    auto block = TransformerBlock::init(8, 2, 1, rng);
    std::fill(block.attn.output.weight.value().begin(), block.attn.output.weight.value().end(), 0.0);
    std::fill(block.ff_out.weight.value().begin(), block.ff_out.weight.value().end(), 0.0);
    auto h = random_tensor({4, 8}, rng);
    auto out = transformer_block(h, block, AttentionLayout{1, 4, true, {}});
    for (std::size_t i = 0; i < h.size(); ++i) EXPECT_DOUBLE_EQ(out.value()[i], h.value()[i]);
}

TEST(TransformerBlock, ShapePreservedAndCausal) {
    Rng rng(6);
    auto block = TransformerBlock::init(8, 4, 2, rng);
    for (std::size_t seq : {1u, 4u, 16u}) {
        auto h = random_tensor({seq, 8}, rng);
        AttentionLayout layout{1, seq, true, {}};
        auto out = transformer_block(h, block, layout);
        EXPECT_EQ(out.shape(), h.shape());
        if (seq < 2) continue;
        auto h2 = h.detach();
        h2.value()[(seq - 1) * 8 + 3] += 1.0;
        auto out2 = transformer_block(h2, block, layout);
        for (std::size_t i = 0; i + 1 < seq; ++i)
            for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(out(i, c), out2(i, c));
    }
}

TEST(Embed, PositionTableAdds) {
    Rng rng(8);
    auto We = random_tensor({10, 4}, rng), Wp = random_tensor({6, 4}, rng);
    std::vector<int> ids{3, 7, 3};
    auto pure = embed(We, Tensor::zeros({6, 4}), ids);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(pure(0, c), We(3, c));
    auto h = embed(We, Wp, ids);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(h(2, c) - h(0, c), Wp(2, c) - Wp(0, c), 1e-15);
    std::vector<int> bad{10};
    EXPECT_THROW(embed(We, Wp, bad), Error);
}

TEST(Embed, OneHotProductEqualsGather) {
    Rng rng(9);
    auto We = random_tensor({12, 5}, rng), Wp = random_tensor({8, 5}, rng);
    std::vector<int> ids{0, 11, 4, 4, 9};
    std::vector<double> onehot(ids.size() * 12, 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i) onehot[i * 12 + static_cast<std::size_t>(ids[i])] = 1.0;
    auto T = Tensor::from({ids.size(), 12}, onehot);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4};
    auto expected = add(matmul(T, We), gather_rows(Wp, rows));
    auto h = embed(We, Wp, ids);
    for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h.value()[i], expected.value()[i], 1e-15);
}

namespace {

LstmParams lstm_from_gates(const oracle::LstmGateWeights (&g)[4], std::size_t in, std::size_t H) {
    LstmParams p;
    p.input_dim = in;
    p.hidden = H;
    p.W = Tensor::zeros({in, 4 * H}, true);
    p.U = Tensor::zeros({H, 4 * H}, true);
    p.b = Tensor::zeros({4 * H}, true);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t u = 0; u < H; ++u) {
            for (std::size_t i = 0; i < in; ++i) p.W.value()[i * 4 * H + k * H + u] = g[k].W[i][u];
            for (std::size_t i = 0; i < H; ++i) p.U.value()[i * 4 * H + k * H + u] = g[k].U[i][u];
            p.b.value()[k * H + u] = g[k].b[u];
        }
    return p;
}

void random_gates(oracle::LstmGateWeights (&g)[4], std::size_t in, std::size_t H, Rng& rng, double scale) {
    for (auto& gw : g) {
        gw.W.assign(in, std::vector<double>(H));
        gw.U.assign(H, std::vector<double>(H));
        gw.b.assign(H, 0.0);
        for (auto& r : gw.W)
            for (auto& x : r) x = uniform(rng, -scale, scale);
        for (auto& r : gw.U)
            for (auto& x : r) x = uniform(rng, -scale, scale);
        for (auto& x : gw.b) x = uniform(rng, -scale, scale);
    }
}

}  // namespace

TEST(LstmCell, ZeroWeights) {
    Rng rng(1);
    auto p = LstmParams::init(3, 4, rng);
    for (auto* t : {&p.W, &p.U, &p.b}) std::fill(t->value().begin(), t->value().end(), 0.0);
    auto x = random_tensor({1, 3}, rng), h = random_tensor({1, 4}, rng);
    auto s = lstm_cell(x, h, Tensor::zeros({1, 4}), p);
    for (std::size_t u = 0; u < 4; ++u) {
        EXPECT_EQ(s.c(0, u), 0.0);
        EXPECT_EQ(s.h(0, u), 0.0);
    }
    auto c = Tensor::from({1, 4}, {1.0, -2.0, 0.5, 3.0});
    auto s2 = lstm_cell(x, h, c, p);
    for (std::size_t u = 0; u < 4; ++u) {
        EXPECT_NEAR(s2.c(0, u), 0.5 * c(0, u), 1e-15);
        EXPECT_NEAR(s2.h(0, u), 0.5 * std::tanh(0.5 * c(0, u)), 1e-15);
    }
}

TEST(LstmCell, MatchesScalarOracle) {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t in = 1 + uniform_index(rng, 5), H = 1 + uniform_index(rng, 5), B = 1 + uniform_index(rng, 3);
        oracle::LstmGateWeights g[4];
        random_gates(g, in, H, rng, 1.0);
        auto p = lstm_from_gates(g, in, H);
        auto x = random_tensor({B, in}, rng, 2.0), h = random_tensor({B, H}, rng), c = random_tensor({B, H}, rng, 2.0);
        auto s = lstm_cell(x, h, c, p);
        for (std::size_t b = 0; b < B; ++b) {
            std::vector<double> xv(in), hv(H), cv(H), ho, co;
            for (std::size_t i = 0; i < in; ++i) xv[i] = x(b, i);
            for (std::size_t i = 0; i < H; ++i) hv[i] = h(b, i), cv[i] = c(b, i);
            oracle::lstm_step(xv, hv, cv, g, ho, co);
            for (std::size_t u = 0; u < H; ++u) {
                ASSERT_NEAR(s.h(b, u), ho[u], 1e-12);
                ASSERT_NEAR(s.c(b, u), co[u], 1e-12);
            }
        }
    }
}

TEST(LstmCell, GateRanges) {
    Rng rng(4);
    for (double scale : {0.1, 10.0, 1000.0}) {
        auto x = random_tensor({3, 2}, rng, scale);
        auto z = random_tensor({3, 8}, rng, scale);
        auto sg = sigmoid(z);
        auto th = tanh(z);
        for (double v : sg.value()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
        for (double v : th.value()) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
        auto p = LstmParams::init(2, 4, rng);
        auto s = lstm_cell(x, Tensor::zeros({3, 4}), Tensor::zeros({3, 4}), p);
        for (double v : s.h.value()) EXPECT_LT(std::fabs(v), 1.0);
    }
}

TEST(CrossEntropy, HandValues) {
    std::vector<int> t1{2};
    EXPECT_NEAR(cross_entropy(Tensor::zeros({1, 5}), t1).item(), std::log(5.0), 1e-15);
    std::vector<int> t0{0};
    EXPECT_NEAR(cross_entropy(Tensor::from({1, 3}, {1e9, 0, 0}), t0).item(), 0.0, 1e-12);
    std::vector<int> t{1};
    EXPECT_NEAR(cross_entropy(Tensor::from({1, 2}, {0, std::log(3.0)}), t).item(), -std::log(0.75), 1e-15);
}

TEST(CrossEntropy, MaskExcludesRows) {
    auto logits = Tensor::from({2, 2}, {0, std::log(3.0), 50, -50});
    std::vector<int> t{1, 1};
    std::vector<std::uint8_t> mask{1, 0};
    EXPECT_NEAR(cross_entropy(logits, t, mask).item(), -std::log(0.75), 1e-15);
    std::vector<std::uint8_t> none{0, 0};
    try {
        cross_entropy(logits, t, none);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AllMasked);
    }
}

TEST(Adam, ZeroGradLeavesParams) {
    std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
    AdamState st;
    adam_step(p, g, st, 1, 0.1, 0.9, 0.999, 1e-8);
    EXPECT_EQ(p[0], 1.0);
    EXPECT_EQ(p[1], -2.0);
}

TEST(Adam, FirstStepMatchesHandComputation) {
    std::vector<double> p{0.5}, g{0.2};
    AdamState st;
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    adam_step(p, g, st, 1, lr, b1, b2, eps);
    const double m = (1 - b1) * 0.2, v = (1 - b2) * 0.04;
    const double expected = 0.5 - lr * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + eps);
    EXPECT_NEAR(p[0], expected, 1e-15);
    EXPECT_NEAR(p[0], 0.5 - lr * 0.2 / (0.2 + eps), 1e-15);
}

TEST(Adam, EqualGradsMoveEqually) {
    std::vector<double> p{1.0, 1.0}, g{0.3, 0.3};
    AdamState st;
    for (long t = 1; t <= 5; ++t) adam_step(p, g, st, t, 0.05, 0.9, 0.999, 1e-8);
    EXPECT_EQ(p[0], p[1]);
}

TEST(Adam, ClipScalesGlobalNorm) {
    auto w = Tensor::from({2}, {0.0, 0.0}, true);
    Adam opt({{"w", w}}, AdamConfig{0.1, 0.9, 0.999, 1e-8, 1.0});
    w.grad()[0] = 30.0;
    w.grad()[1] = 40.0;
    opt.step();
    EXPECT_NEAR(w.value()[0], -0.1, 1e-6);
    EXPECT_NEAR(w.value()[1], -0.1, 1e-6);
}

TEST(Dropout, IdentityOutsideTraining) {
    Rng rng(1);
    auto x = random_tensor({3, 3}, rng);
    auto a = dropout(x, 0.2, &rng, false);
    auto b = dropout(x, 0.0, &rng, true);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(a.value()[i], x.value()[i]);
        EXPECT_EQ(b.value()[i], x.value()[i]);
    }
    auto c = dropout(x, 0.5, &rng, true);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_TRUE(c.value()[i] == 0.0 || c.value()[i] == 2.0 * x.value()[i]);
}

TEST(GradCheck, Square) {
    auto x = Tensor::from({1}, {3.0}, true);
    auto f = [&] { return mul(x, x); };
    EXPECT_LT(grad_check(f, {{"x", x}}), 1e-9);
    EXPECT_NEAR(x.grad()[0], 6.0, 1e-12);
}

TEST(GradCheck, AttentionSoftmaxCrossEntropy) {
    Rng rng(12);
    auto q = random_tensor({2, 4}, rng, 1.0, true), k = random_tensor({2, 4}, rng, 1.0, true),
         v = random_tensor({2, 4}, rng, 1.0, true);
    std::vector<int> targets{1, 3};
    auto f = [&] { return cross_entropy(attention(q, k, v, true), targets); };
    EXPECT_LT(grad_check(f, {{"q", q}, {"k", k}, {"v", v}}), 1e-6);
    auto g = [&] { return sum(mul(softmax(attention(q, k, v, 2, AttentionLayout{1, 2, false, {}}), 0), v)); };
    EXPECT_LT(grad_check(g, {{"q", q}, {"k", k}, {"v", v}}), 1e-6);
}

TEST(GradCheck, UnrolledLstm) {
    Rng rng(13);
    auto p = LstmParams::init(3, 4, rng);
    auto head = Linear::init(4, 3, rng);
    std::vector<Tensor> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(random_tensor({2, 3}, rng));
    std::vector<int> targets{0, 2};
    auto f = [&] {
        LstmState s{Tensor::zeros({2, 4}), Tensor::zeros({2, 4})};
        for (auto& x : xs) s = lstm_cell(x, s.h, s.c, p);
        return cross_entropy(head(s.h), targets);
    };
    ParamList params;
    p.collect("lstm", params);
    head.collect("head", params);
    EXPECT_LT(grad_check(f, params), 1e-6);
}

TEST(GradCheck, TwoBlockTransformerStack) {
    Rng rng(14);
    auto b1 = TransformerBlock::init(8, 2, 2, rng), b2 = TransformerBlock::init(8, 2, 2, rng);
    auto ln = LayerNorm::init(8);
    auto x = random_tensor({4, 8}, rng, 1.0, true);
    AttentionLayout layout{1, 4, true, {}};
    std::vector<int> targets{1, 5, 0, 7};
    auto f = [&] { return cross_entropy(ln(transformer_block(transformer_block(x, b1, layout), b2, layout)), targets); };
    ParamList params{{"x", x}};
    b1.collect("b1", params);
    b2.collect("b2", params);
    ln.collect("ln", params);
    EXPECT_LT(grad_check(f, params), 1e-5);
}

TEST(GradCheck, ElementwiseAndEmbeddingOps) {
    Rng rng(15);
    auto table = random_tensor({6, 3}, rng, 1.0, true);
    auto w = random_tensor({3, 3}, rng, 1.0, true);
    std::vector<int> ids{1, 4, 1, 5};
    std::vector<std::size_t> rows{3, 0};
    auto f = [&] {
        auto e = embedding(table, ids);
        auto h = gelu(matmul(e, w));
        auto r = relu(add(h, scale(e, 0.5)));
        auto s = sub(tanh(r), sigmoid(e));
        return mean(mul(gather_rows(s, rows), slice_cols(gather_rows(e, rows), 0, 3)));
    };
    EXPECT_LT(grad_check(f, {{"table", table}, {"w", w}}), 1e-6);
}

TEST(Checkpoint, RoundTripAndHashCheck) {
    Rng rng(16);
    auto lin = Linear::init(3, 2, rng);
    ParamList params;
    lin.collect("lin", params);
    Adam opt(params, {});
    auto x = random_tensor({1, 3}, rng);
    std::vector<int> t{1};
    opt.zero_grad();
    cross_entropy(lin(x), t).backward();
    opt.step();
    json cfg = {{"kind", "test"}, {"width", 3}};
    const auto path = (std::filesystem::temp_directory_path() / "nipred_ckpt_test.bin").string();
    save_checkpoint(path, snapshot(cfg, params, &opt, 99));
    auto loaded = load_checkpoint(path);
    EXPECT_EQ(loaded.seed, 99u);
    EXPECT_EQ(loaded.step, 1);

    auto other = Linear::init(3, 2, rng);
    ParamList params2;
    other.collect("lin", params2);
    Adam opt2(params2, {});
    restore(loaded, config_hash(cfg), params2, &opt2);
    for (std::size_t i = 0; i < lin.weight.size(); ++i) EXPECT_EQ(other.weight.value()[i], lin.weight.value()[i]);
    EXPECT_EQ(opt2.steps(), 1);
    EXPECT_EQ(opt2.state()[0].m, opt.state()[0].m);

    json cfg2 = cfg;
    cfg2["width"] = 4;
    try {
        restore(loaded, config_hash(cfg2), params2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CheckpointMismatch);
    }

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x7f');
    }
    try {
        load_checkpoint(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CorruptCheckpoint);
    }
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(EarlyStopping, IncreasingLossStopsAfterPatiencePlusOne) {
    EarlyStopping es(3);
    std::size_t epochs = 0;
    for (double loss = 1.0; !es.should_stop(); loss += 0.1) {
        es.update(loss);
        ++epochs;
    }
    EXPECT_EQ(epochs, 4u);
    EXPECT_EQ(es.best_epoch(), 0u);
    EXPECT_EQ(es.history().size(), epochs);
}

TEST(EarlyStopping, PatienceZeroStopsAtFirstNonImprovement) {
    EarlyStopping es(0);
    es.update(1.0);
    EXPECT_FALSE(es.should_stop());
    es.update(0.5);
    EXPECT_FALSE(es.should_stop());
    es.update(0.7);
    EXPECT_TRUE(es.should_stop());
    EXPECT_EQ(es.best_epoch(), 1u);
}
