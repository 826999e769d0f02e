#pragma once

#include <cmath>
#include <vector>

#include "nipred/gpt/model.hpp"

namespace nipred::gpt {

/// Incremental inference with cached keys and values, one token per call.
/// Runs without recording a graph.
class GptDecoder {
public:
    explicit GptDecoder(const GptModel& m) : m_(m) { reset(); }

    void reset() {
        const auto L = m_.blocks.size(), P = m_.cfg.max_positions, W = m_.cfg.width;
        keys_.assign(L, nn::RowMatrix(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(W)));
        values_.assign(L, nn::RowMatrix(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(W)));
        t_ = 0;
    }

    std::size_t position() const { return t_; }

    /// Feeds the token at the next position and returns logits for the one after it.
    std::vector<double> step(int token) {
        require(t_ < m_.cfg.max_positions, ErrorCode::WindowTooLong, "decoder ran past max_positions");
        nn::NoGradGuard guard;
        const int pos = static_cast<int>(t_);
        auto h = nn::embed(m_.token_embedding, m_.position_embedding, std::span<const int>(&token, 1),
                           std::span<const int>(&pos, 1));
        for (std::size_t l = 0; l < m_.blocks.size(); ++l) {
            const auto& blk = m_.blocks[l];
            auto x = blk.ln1(h);
            auto q = blk.attn.query(x), k = blk.attn.key(x), v = blk.attn.value(x);
            const auto W = static_cast<Eigen::Index>(m_.cfg.width);
            keys_[l].row(static_cast<Eigen::Index>(t_)) = Eigen::Map<const Eigen::RowVectorXd>(k.value().data(), W);
            values_[l].row(static_cast<Eigen::Index>(t_)) = Eigen::Map<const Eigen::RowVectorXd>(v.value().data(), W);
            auto a = attend(q, l);
            h = nn::add(h, blk.attn.output(a));
            h = nn::add(h, blk.ff_out(nn::gelu(blk.ff_in(blk.ln2(h)))));
        }
        ++t_;
        auto logits = m_.head(m_.ln_final(h));
        return {logits.value().begin(), logits.value().end()};
    }

private:
    Tensor attend(const Tensor& q, std::size_t layer) const {
        const auto heads = m_.cfg.heads, dk = m_.cfg.width / heads;
        const auto n = static_cast<Eigen::Index>(t_ + 1);
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
        std::vector<double> out(m_.cfg.width);
        for (std::size_t h = 0; h < heads; ++h) {
            const auto c0 = static_cast<Eigen::Index>(h * dk), d = static_cast<Eigen::Index>(dk);
            Eigen::Map<const Eigen::RowVectorXd> qh(q.value().data() + c0, d);
            Eigen::VectorXd s = keys_[layer].block(0, c0, n, d) * qh.transpose() * inv_sqrt;
            const double mx = s.maxCoeff();
            s = (s.array() - mx).exp();
            s /= s.sum();
            Eigen::Map<Eigen::RowVectorXd>(out.data() + c0, d) = s.transpose() * values_[layer].block(0, c0, n, d);
        }
        return Tensor::from({1, m_.cfg.width}, std::move(out));
    }

    const GptModel& m_;
    std::vector<nn::RowMatrix> keys_, values_;
    std::size_t t_ = 0;
};

}  // namespace nipred::gpt
