#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/nn/checkpoint.hpp"
#include "nipred/nn/layers.hpp"
#include "nipred/nn/sequence_batch.hpp"

namespace nipred::bert {

using nn::Tensor;

struct BertConfig {
    std::size_t layers = 4;
    std::size_t width = 128;
    std::size_t heads = 4;
    std::size_t vocab_size = 1024;
    std::size_t max_positions = 256;
    double mask_rate = 0.15;
    double dropout = 0.1;
    std::uint64_t seed = 42;

    void validate() const {
        require(layers >= 1 && width >= 1 && heads >= 1, ErrorCode::ConfigError, "bert sizes must be positive");
        require(width % heads == 0, ErrorCode::ConfigError, "bert width must be divisible by heads");
        require(vocab_size > text::kNumSpecial && max_positions >= 3, ErrorCode::ConfigError, "bert vocab/positions");
        require(mask_rate > 0 && mask_rate < 1, ErrorCode::ConfigError, "mask_rate must lie in (0,1)");
        require(dropout >= 0 && dropout < 1, ErrorCode::ConfigError, "bert dropout outside [0,1)");
    }
};

inline void to_json(nlohmann::json& j, const BertConfig& c) {
    j = {{"layers", c.layers}, {"width", c.width}, {"heads", c.heads}, {"vocab_size", c.vocab_size},
         {"max_positions", c.max_positions}, {"mask_rate", c.mask_rate}, {"dropout", c.dropout}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, BertConfig& c) {
    BertConfig d;
    c.layers = j.value("layers", d.layers);
    c.width = j.value("width", d.width);
    c.heads = j.value("heads", d.heads);
    c.vocab_size = j.value("vocab_size", d.vocab_size);
    c.max_positions = j.value("max_positions", d.max_positions);
    c.mask_rate = j.value("mask_rate", d.mask_rate);
    c.dropout = j.value("dropout", d.dropout);
    c.seed = j.value("seed", d.seed);
}

/// Token, position and segment embeddings into bidirectional pre-norm blocks. Two
/// heads: token prediction for masking, and a pair head on the pooled CLS state.
struct BertModel {
    BertConfig cfg;
    Tensor token_embedding;     // (vocab, width)
    Tensor position_embedding;  // (max_positions, width)
    Tensor segment_embedding;   // (2, width)
    std::vector<nn::TransformerBlock> blocks;
    nn::LayerNorm ln_final;
    nn::Linear mlm_head;        // (width, vocab)
    nn::Linear pooler;          // (width, width), tanh
    nn::Linear pair_head;       // (width, 2)

    static BertModel init(const BertConfig& cfg) {
        cfg.validate();
        Rng rng(cfg.seed);
        BertModel m;
        m.cfg = cfg;
        m.token_embedding = nn::uniform_param({cfg.vocab_size, cfg.width}, 0.1, rng);
        m.position_embedding = nn::uniform_param({cfg.max_positions, cfg.width}, 0.1, rng);
        m.segment_embedding = nn::uniform_param({2, cfg.width}, 0.1, rng);
        for (std::size_t l = 0; l < cfg.layers; ++l)
            m.blocks.push_back(nn::TransformerBlock::init(cfg.width, cfg.heads, cfg.layers, rng));
        m.ln_final = nn::LayerNorm::init(cfg.width);
        m.mlm_head = nn::Linear::init(cfg.width, cfg.vocab_size, rng, 0.1);
        m.pooler = nn::Linear::init(cfg.width, cfg.width, rng);
        m.pair_head = nn::Linear::init(cfg.width, 2, rng);
        return m;
    }

    nn::ParamList params() const {
        nn::ParamList out{{"tok", token_embedding}, {"pos", position_embedding}, {"seg", segment_embedding}};
        for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].collect("block" + std::to_string(l), out);
        ln_final.collect("ln_f", out);
        mlm_head.collect("mlm", out);
        pooler.collect("pool", out);
        pair_head.collect("pair", out);
        return out;
    }

    /// Final hidden states (batch*seq, width). `segments` follows the batch layout.
    Tensor encode(const nn::SequenceBatch& b, std::span<const int> segments, const nn::ForwardContext& ctx = {}) const {
        require(b.seq <= cfg.max_positions, ErrorCode::SequenceTooLong,
                "sequence of " + std::to_string(b.seq) + " tokens exceeds max_positions " +
                    std::to_string(cfg.max_positions));
        require(segments.size() == b.ids.size(), ErrorCode::ShapeMismatch, "segment ids length");
        auto h = nn::add(nn::embed(token_embedding, position_embedding, b.ids, b.positions),
                         nn::embedding(segment_embedding, segments));
        h = nn::dropout(h, ctx.dropout, ctx.rng, ctx.training);
        const auto layout = b.layout(false);
        for (const auto& blk : blocks) h = nn::transformer_block(h, blk, layout, ctx);
        return ln_final(h);
    }

    /// tanh(W h_CLS + b), one row per sequence.
    Tensor pooled(const Tensor& hidden, const nn::SequenceBatch& b) const {
        std::vector<std::size_t> rows(b.batch);
        for (std::size_t i = 0; i < b.batch; ++i) rows[i] = i * b.seq;
        return nn::tanh(pooler(nn::gather_rows(hidden, rows)));
    }

    /// Pair logits (batch, 2): column 0 consecutive, column 1 non-consecutive.
    Tensor pair_logits(const nn::SequenceBatch& b, std::span<const int> segments, const nn::ForwardContext& ctx = {}) const {
        auto p = pooled(encode(b, segments, ctx), b);
        return pair_head(nn::dropout(p, ctx.dropout, ctx.rng, ctx.training));
    }
};

inline nlohmann::json model_json(const BertConfig& c) { return {{"model", "bert"}, {"config", c}}; }

inline void save_bert(const std::string& path, const BertModel& m, const nn::Adam* opt = nullptr,
                      nlohmann::json extra = nlohmann::json::object()) {
    nn::save_checkpoint(path, nn::snapshot(model_json(m.cfg), m.params(), opt, m.cfg.seed, std::move(extra)));
}

inline BertModel load_bert(const std::string& path, nlohmann::json* extra = nullptr) {
    auto ck = nn::load_checkpoint(path);
    require(ck.config.value("model", "") == "bert", ErrorCode::CheckpointMismatch, path + " is not a bert checkpoint");
    auto m = BertModel::init(ck.config.at("config").get<BertConfig>());
    auto params = m.params();
    nn::restore(ck, nn::config_hash(model_json(m.cfg)), params);
    if (extra) *extra = ck.extra;
    return m;
}

}  // namespace nipred::bert
