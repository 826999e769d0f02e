#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/nn/checkpoint.hpp"
#include "nipred/nn/layers.hpp"
#include "nipred/nn/sequence_batch.hpp"

namespace nipred::gpt {

using nn::Tensor;

struct GptConfig {
    std::size_t layers = 4;
    std::size_t width = 128;
    std::size_t heads = 4;
    std::size_t vocab_size = 1024;
    std::size_t max_positions = 256;
    double dropout = 0.0;
    std::uint64_t seed = 42;

    void validate() const {
        require(layers >= 1 && width >= 1 && heads >= 1, ErrorCode::ConfigError, "gpt sizes must be positive");
        require(width % heads == 0, ErrorCode::ConfigError, "gpt width must be divisible by heads");
        require(vocab_size > text::kNumSpecial && max_positions >= 2, ErrorCode::ConfigError, "gpt vocab/positions");
        require(dropout >= 0 && dropout < 1, ErrorCode::ConfigError, "gpt dropout outside [0,1)");
    }
};

inline void to_json(nlohmann::json& j, const GptConfig& c) {
    j = {{"layers", c.layers}, {"width", c.width}, {"heads", c.heads}, {"vocab_size", c.vocab_size},
         {"max_positions", c.max_positions}, {"dropout", c.dropout}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, GptConfig& c) {
    GptConfig d;
    c.layers = j.value("layers", d.layers);
    c.width = j.value("width", d.width);
    c.heads = j.value("heads", d.heads);
    c.vocab_size = j.value("vocab_size", d.vocab_size);
    c.max_positions = j.value("max_positions", d.max_positions);
    c.dropout = j.value("dropout", d.dropout);
    c.seed = j.value("seed", d.seed);
}

/// Token + position embeddings, pre-norm causal blocks, final norm, output head.
struct GptModel {
    GptConfig cfg;
    Tensor token_embedding;     // (vocab, width)
    Tensor position_embedding;  // (max_positions, width)
    std::vector<nn::TransformerBlock> blocks;
    nn::LayerNorm ln_final;
    nn::Linear head;            // (width, vocab)

    static GptModel init(const GptConfig& cfg) {
        cfg.validate();
        Rng rng(cfg.seed);
        GptModel m;
        m.cfg = cfg;
        m.token_embedding = nn::uniform_param({cfg.vocab_size, cfg.width}, 0.1, rng);
        m.position_embedding = nn::uniform_param({cfg.max_positions, cfg.width}, 0.1, rng);
        for (std::size_t l = 0; l < cfg.layers; ++l)
            m.blocks.push_back(nn::TransformerBlock::init(cfg.width, cfg.heads, cfg.layers, rng));
        m.ln_final = nn::LayerNorm::init(cfg.width);
        m.head = nn::Linear::init(cfg.width, cfg.vocab_size, rng, 0.5);
        return m;
    }

    nn::ParamList params() const {
        nn::ParamList out{{"tok", token_embedding}, {"pos", position_embedding}};
        for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].collect("block" + std::to_string(l), out);
        ln_final.collect("ln_f", out);
        head.collect("head", out);
        return out;
    }

    /// Logits (batch*seq, vocab).
    Tensor forward(const nn::SequenceBatch& b, const nn::ForwardContext& ctx = {}) const {
        require(b.seq <= cfg.max_positions, ErrorCode::WindowTooLong,
                "sequence of " + std::to_string(b.seq) + " tokens exceeds max_positions " +
                    std::to_string(cfg.max_positions));
        auto h = nn::embed(token_embedding, position_embedding, b.ids, b.positions);
        h = nn::dropout(h, ctx.dropout, ctx.rng, ctx.training);
        const auto layout = b.layout(true);
        for (const auto& blk : blocks) h = nn::transformer_block(h, blk, layout, ctx);
        return head(ln_final(h));
    }
};

inline nlohmann::json model_json(const GptConfig& c) { return {{"model", "gpt"}, {"config", c}}; }

inline void save_gpt(const std::string& path, const GptModel& m, const nn::Adam* opt = nullptr,
                     nlohmann::json extra = nlohmann::json::object()) {
    nn::save_checkpoint(path, nn::snapshot(model_json(m.cfg), m.params(), opt, m.cfg.seed, std::move(extra)));
}

inline GptModel load_gpt(const std::string& path, nlohmann::json* extra = nullptr) {
    auto ck = nn::load_checkpoint(path);
    require(ck.config.value("model", "") == "gpt", ErrorCode::CheckpointMismatch, path + " is not a gpt checkpoint");
    auto m = GptModel::init(ck.config.at("config").get<GptConfig>());
    auto params = m.params();
    nn::restore(ck, nn::config_hash(model_json(m.cfg)), params);
    if (extra) *extra = ck.extra;
    return m;
}

}  // namespace nipred::gpt
