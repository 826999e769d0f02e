#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "nipred/bert/model.hpp"
#include "nipred/bert/pairs.hpp"
#include "nipred/nn/adam.hpp"
#include "nipred/nn/fit.hpp"

namespace nipred::bert {

inline bool maskable(int id) { return !text::is_special(id); }

/// Positions to mask in one sequence: ceil(rate * eligible) distinct non-special positions.
inline std::vector<std::size_t> select_mask_positions(std::span<const int> ids, double rate, Rng& rng) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (maskable(ids[i])) eligible.push_back(i);
    if (eligible.empty()) return {};
    const auto k = std::min(eligible.size(),
                            static_cast<std::size_t>(std::ceil(rate * static_cast<double>(eligible.size()) - 1e-12)));
    for (std::size_t i = 0; i < k; ++i) std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
    eligible.resize(k);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

/// Masked-token loss: selected positions are replaced by MASK and the model is scored
/// on recovering the original tokens there, nowhere else.
inline Tensor mlm_loss(const BertModel& model, std::span<const std::vector<int>> seqs, double mask_rate, Rng& rng,
                       const nn::ForwardContext& ctx = {}) {
    require(mask_rate > 0 && mask_rate < 1, ErrorCode::ConfigError, "mask_rate must lie in (0,1)");
    auto b = nn::make_batch(seqs);
    std::vector<int> targets(b.ids.size(), 0);
    std::vector<std::uint8_t> mask(b.ids.size(), 0);
    std::size_t masked = 0;
    for (std::size_t s = 0; s < seqs.size(); ++s)
        for (auto p : select_mask_positions(seqs[s], mask_rate, rng)) {
            const auto row = s * b.seq + p;
            targets[row] = b.ids[row];
            mask[row] = 1;
            b.ids[row] = text::MASK;
            ++masked;
        }
    if (masked == 0) fail(ErrorCode::NothingToMask, "no maskable tokens in batch");
    std::vector<int> segments(b.ids.size(), 0);
    auto h = model.encode(b, segments, ctx);
    return nn::cross_entropy(model.mlm_head(h), targets, mask);
}

inline nn::SequenceBatch pair_batch(std::span<const PairExample> xs, std::vector<int>& segments) {
    std::vector<std::vector<int>> toks;
    for (const auto& x : xs) toks.push_back(x.tokens);
    auto b = nn::make_batch(toks);
    segments.assign(b.ids.size(), 0);
    for (std::size_t i = 0; i < xs.size(); ++i)
        std::copy(xs[i].segments.begin(), xs[i].segments.end(), segments.begin() + static_cast<long>(i * b.seq));
    return b;
}

inline Tensor pair_loss(const BertModel& model, std::span<const PairExample> xs, const nn::ForwardContext& ctx = {}) {
    std::vector<int> segments;
    auto b = pair_batch(xs, segments);
    std::vector<int> labels;
    for (const auto& x : xs) labels.push_back(x.label);
    return nn::cross_entropy(model.pair_logits(b, segments, ctx), labels);
}

struct PairPrediction {
    std::array<double, 2> probs{};  // {consecutive, non-consecutive}
    int label = kNonConsecutive;
};

inline PairPrediction predict_from_logits(double l0, double l1) {
    PairPrediction p;
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    p.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
    // A tie rejects: unsure pairs count as non-consecutive.
    p.label = p.probs[0] > p.probs[1] ? kConsecutive : kNonConsecutive;
    return p;
}

inline std::vector<PairPrediction> classify_pairs(const BertModel& model, std::span<const PairExample> xs,
                                                  std::size_t batch_size = 64) {
    nn::NoGradGuard guard;
    std::vector<PairPrediction> out;
    for (std::size_t i = 0; i < xs.size(); i += batch_size) {
        auto chunk = xs.subspan(i, std::min(batch_size, xs.size() - i));
        std::vector<int> segments;
        auto b = pair_batch(chunk, segments);
        auto logits = model.pair_logits(b, segments);
        for (std::size_t r = 0; r < chunk.size(); ++r) out.push_back(predict_from_logits(logits(r, 0), logits(r, 1)));
    }
    return out;
}

inline PairPrediction classify_pair(const BertModel& model, const PairExample& x) {
    return classify_pairs(model, std::span<const PairExample>(&x, 1))[0];
}

/// True when packet text b is judged to follow a. Pairs too long to encode count as
/// non-consecutive.
inline bool classify_pair_text(const BertModel& model, const text::BpeVocab& vocab, const std::string& a, const std::string& b) {
    try {
        return classify_pair(model, make_example(vocab, a, b, kConsecutive, model.cfg.max_positions)).label == kConsecutive;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SequenceTooLong) return false;
        throw;
    }
}

struct BertTrainConfig {
    std::size_t mlm_steps = 0;   // optional warm-up before pair fine-tuning
    std::size_t max_epochs = 30;
    std::size_t patience = 3;
    double min_delta = 0.0;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double clip_norm = 1.0;
};

inline void to_json(nlohmann::json& j, const BertTrainConfig& c) {
    j = {{"mlm_steps", c.mlm_steps}, {"max_epochs", c.max_epochs}, {"patience", c.patience},
         {"min_delta", c.min_delta}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"clip_norm", c.clip_norm}};
}

inline void from_json(const nlohmann::json& j, BertTrainConfig& c) {
    BertTrainConfig d;
    c.mlm_steps = j.value("mlm_steps", d.mlm_steps);
    c.max_epochs = j.value("max_epochs", d.max_epochs);
    c.patience = j.value("patience", d.patience);
    c.min_delta = j.value("min_delta", d.min_delta);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr = j.value("lr", d.lr);
    c.clip_norm = j.value("clip_norm", d.clip_norm);
}

/// Masked-token warm-up on packet token sequences. Returns per-step loss.
inline std::vector<double> mlm_pretrain(BertModel& model, const std::vector<std::vector<int>>& seqs, std::size_t steps,
                                        std::size_t batch_size, double lr, Rng& rng) {
    require(!seqs.empty(), ErrorCode::CorpusEmpty, "no sequences for masked-token warm-up");
    nn::Adam opt(model.params(), nn::AdamConfig{lr, 0.9, 0.999, 1e-8, 1.0});
    std::vector<double> losses;
    std::vector<std::vector<int>> batch;
    for (std::size_t s = 0; s < steps; ++s) {
        batch.clear();
        for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(seqs[uniform_index(rng, seqs.size())]);
        opt.zero_grad();
        nn::ForwardContext ctx{true, model.cfg.dropout, &rng};
        auto loss = mlm_loss(model, batch, model.cfg.mask_rate, rng, ctx);
        loss.backward();
        opt.step();
        losses.push_back(loss.item());
    }
    return losses;
}

inline double mean_pair_loss(const BertModel& model, std::span<const PairExample> xs, std::size_t batch_size = 64) {
    nn::NoGradGuard guard;
    double total = 0;
    for (std::size_t i = 0; i < xs.size(); i += batch_size) {
        auto chunk = xs.subspan(i, std::min(batch_size, xs.size() - i));
        total += pair_loss(model, chunk).item() * static_cast<double>(chunk.size());
    }
    return total / static_cast<double>(xs.size());
}

inline double pair_accuracy(const BertModel& model, std::span<const PairExample> xs) {
    if (xs.empty()) return 0.0;
    auto preds = classify_pairs(model, xs);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) ok += preds[i].label == xs[i].label;
    return static_cast<double>(ok) / static_cast<double>(xs.size());
}

/// Pair fine-tuning with early stopping on validation loss; the best epoch's
/// weights are left in `model`.
inline nn::FitHistory finetune_pair(BertModel& model, const std::vector<PairExample>& train,
                                    const std::vector<PairExample>& val, const BertTrainConfig& cfg,
                                    const std::function<void(std::size_t, double, double)>& log = {}) {
    require(!train.empty() && !val.empty(), ErrorCode::CorpusEmpty, "pair fine-tuning needs train and val pairs");
    Rng rng(model.cfg.seed ^ 0x626572745f6674ULL);
    if (cfg.mlm_steps) {
        std::vector<std::vector<int>> seqs;
        for (const auto& x : train) seqs.push_back(x.tokens);
        mlm_pretrain(model, seqs, cfg.mlm_steps, cfg.batch_size, cfg.lr, rng);
    }
    const auto params = model.params();
    nn::Adam opt(params, nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm});
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<PairExample> batch;
    auto epoch_fn = [&](std::size_t) {
        shuffle(std::span<std::size_t>(order), rng);
        double total = 0;
        for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
            batch.clear();
            for (std::size_t k = i; k < std::min(order.size(), i + cfg.batch_size); ++k) batch.push_back(train[order[k]]);
            opt.zero_grad();
            nn::ForwardContext ctx{true, model.cfg.dropout, &rng};
            auto loss = pair_loss(model, batch, ctx);
            loss.backward();
            opt.step();
            total += loss.item() * static_cast<double>(batch.size());
        }
        return total / static_cast<double>(train.size());
    };
    std::size_t epoch = 0;
    auto val_fn = [&] {
        const double v = mean_pair_loss(model, val);
        if (log) log(epoch, v, pair_accuracy(model, val));
        ++epoch;
        return v;
    };
    return nn::fit_with_early_stopping(cfg.max_epochs, cfg.patience, cfg.min_delta, epoch_fn, val_fn, params);
}

inline std::vector<PairExample> make_examples(const text::BpeVocab& vocab, const std::vector<PairText>& pairs,
                                              std::size_t max_positions) {
    std::vector<PairExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(make_example(vocab, p.a, p.b, p.label, max_positions));
    return out;
}

}  // namespace nipred::bert
