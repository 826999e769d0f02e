#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "nipred/gpt/model.hpp"

namespace nipred::gpt {

/// Mean next-token negative log-likelihood over real positions. A position
/// contributes when both it and its successor lie inside the sequence.
inline Tensor clm_loss(const GptModel& model, std::span<const std::vector<int>> windows, const nn::ForwardContext& ctx = {}) {
    for (const auto& w : windows)
        require(w.size() <= model.cfg.max_positions, ErrorCode::WindowTooLong,
                "window of " + std::to_string(w.size()) + " tokens exceeds max_positions");
    auto b = nn::make_batch(windows);
    auto logits = model.forward(b, ctx);
    std::vector<int> targets(b.ids.size(), 0);
    std::vector<std::uint8_t> mask(b.ids.size(), 0);
    for (std::size_t s = 0; s < b.batch; ++s)
        for (std::size_t t = 0; t + 1 < windows[s].size(); ++t) {
            const auto next = windows[s][t + 1];
            if (next == text::PAD) break;
            targets[s * b.seq + t] = next;
            mask[s * b.seq + t] = 1;
        }
    return nn::cross_entropy(logits, targets, mask);
}

struct GptTrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    double lr = 2e-3;
    std::size_t warmup = 100;
    double min_lr_ratio = 0.1;
    double clip_norm = 1.0;
    std::size_t log_every = 100;
};

inline void to_json(nlohmann::json& j, const GptTrainConfig& c) {
    j = {{"steps", c.steps}, {"batch_size", c.batch_size}, {"lr", c.lr}, {"warmup", c.warmup},
         {"min_lr_ratio", c.min_lr_ratio}, {"clip_norm", c.clip_norm}, {"log_every", c.log_every}};
}

inline void from_json(const nlohmann::json& j, GptTrainConfig& c) {
    GptTrainConfig d;
    c.steps = j.value("steps", d.steps);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr = j.value("lr", d.lr);
    c.warmup = j.value("warmup", d.warmup);
    c.min_lr_ratio = j.value("min_lr_ratio", d.min_lr_ratio);
    c.clip_norm = j.value("clip_norm", d.clip_norm);
    c.log_every = j.value("log_every", d.log_every);
}

/// Linear warmup then cosine decay to lr * min_lr_ratio.
inline double lr_at(const GptTrainConfig& c, std::size_t step) {
    if (step < c.warmup) return c.lr * static_cast<double>(step + 1) / static_cast<double>(c.warmup);
    const double span = static_cast<double>(std::max<std::size_t>(1, c.steps - std::min(c.steps, c.warmup)));
    const double p = std::min(1.0, static_cast<double>(step - c.warmup) / span);
    const double floor = c.lr * c.min_lr_ratio;
    return floor + (c.lr - floor) * 0.5 * (1.0 + std::cos(M_PI * p));
}

struct GptTrainResult {
    std::vector<double> loss;  // per step
};

/// Minibatch training over shuffled windows, epoch after epoch, for a fixed number of
/// steps. All sampling comes from one generator seeded by the model seed.
inline GptTrainResult train_gpt(GptModel& model, const std::vector<std::vector<int>>& windows, const GptTrainConfig& cfg,
                                const std::function<void(std::size_t, double)>& log = {}) {
    require(!windows.empty(), ErrorCode::CorpusEmpty, "no training windows");
    require(cfg.batch_size > 0, ErrorCode::ConfigError, "batch_size must be > 0");
    Rng rng(model.cfg.seed ^ 0x6770745f747261ULL);
    nn::Adam opt(model.params(), nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm});
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    GptTrainResult res;
    std::vector<std::vector<int>> batch;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        batch.clear();
        while (batch.size() < cfg.batch_size) {
            if (cursor == order.size()) {
                shuffle(std::span<std::size_t>(order), rng);
                cursor = 0;
            }
            batch.push_back(windows[order[cursor++]]);
        }
        opt.set_lr(lr_at(cfg, step));
        opt.zero_grad();
        nn::ForwardContext ctx{true, model.cfg.dropout, &rng};
        auto loss = clm_loss(model, batch, ctx);
        loss.backward();
        opt.step();
        res.loss.push_back(loss.item());
        if (log && cfg.log_every && (step + 1) % cfg.log_every == 0) log(step + 1, loss.item());
    }
    return res;
}

}  // namespace nipred::gpt
