#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nipred/nn/layers.hpp"

namespace nipred::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 0.0;  // global gradient-norm clip, 0 = off
};

struct AdamState {
    std::vector<double> m, v;
};

/// One bias-corrected Adam update of `params` in place. `t` is the 1-based step.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, long t, double lr,
                      double beta1, double beta2, double eps) {
    require(grads.size() == params.size(), ErrorCode::ShapeMismatch, "adam grads/params");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    require(state.m.size() == params.size() && state.v.size() == params.size(), ErrorCode::ShapeMismatch, "adam state");
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

class Adam {
public:
    Adam(ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg), state_(params_.size()) {}

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    void step() {
        ++t_;
        double scale_by = 1.0;
        if (cfg_.clip_norm > 0) {
            double sq = 0;
            for (auto& p : params_)
                for (double g : p.tensor.grad()) sq += g * g;
            const double norm = std::sqrt(sq);
            if (norm > cfg_.clip_norm) scale_by = cfg_.clip_norm / norm;
        }
        std::vector<double> scaled;
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = params_[k].tensor;
            std::span<const double> g = p.grad();
            if (scale_by != 1.0) {
                scaled.assign(g.begin(), g.end());
                for (auto& x : scaled) x *= scale_by;
                g = scaled;
            }
            adam_step(p.value(), g, state_[k], t_, cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps);
        }
    }

    void set_lr(double lr) { cfg_.lr = lr; }
    long steps() const { return t_; }
    void set_steps(long t) { t_ = t; }
    std::vector<AdamState>& state() { return state_; }
    const std::vector<AdamState>& state() const { return state_; }
    const ParamList& params() const { return params_; }

private:
    ParamList params_;
    AdamConfig cfg_;
    std::vector<AdamState> state_;
    long t_ = 0;
};

}  // namespace nipred::nn
