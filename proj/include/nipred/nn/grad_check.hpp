#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "nipred/nn/layers.hpp"

namespace nipred::nn {

/// Max over all coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|), with
/// g_fd from central differences of step h.
inline double grad_check(const std::function<Tensor()>& f, ParamList params, double h = 1e-5) {
    for (auto& p : params) p.tensor.zero_grad();
    f().backward();
    double worst = 0.0;
    for (auto& p : params) {
        auto vals = p.tensor.value();
        const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            double plus, minus;
            {
                NoGradGuard guard;
                vals[i] = orig + h;
                plus = f().item();
                vals[i] = orig - h;
                minus = f().item();
            }
            vals[i] = orig;
            const double numeric = (plus - minus) / (2 * h);
            const double denom = std::max(1e-8, std::fabs(analytic[i]) + std::fabs(numeric));
            worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace nipred::nn
