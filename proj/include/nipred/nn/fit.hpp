#pragma once

#include <functional>
#include <vector>

#include "json.hpp"
#include "nipred/nn/early_stopping.hpp"
#include "nipred/nn/layers.hpp"

namespace nipred::nn {

struct FitHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t best_epoch = 0;
    bool stopped_early = false;

    std::size_t epochs() const { return val_loss.size(); }
};

inline nlohmann::json to_json(const FitHistory& h) {
    return {{"train_loss", h.train_loss}, {"val_loss", h.val_loss}, {"best_epoch", h.best_epoch},
            {"stopped_early", h.stopped_early}};
}

/// Copies of parameter values, for restoring the best epoch.
inline std::vector<std::vector<double>> copy_values(const ParamList& params) {
    std::vector<std::vector<double>> out;
    for (const auto& p : params) out.push_back(p.tensor.node().value);
    return out;
}

inline void assign_values(const ParamList& params, const std::vector<std::vector<double>>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.node().value = values[i];
}

/// Runs epochs until `max_epochs` or until validation loss has not improved for
/// `patience` epochs, then puts the best epoch's weights back into `params`.
inline FitHistory fit_with_early_stopping(std::size_t max_epochs, std::size_t patience, double min_delta,
                                          const std::function<double(std::size_t)>& train_epoch,
                                          const std::function<double()>& validate, const ParamList& params) {
    EarlyStopping es(patience, min_delta);
    FitHistory h;
    auto best = copy_values(params);
    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
        h.train_loss.push_back(train_epoch(epoch));
        const double v = validate();
        h.val_loss.push_back(v);
        if (es.update(v)) best = copy_values(params);
        if (es.should_stop()) {
            h.stopped_early = epoch + 1 < max_epochs;
            break;
        }
    }
    h.best_epoch = es.best_epoch();
    assign_values(params, best);
    return h;
}

}  // namespace nipred::nn
