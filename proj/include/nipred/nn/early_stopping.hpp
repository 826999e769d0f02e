#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace nipred::nn {

/// Tracks validation loss per epoch. `should_stop()` turns true once `patience`
/// consecutive epochs failed to improve on the best loss so far.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience, double min_delta = 0.0) : patience_(patience), min_delta_(min_delta) {}

    /// Returns true when this epoch is the new best.
    bool update(double val_loss) {
        history_.push_back(val_loss);
        if (val_loss < best_ - min_delta_) {
            best_ = val_loss;
            best_epoch_ = history_.size() - 1;
            bad_epochs_ = 0;
            return true;
        }
        ++bad_epochs_;
        return false;
    }

    /// Patience 0 stops at the first non-improving epoch, same as patience 1.
    bool should_stop() const { return bad_epochs_ >= std::max<std::size_t>(patience_, 1); }

    double best_loss() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }
    std::size_t epochs() const { return history_.size(); }
    const std::vector<double>& history() const { return history_; }

private:
    std::size_t patience_;
    double min_delta_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t bad_epochs_ = 0;
    std::vector<double> history_;
};

}  // namespace nipred::nn
