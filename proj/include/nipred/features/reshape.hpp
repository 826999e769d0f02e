#pragma once

#include <map>
#include <vector>

#include "nipred/features/matrix.hpp"

namespace nipred::features {

/// Dense (num_windows, window, num_features) array.
struct Windows {
    std::size_t count = 0;
    std::size_t window = 0;
    std::size_t features = 0;
    std::vector<double> data;
    std::vector<Label> labels;              // label of the last packet in each window
    std::vector<std::uint32_t> flow_index;
    std::vector<bool> padded;

    std::span<const double> sample(std::size_t i) const { return {data.data() + i * window * features, window * features}; }
    double at(std::size_t i, std::size_t t, std::size_t f) const { return data[(i * window + t) * features + f]; }
};

struct ReshapeOptions {
    /// Also emit the front-padded prefix windows ending at packets 1..window-1 of
    /// each flow, so every packet ends exactly one window.
    bool prefix_windows = false;
};

/// Sliding windows inside each flow, never across flow boundaries. Flows keep their
/// first-seen order and rows keep matrix order within a flow. A flow shorter than
/// the window gives one front-zero-padded window.
inline Windows reshape_sequences(const FeatureMatrix& m, std::size_t window, ReshapeOptions opts = {}) {
    require(window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
    require(m.flow_index.size() == m.rows, ErrorCode::ShapeMismatch, "reshape needs flow_index");
    std::vector<std::uint32_t> order;
    std::map<std::uint32_t, std::vector<std::size_t>> by_flow;
    for (std::size_t r = 0; r < m.rows; ++r) {
        auto [it, fresh] = by_flow.try_emplace(m.flow_index[r]);
        if (fresh) order.push_back(m.flow_index[r]);
        it->second.push_back(r);
    }
    Windows w;
    w.window = window;
    w.features = m.cols();
    auto emit = [&](const std::vector<std::size_t>& rows, std::size_t end, std::uint32_t flow) {
        // rows[end - window + 1 .. end], zero-filled where the index is negative
        const auto first = static_cast<long>(end) - static_cast<long>(window) + 1;
        for (long t = first; t <= static_cast<long>(end); ++t) {
            if (t < 0) {
                w.data.insert(w.data.end(), w.features, 0.0);
            } else {
                auto row = m.row(rows[static_cast<std::size_t>(t)]);
                w.data.insert(w.data.end(), row.begin(), row.end());
            }
        }
        w.labels.push_back(m.labels.empty() ? Label::Unlabeled : m.labels[rows[end]]);
        w.flow_index.push_back(flow);
        w.padded.push_back(first < 0);
        ++w.count;
    };
    for (auto flow : order) {
        const auto& rows = by_flow[flow];
        if (rows.size() < window && !opts.prefix_windows) {
            emit(rows, rows.size() - 1, flow);
            continue;
        }
        const std::size_t start = opts.prefix_windows ? 0 : window - 1;
        for (std::size_t end = start; end < rows.size(); ++end) emit(rows, end, flow);
    }
    return w;
}

}  // namespace nipred::features
