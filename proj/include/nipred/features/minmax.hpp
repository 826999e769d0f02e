#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "nipred/features/matrix.hpp"

namespace nipred::features {

struct MinMaxScaler {
    std::vector<double> min;
    std::vector<double> max;
    std::vector<bool> degenerate;  // max == min; such columns scale to 0

    static MinMaxScaler fit(const FeatureMatrix& train) {
        MinMaxScaler s;
        const auto c = train.cols();
        s.min.assign(c, std::numeric_limits<double>::infinity());
        s.max.assign(c, -std::numeric_limits<double>::infinity());
        for (std::size_t r = 0; r < train.rows; ++r)
            for (std::size_t j = 0; j < c; ++j) {
                s.min[j] = std::min(s.min[j], train.at(r, j));
                s.max[j] = std::max(s.max[j], train.at(r, j));
            }
        s.degenerate.assign(c, false);
        for (std::size_t j = 0; j < c; ++j) {
            if (train.rows == 0) s.min[j] = s.max[j] = 0.0;
            s.degenerate[j] = !(s.max[j] > s.min[j]);
        }
        return s;
    }

    /// (x - min) / (max - min), clamped to [0, 1].
    double scale(std::size_t j, double x) const {
        if (degenerate[j]) return 0.0;
        const double v = (x - min[j]) / (max[j] - min[j]);
        return std::clamp(v, 0.0, 1.0);
    }

    void transform_row(std::span<double> row) const {
        require(row.size() == min.size(), ErrorCode::ShapeMismatch, "scaler width");
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = scale(j, row[j]);
    }

    FeatureMatrix transform(const FeatureMatrix& m) const {
        require(m.cols() == min.size(), ErrorCode::ShapeMismatch, "scaler fitted on a different width");
        FeatureMatrix out = m;
        for (std::size_t r = 0; r < out.rows; ++r)
            transform_row({out.data.data() + r * out.cols(), out.cols()});
        return out;
    }
};

inline FeatureMatrix minmax_scale(const FeatureMatrix& m, const MinMaxScaler& scaler) { return scaler.transform(m); }

}  // namespace nipred::features
