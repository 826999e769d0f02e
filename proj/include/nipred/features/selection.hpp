#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nipred/features/matrix.hpp"
#include "nipred/features/minmax.hpp"

namespace nipred::features {

struct DroppedColumn {
    std::string column;
    std::string reason;   // "variance" or "correlation"
    double value = 0.0;   // variance, or |r| against `partner`
    std::string partner;
};

struct SelectionResult {
    std::vector<std::size_t> kept;  // indices into the input matrix
    std::vector<std::string> kept_names;
    std::vector<DroppedColumn> dropped;
    double variance_cutoff = 0.0;
};

inline double population_variance(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(x.size());
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

/// Variance filter on min-max pre-scaled copies, then a greedy Pearson filter that
/// keeps the earlier column of any pair with |r| > corr_threshold.
/// var_threshold is a fraction of 0.25, the largest variance a [0,1] variable can have.
inline SelectionResult select_columns(const FeatureMatrix& m, double var_threshold, double corr_threshold) {
    require(var_threshold > 0 && var_threshold < 1, ErrorCode::InvalidArgument, "var_threshold outside (0,1)");
    require(corr_threshold > 0 && corr_threshold < 1, ErrorCode::InvalidArgument, "corr_threshold outside (0,1)");
    SelectionResult res;
    res.variance_cutoff = var_threshold * 0.25;

    const auto scaler = MinMaxScaler::fit(m);
    std::vector<std::vector<double>> scaled(m.cols());
    std::vector<std::size_t> survivors;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        auto col = m.column(j);
        for (auto& v : col) v = scaler.scale(j, v);
        const double var = population_variance(col);
        if (var < res.variance_cutoff) {
            res.dropped.push_back({m.column_names[j], "variance", var, ""});
        } else {
            survivors.push_back(j);
            scaled[j] = std::move(col);
        }
    }
    for (auto j : survivors) {
        bool keep = true;
        for (auto k : res.kept) {
            const double r = std::fabs(pearson(scaled[k], scaled[j]));
            if (r > corr_threshold) {
                res.dropped.push_back({m.column_names[j], "correlation", r, m.column_names[k]});
                keep = false;
                break;
            }
        }
        if (keep) {
            res.kept.push_back(j);
            res.kept_names.push_back(m.column_names[j]);
        }
    }
    if (res.kept.empty()) fail(ErrorCode::EmptyResult, "feature selection dropped every column");
    return res;
}

inline FeatureMatrix select_features(const FeatureMatrix& m, double var_threshold, double corr_threshold,
                                     SelectionResult* audit = nullptr) {
    auto res = select_columns(m, var_threshold, corr_threshold);
    auto out = m.take_columns(res.kept);
    if (audit) *audit = std::move(res);
    return out;
}

}  // namespace nipred::features
