#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "nipred/core/error.hpp"

namespace nipred::metrics {

/// Row = true class, column = predicted class.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}
    std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }
    void add(std::size_t t, std::size_t p) { ++counts[t * classes + p]; }
    std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
    std::uint64_t trace() const {
        std::uint64_t s = 0;
        for (std::size_t k = 0; k < classes; ++k) s += at(k, k);
        return s;
    }
    std::uint64_t row_sum(std::size_t t) const {
        std::uint64_t s = 0;
        for (std::size_t p = 0; p < classes; ++p) s += at(t, p);
        return s;
    }
    std::uint64_t col_sum(std::size_t p) const {
        std::uint64_t s = 0;
        for (std::size_t t = 0; t < classes; ++t) s += at(t, p);
        return s;
    }
};

struct ClassStats {
    std::string name;
    double precision = 0, recall = 0, f1 = 0;
    std::uint64_t support = 0;
    bool precision_undefined = false;  // nothing was predicted as this class
    bool recall_undefined = false;     // no sample of this class
};

struct Averages {
    double precision = 0, recall = 0, f1 = 0;
};

struct RocPoint {
    double threshold, fpr, tpr;
};

struct EvalReport {
    std::vector<std::string> class_names;
    ConfusionMatrix confusion;
    std::vector<ClassStats> per_class;
    double accuracy = 0;
    Averages macro, weighted;
    std::size_t positive_class = 1;
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;  // positive class against the rest
    std::vector<RocPoint> roc;
    std::optional<double> auc;
};

/// Precision, recall and F1 of `k` treated one-vs-rest.
inline ClassStats one_vs_rest(const ConfusionMatrix& cm, std::size_t k) {
    ClassStats s;
    const auto tp = cm.at(k, k);
    const auto predicted = cm.col_sum(k);
    s.support = cm.row_sum(k);
    s.precision_undefined = predicted == 0;
    s.recall_undefined = s.support == 0;
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = s.support ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

inline EvalReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                                  std::vector<std::string> class_names, std::size_t positive_class = 1) {
    require(truth.size() == predicted.size(), ErrorCode::LengthMismatch,
            std::to_string(truth.size()) + " true labels vs " + std::to_string(predicted.size()) + " predictions");
    const auto C = class_names.size();
    require(C >= 2, ErrorCode::InvalidArgument, "need at least two classes");
    require(positive_class < C, ErrorCode::LabelOutOfRange, "positive class outside the class map");
    EvalReport r;
    r.class_names = std::move(class_names);
    r.confusion = ConfusionMatrix(C);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        require(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < C && predicted[i] >= 0 &&
                    static_cast<std::size_t>(predicted[i]) < C,
                ErrorCode::LabelOutOfRange, "label outside the class map at index " + std::to_string(i));
        r.confusion.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
    }
    const auto n = r.confusion.total();
    r.accuracy = n ? static_cast<double>(r.confusion.trace()) / static_cast<double>(n) : 0.0;
    for (std::size_t k = 0; k < C; ++k) {
        auto s = one_vs_rest(r.confusion, k);
        s.name = r.class_names[k];
        r.macro.precision += s.precision / static_cast<double>(C);
        r.macro.recall += s.recall / static_cast<double>(C);
        r.macro.f1 += s.f1 / static_cast<double>(C);
        if (n) {
            const double w = static_cast<double>(s.support) / static_cast<double>(n);
            r.weighted.precision += w * s.precision;
            r.weighted.recall += w * s.recall;
            r.weighted.f1 += w * s.f1;
        }
        r.per_class.push_back(std::move(s));
    }
    r.positive_class = positive_class;
    const auto P = positive_class;
    r.tp = r.confusion.at(P, P);
    r.fn = r.confusion.row_sum(P) - r.tp;
    r.fp = r.confusion.col_sum(P) - r.tp;
    r.tn = n - r.tp - r.fn - r.fp;
    return r;
}

struct RocCurve {
    std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
    double auc = 0;
};

/// Thresholds sweep the distinct scores from high to low. The trapezoid area is
/// accumulated as an integer (twice the area in units of 1/(P*N)), so it equals the
/// pair-counting statistic exactly.
inline RocCurve roc_curve(std::span<const int> positive, std::span<const double> scores) {
    require(positive.size() == scores.size(), ErrorCode::LengthMismatch, "labels and scores differ in length");
    std::uint64_t P = 0, N = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        require(std::isfinite(scores[i]), ErrorCode::InvalidArgument, "non-finite score");
        (positive[i] ? P : N) += 1;
    }
    if (P == 0 || N == 0) fail(ErrorCode::SingleClass, "roc needs both classes present");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    RocCurve c;
    c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::uint64_t tp = 0, fp = 0, twice_area = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        const auto tp0 = tp, fp0 = fp;
        for (; i < order.size() && scores[order[i]] == s; ++i) (positive[order[i]] ? tp : fp) += 1;
        twice_area += (fp - fp0) * (tp + tp0);
        c.points.push_back({s, static_cast<double>(fp) / static_cast<double>(N), static_cast<double>(tp) / static_cast<double>(P)});
    }
    c.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
    return c;
}

inline void attach_roc(EvalReport& r, const RocCurve& c) {
    r.roc = c.points;
    r.auc = c.auc;
}

}  // namespace nipred::metrics
