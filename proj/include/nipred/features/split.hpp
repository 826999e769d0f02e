#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "nipred/core/rng.hpp"
#include "nipred/features/matrix.hpp"

namespace nipred::features {

struct SplitSpec {
    double train_frac = 0.8;
    double val_frac = 0.1;
    double test_frac = 0.1;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;  // ascending
};

/// Stratified, seeded partition of item indices. Every class contributes at least
/// one item to each part.
inline SplitIndices split_indices(std::span<const Label> labels, const SplitSpec& spec) {
    require(spec.train_frac > 0 && spec.val_frac > 0 && spec.test_frac > 0, ErrorCode::InvalidArgument,
            "split fractions must be positive");
    require(std::fabs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) < 1e-9, ErrorCode::InvalidArgument,
            "split fractions must sum to 1");
    std::map<Label, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Rng rng(spec.seed);
    SplitIndices out;
    for (auto& [label, idx] : by_class) {
        const auto n = idx.size();
        if (n < 3)
            fail(ErrorCode::ClassTooSmall,
                 "class " + std::string(label_name(label)) + " has " + std::to_string(n) + " rows");
        shuffle(std::span<std::size_t>(idx), rng);
        auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * spec.val_frac)));
        auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * spec.test_frac)));
        while (n_val + n_test > n - 1) {
            if (n_val >= n_test && n_val > 1) --n_val;
            else --n_test;
        }
        const auto n_train = n - n_val - n_test;
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<long>(n_train));
        out.val.insert(out.val.end(), idx.begin() + static_cast<long>(n_train),
                       idx.begin() + static_cast<long>(n_train + n_val));
        out.test.insert(out.test.end(), idx.begin() + static_cast<long>(n_train + n_val), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

struct Split {
    FeatureMatrix train, val, test;
};

inline Split split(const FeatureMatrix& m, const SplitSpec& spec) {
    require(m.labels.size() == m.rows, ErrorCode::ShapeMismatch, "split needs labels");
    const auto idx = split_indices(m.labels, spec);
    return {m.take_rows(idx.train), m.take_rows(idx.val), m.take_rows(idx.test)};
}

}  // namespace nipred::features
