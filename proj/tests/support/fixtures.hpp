#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "nipred/core/rng.hpp"
#include "nipred/features/matrix.hpp"

namespace fixture {

using nipred::Rng;
using nipred::features::FeatureMatrix;

/// 71 columns: 26 independent random columns, 25 constants and 20 exact copies.
inline FeatureMatrix engineered_71(Rng& rng, std::size_t rows) {
    FeatureMatrix m;
    m.rows = rows;
    std::vector<int> kind(71);  // 0 informative, 1 constant, 2 duplicate
    for (int j = 0; j < 71; ++j) kind[static_cast<std::size_t>(j)] = j < 26 ? 0 : (j < 51 ? 1 : 2);
    nipred::shuffle(std::span<int>(kind), rng);
    // a duplicate must come after its source column
    std::swap(kind[0], *std::find(kind.begin(), kind.end(), 0));
    std::vector<std::size_t> informative;
    std::vector<std::size_t> source(71, 0);
    for (std::size_t j = 0; j < 71; ++j) {
        if (kind[j] == 0) informative.push_back(j);
        if (kind[j] == 2) source[j] = informative[nipred::uniform_index(rng, informative.size())];
        m.column_names.push_back("f" + std::to_string(j));
    }
    m.data.assign(rows * 71, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < 71; ++j) {
            if (kind[j] == 0) m.at(r, j) = nipred::uniform_index(rng, 2) ? 10.0 * static_cast<double>(j + 1) : 0.0;
            if (kind[j] == 1) m.at(r, j) = 3.0;
            if (kind[j] == 2) m.at(r, j) = m.at(r, source[j]) * 2.0 + 1.0;
        }
    return m;
}

}  // namespace fixture
