#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nipred/core/error.hpp"
#include "nipred/core/labels.hpp"

namespace nipred::features {

/// Row-major numeric table. One row per packet; flow_index and labels ride along.
struct FeatureMatrix {
    std::vector<std::string> column_names;
    std::size_t rows = 0;
    std::vector<double> data;
    std::vector<std::uint32_t> flow_index;
    std::vector<Label> labels;

    std::size_t cols() const { return column_names.size(); }
    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows);
        for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
        return out;
    }

    /// Rows in the given order.
    FeatureMatrix take_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix out;
        out.column_names = column_names;
        out.rows = idx.size();
        out.data.reserve(idx.size() * cols());
        for (auto i : idx) {
            auto r = row(i);
            out.data.insert(out.data.end(), r.begin(), r.end());
            if (!flow_index.empty()) out.flow_index.push_back(flow_index[i]);
            if (!labels.empty()) out.labels.push_back(labels[i]);
        }
        return out;
    }

    FeatureMatrix take_columns(std::span<const std::size_t> idx) const {
        FeatureMatrix out;
        out.rows = rows;
        out.flow_index = flow_index;
        out.labels = labels;
        for (auto c : idx) out.column_names.push_back(column_names[c]);
        out.data.reserve(rows * idx.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (auto c : idx) out.data.push_back(at(r, c));
        return out;
    }

    void validate() const {
        require(data.size() == rows * cols(), ErrorCode::ShapeMismatch, "matrix data size");
        require(flow_index.empty() || flow_index.size() == rows, ErrorCode::ShapeMismatch, "flow_index size");
        require(labels.empty() || labels.size() == rows, ErrorCode::ShapeMismatch, "labels size");
    }
};

}  // namespace nipred::features
