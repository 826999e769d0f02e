#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "nipred/core/format.hpp"
#include "nipred/core/labels.hpp"
#include "nipred/ingest/manifest.hpp"

namespace nipred::ingest {

inline constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

inline bool is_none(double v) { return std::isnan(v); }

/// One parsed packet. Header-derived values only, payload bytes are never kept.
/// Categorical columns hold an index into their category list.
struct PacketRecord {
    double timestamp = 0.0;
    std::uint32_t flow_index = 0;
    Label label = Label::Unlabeled;
    std::array<double, kFeatureCount> values;

    PacketRecord() { values.fill(kNone); }

    double operator[](Feature f) const { return values[f]; }
    double& operator[](Feature f) { return values[f]; }

    bool operator==(const PacketRecord& o) const {
        if (timestamp != o.timestamp || flow_index != o.flow_index || label != o.label) return false;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const bool na = is_none(values[i]), nb = is_none(o.values[i]);
            if (na != nb || (!na && values[i] != o.values[i])) return false;
        }
        return true;
    }
};

/// Text form of one cell: category name, number, or "none".
inline std::string render_cell(std::size_t feature, double v) {
    if (is_none(v)) return "none";
    auto cats = categories_of(feature);
    if (!cats.empty()) {
        const auto idx = static_cast<std::size_t>(v);
        return idx < cats.size() ? std::string(cats[idx]) : "other";
    }
    return format_number(v);
}

}  // namespace nipred::ingest
