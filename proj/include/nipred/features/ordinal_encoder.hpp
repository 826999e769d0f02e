#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nipred/features/matrix.hpp"
#include "nipred/ingest/record.hpp"

namespace nipred::features {

inline constexpr double kUnseenCategory = -1.0;

/// Per-column category -> integer maps, ids assigned in first-seen order.
class OrdinalEncoder {
public:
    void fit_column(const std::string& column, std::span<const std::string> values) {
        auto& cats = maps_[column];
        for (const auto& v : values)
            if (std::find(cats.begin(), cats.end(), v) == cats.end()) cats.push_back(v);
    }

    bool has_column(const std::string& column) const { return maps_.count(column) != 0; }

    /// Id for a category, or -1 for one not seen while fitting.
    double encode(const std::string& column, const std::string& value) const {
        auto it = maps_.find(column);
        if (it == maps_.end()) return kUnseenCategory;
        const auto& cats = it->second;
        auto pos = std::find(cats.begin(), cats.end(), value);
        return pos == cats.end() ? kUnseenCategory : static_cast<double>(pos - cats.begin());
    }

    std::vector<double> encode_column(const std::string& column, std::span<const std::string> values,
                                      std::size_t* unseen = nullptr) const {
        std::vector<double> out;
        out.reserve(values.size());
        for (const auto& v : values) {
            out.push_back(encode(column, v));
            if (out.back() == kUnseenCategory && unseen) ++*unseen;
        }
        return out;
    }

    std::string decode(const std::string& column, double id) const {
        const auto& cats = maps_.at(column);
        require(id >= 0 && id < static_cast<double>(cats.size()), ErrorCode::UnknownId, "no category for id");
        return cats[static_cast<std::size_t>(id)];
    }

    const std::map<std::string, std::vector<std::string>>& maps() const { return maps_; }
    std::map<std::string, std::vector<std::string>>& maps() { return maps_; }

private:
    std::map<std::string, std::vector<std::string>> maps_;
};

/// Fits the categorical manifest columns on training records.
inline OrdinalEncoder fit_encoder(std::span<const ingest::PacketRecord> train) {
    OrdinalEncoder enc;
    for (std::size_t f = 0; f < ingest::kFeatureCount; ++f) {
        if (ingest::kManifest[f].kind != ingest::Kind::Categorical) continue;
        std::vector<std::string> col;
        col.reserve(train.size());
        for (const auto& r : train) col.push_back(ingest::render_cell(f, r.values[f]));
        enc.fit_column(std::string(ingest::kManifest[f].name), col);
    }
    return enc;
}

/// Numeric value of one raw cell. Missing numeric values become 0.
inline double encode_value(const OrdinalEncoder& enc, std::size_t feature, double raw, std::size_t* unseen) {
    if (ingest::kManifest[feature].kind == ingest::Kind::Categorical) {
        const double id = enc.encode(std::string(ingest::kManifest[feature].name), ingest::render_cell(feature, raw));
        if (id == kUnseenCategory && unseen) ++*unseen;
        return id;
    }
    return ingest::is_none(raw) ? 0.0 : raw;
}

/// All 71 manifest columns as numbers.
inline FeatureMatrix encode_ordinal(std::span<const ingest::PacketRecord> records, const OrdinalEncoder& enc,
                                    std::size_t* unseen = nullptr) {
    FeatureMatrix m;
    for (const auto& f : ingest::kManifest) m.column_names.emplace_back(f.name);
    m.rows = records.size();
    m.data.reserve(m.rows * ingest::kFeatureCount);
    for (const auto& r : records) {
        for (std::size_t f = 0; f < ingest::kFeatureCount; ++f) m.data.push_back(encode_value(enc, f, r.values[f], unseen));
        m.flow_index.push_back(r.flow_index);
        m.labels.push_back(r.label);
    }
    return m;
}

}  // namespace nipred::features
