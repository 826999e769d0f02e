#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/core/format.hpp"
#include "nipred/features/minmax.hpp"
#include "nipred/features/ordinal_encoder.hpp"
#include "nipred/features/selection.hpp"

namespace nipred::features {

/// Everything fitted on the training split: encoder maps, selected columns and the
/// scaler over them. Persisted as a JSON sidecar so transforms replay exactly.
struct FeatureParams {
    double var_threshold = 0.25;
    double corr_threshold = 0.9;
    OrdinalEncoder encoder;
    std::vector<std::string> selected;          // manifest names, manifest order
    std::vector<std::size_t> selected_index;    // manifest indices
    std::vector<DroppedColumn> dropped;
    MinMaxScaler scaler;                        // over selected columns

    std::size_t width() const { return selected.size(); }
};

inline FeatureParams fit_features(std::span<const ingest::PacketRecord> train, double var_threshold = 0.25,
                                  double corr_threshold = 0.9) {
    FeatureParams p;
    p.var_threshold = var_threshold;
    p.corr_threshold = corr_threshold;
    p.encoder = fit_encoder(train);
    const auto encoded = encode_ordinal(train, p.encoder);
    auto sel = select_columns(encoded, var_threshold, corr_threshold);
    p.selected = sel.kept_names;
    p.selected_index = sel.kept;
    p.dropped = sel.dropped;
    p.scaler = MinMaxScaler::fit(encoded.take_columns(sel.kept));
    return p;
}

/// Encoded, selected and scaled rows.
inline FeatureMatrix transform_records(const FeatureParams& p, std::span<const ingest::PacketRecord> records,
                                       std::size_t* unseen = nullptr) {
    FeatureMatrix m;
    m.column_names = p.selected;
    m.rows = records.size();
    m.data.reserve(m.rows * p.width());
    for (const auto& r : records) {
        for (std::size_t j = 0; j < p.width(); ++j) {
            const auto f = p.selected_index[j];
            m.data.push_back(p.scaler.scale(j, encode_value(p.encoder, f, r.values[f], unseen)));
        }
        m.flow_index.push_back(r.flow_index);
        m.labels.push_back(r.label);
    }
    return m;
}

/// Scaled feature row from the textual cells of the selected columns, as produced by
/// a packet line. nullopt when a numeric cell does not parse.
inline std::optional<std::vector<double>> transform_cells(const FeatureParams& p, std::span<const std::string> cells,
                                                          std::size_t* unseen = nullptr) {
    if (cells.size() != p.width()) return std::nullopt;
    std::vector<double> row(p.width());
    for (std::size_t j = 0; j < p.width(); ++j) {
        const auto f = p.selected_index[j];
        double raw;
        if (ingest::kManifest[f].kind == ingest::Kind::Categorical) {
            raw = p.encoder.encode(p.selected[j], cells[j]);
            if (raw == kUnseenCategory && unseen) ++*unseen;
        } else if (cells[j] == "none") {
            raw = 0.0;
        } else {
            auto v = parse_number(cells[j]);
            if (!v) return std::nullopt;
            raw = *v;
        }
        row[j] = p.scaler.scale(j, raw);
    }
    return row;
}

inline nlohmann::json to_json(const FeatureParams& p) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["var_threshold"] = p.var_threshold;
    j["variance_cutoff"] = p.var_threshold * 0.25;
    j["corr_threshold"] = p.corr_threshold;
    j["encoder_maps"] = p.encoder.maps();
    j["selected"] = p.selected;
    auto& dropped = j["dropped"] = nlohmann::json::array();
    for (const auto& d : p.dropped)
        dropped.push_back({{"column", d.column}, {"reason", d.reason}, {"value", d.value}, {"partner", d.partner}});
    auto& sc = j["scaler"] = nlohmann::json::array();
    for (std::size_t c = 0; c < p.width(); ++c)
        sc.push_back({{"column", p.selected[c]},
                      {"min", p.scaler.min[c]},
                      {"max", p.scaler.max[c]},
                      {"degenerate", static_cast<bool>(p.scaler.degenerate[c])}});
    return j;
}

inline FeatureParams feature_params_from_json(const nlohmann::json& j) {
    FeatureParams p;
    require(j.value("schema_version", 0) == 1, ErrorCode::ConfigError, "unsupported feature sidecar version");
    p.var_threshold = j.at("var_threshold").get<double>();
    p.corr_threshold = j.at("corr_threshold").get<double>();
    p.encoder.maps() = j.at("encoder_maps").get<std::map<std::string, std::vector<std::string>>>();
    p.selected = j.at("selected").get<std::vector<std::string>>();
    for (const auto& name : p.selected) {
        auto idx = ingest::feature_index(name);
        require(idx.has_value(), ErrorCode::ConfigError, "unknown column " + name);
        p.selected_index.push_back(*idx);
    }
    for (const auto& d : j.at("dropped"))
        p.dropped.push_back({d.at("column"), d.at("reason"), d.at("value"), d.at("partner")});
    for (const auto& s : j.at("scaler")) {
        p.scaler.min.push_back(s.at("min").get<double>());
        p.scaler.max.push_back(s.at("max").get<double>());
        p.scaler.degenerate.push_back(s.at("degenerate").get<bool>());
    }
    require(p.scaler.min.size() == p.selected.size(), ErrorCode::ConfigError, "scaler/selection width mismatch");
    return p;
}

inline void save_feature_params(const std::string& path, const FeatureParams& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    out << to_json(p).dump(2) << '\n';
}

inline FeatureParams load_feature_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path);
    return feature_params_from_json(nlohmann::json::parse(in));
}

}  // namespace nipred::features
