#pragma once

#include <filesystem>
#include <set>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/features/pipeline.hpp"
#include "nipred/features/reshape.hpp"
#include "nipred/features/split.hpp"
#include "nipred/ingest/csv.hpp"
#include "nipred/ingest/pcap_reader.hpp"
#include "nipred/pipeline/config.hpp"
#include "nipred/synth/grammar.hpp"
#include "nipred/text/packet_line.hpp"

namespace nipred::pipeline {

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Write to a sibling temp file, then rename over the target.
inline void write_text(const std::filesystem::path& p, const std::string& body) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    const auto tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) fail(ErrorCode::IoFailure, "cannot write " + tmp);
        out << body;
        if (!out) fail(ErrorCode::IoFailure, "write failed for " + tmp);
    }
    std::filesystem::rename(tmp, p);
}

inline void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) { write_text(p, j.dump(2) + "\n"); }

/// Rows grouped per flow in capture order. Flow order is first appearance.
struct FlowIndex {
    std::vector<std::uint32_t> ids;                    // flow ids in first-seen order
    std::map<std::uint32_t, std::vector<std::size_t>> rows;

    explicit FlowIndex(const std::vector<ingest::PacketRecord>& records = {}) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto [it, fresh] = rows.try_emplace(records[i].flow_index);
            if (fresh) ids.push_back(records[i].flow_index);
            it->second.push_back(i);
        }
    }
};

/// Traffic from an input spec. Synthetic input also yields its next-packet oracle.
struct Traffic {
    std::vector<ingest::PacketRecord> records;
    std::optional<synth::SynthCorpus> synthetic;
};

inline Traffic load_traffic(const InputSpec& in, const PipelineConfig& cfg) {
    Traffic t;
    if (in.source == "synth") {
        t.synthetic = synth::generate(in.grammar, in.n_flows);
        t.records = t.synthetic->records;
    } else if (in.source == "csv") {
        t.records = ingest::read_records_csv(cfg.data_path(in.path).string());
    } else {
        const auto label = in.label.empty() ? Label::Unlabeled : *parse_label(in.label);
        t.records = ingest::parse_pcap(cfg.data_path(in.path).string(), label).records;
    }
    if (t.records.empty()) fail(ErrorCode::EmptyResult, "input holds no packets");
    return t;
}

/// Fingerprint of an input: its settings, plus the file bytes when it names one.
inline std::string input_fingerprint(const InputSpec& in, const PipelineConfig& cfg) {
    auto j = detail::input_json(in);
    if (in.source != "synth") {
        const auto p = cfg.data_path(in.path);
        j["file_hash"] = std::filesystem::exists(p) ? hash_file(p.string()) : "missing";
    }
    return hex64(fnv1a(j.dump()));
}

/// Flow ids per split part.
struct FlowSplit {
    std::vector<std::uint32_t> train, val, test;
};

inline nlohmann::ordered_json to_json(const FlowSplit& s) {
    nlohmann::ordered_json j;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    return j;
}

inline FlowSplit flow_split_from_json(const nlohmann::json& j) {
    return {j.at("train").get<std::vector<std::uint32_t>>(), j.at("val").get<std::vector<std::uint32_t>>(),
            j.at("test").get<std::vector<std::uint32_t>>()};
}

/// Stratified by each flow's first-packet label, so no flow straddles two parts.
inline FlowSplit split_flows(const std::vector<ingest::PacketRecord>& records, const FlowIndex& fi,
                             const features::SplitSpec& spec) {
    std::vector<Label> labels;
    for (auto id : fi.ids) labels.push_back(records[fi.rows.at(id).front()].label);
    auto idx = features::split_indices(labels, spec);
    FlowSplit s;
    for (auto i : idx.train) s.train.push_back(fi.ids[i]);
    for (auto i : idx.val) s.val.push_back(fi.ids[i]);
    for (auto i : idx.test) s.test.push_back(fi.ids[i]);
    return s;
}

inline std::vector<ingest::PacketRecord> take_flows(const std::vector<ingest::PacketRecord>& records, const FlowIndex& fi,
                                                    const std::vector<std::uint32_t>& flows) {
    std::vector<ingest::PacketRecord> out;
    for (auto f : flows)
        for (auto r : fi.rows.at(f)) out.push_back(records[r]);
    return out;
}

inline std::vector<std::vector<std::string>> flow_texts(const std::vector<ingest::PacketRecord>& records,
                                                        const FlowIndex& fi, const std::vector<std::uint32_t>& flows,
                                                        std::span<const std::size_t> columns) {
    std::vector<std::vector<std::string>> out;
    for (auto f : flows) {
        std::vector<std::string> lines;
        for (auto r : fi.rows.at(f)) lines.push_back(text::render_packet_line(records[r], columns));
        out.push_back(std::move(lines));
    }
    return out;
}

inline std::string corpus_text(const std::vector<std::vector<std::string>>& flows) {
    std::string out;
    for (const auto& lines : flows) {
        if (!out.empty()) out += '\n';
        out += text::kFlowBeginText;
        out += '\n';
        for (const auto& l : lines) out += l + '\n';
        out += text::kFlowEndText;
    }
    return out;
}

/// Train/val/test leakage check: parts are disjoint and the stored feature params are
/// exactly what fitting on the training part alone gives.
inline void assert_no_leakage(const FlowSplit& s, const std::vector<ingest::PacketRecord>& records, const FlowIndex& fi,
                              const features::FeatureParams& params) {
    std::set<std::uint32_t> seen;
    for (const auto* part : {&s.train, &s.val, &s.test})
        for (auto f : *part)
            if (!seen.insert(f).second) fail(ErrorCode::StageFailure, "flow " + std::to_string(f) + " is in two splits");
    const auto refit = features::fit_features(take_flows(records, fi, s.train), params.var_threshold, params.corr_threshold);
    if (features::to_json(refit).dump() != features::to_json(params).dump())
        fail(ErrorCode::StageFailure, "feature params differ from a fit on the training flows alone");
}

/// Prefix windows over the given flows: one window per packet.
inline features::Windows flow_windows(const std::vector<ingest::PacketRecord>& records, const FlowIndex& fi,
                                      const std::vector<std::uint32_t>& flows, const features::FeatureParams& params,
                                      std::size_t window) {
    auto m = features::transform_records(params, take_flows(records, fi, flows));
    return features::reshape_sequences(m, window, {true});
}

}  // namespace nipred::pipeline
