#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nipred/pipeline/dev.hpp"

namespace nipred::pipeline {

/// What happened to one incoming packet's predicted successor.
enum class Outcome { PredictedNormal, PredictedAttack, PredictedFlowEnd, RejectedByEvaluator, Unparseable };

inline constexpr std::array<const char*, 5> kOutcomeNames = {"PredictedNormal", "PredictedAttack", "PredictedFlowEnd",
                                                             "RejectedByEvaluator", "Unparseable"};

inline const char* outcome_name(Outcome o) { return kOutcomeNames[static_cast<std::size_t>(o)]; }

struct PacketVerdict {
    std::uint32_t flow = 0;
    std::size_t position = 0;
    Outcome outcome = Outcome::Unparseable;
    std::string generated;
    int attack_class = -1;         // multiclass id when PredictedAttack and the family model exists
    double attack_probability = -1;
    std::string true_next;         // label name of the true next packet, or flow_end
};

struct DeployReport {
    std::array<std::size_t, 5> counts{};
    std::array<std::size_t, kNumClasses> attack_by_class{};
    std::size_t input_packets = 0;
    std::size_t true_next_packets = 0;  // input packets whose true next item is a packet
    std::size_t true_next_attacks = 0;
    std::vector<PacketVerdict> verdicts;

    std::size_t count(Outcome o) const { return counts[static_cast<std::size_t>(o)]; }
    std::size_t total() const {
        std::size_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    double predicted_attack_fraction() const {
        const auto labeled = count(Outcome::PredictedNormal) + count(Outcome::PredictedAttack);
        return labeled ? static_cast<double>(count(Outcome::PredictedAttack)) / static_cast<double>(labeled) : 0.0;
    }
    double true_attack_fraction() const {
        return true_next_packets ? static_cast<double>(true_next_attacks) / static_cast<double>(true_next_packets) : 0.0;
    }
};

struct DeployOptions {
    std::optional<std::string> input_path;  // records CSV or pcap replacing the configured input
    std::optional<bool> gate;
};

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

/// Everything the deploy loop needs from the development phase.
struct TrainedModels {
    features::FeatureParams params;
    text::BpeVocab vocab;
    gpt::GptModel gpt;
    bert::BertModel bert;
    lstm::LstmClassifier binary;
    std::optional<lstm::LstmClassifier> family;
    ojson checkpoints;

    static TrainedModels load(const Layout& lay, bool multiclass) {
        std::vector<fs::path> needed = {lay.gpt(), lay.bert(), lay.lstm(false), lay.feature_params(), lay.vocab()};
        if (multiclass) needed.push_back(lay.lstm(true));
        for (const auto& p : needed)
            if (!fs::exists(p)) fail(ErrorCode::MissingCheckpoint, p.string() + " is missing; run dev-run first");
        std::optional<lstm::LstmClassifier> family;
        if (multiclass) family = lstm::load_classifier(lay.lstm(true).string());
        return {features::load_feature_params(lay.feature_params().string()),
                text::BpeVocab::load(lay.vocab().string()),
                gpt::load_gpt(lay.gpt().string()),
                bert::load_bert(lay.bert().string()),
                lstm::load_classifier(lay.lstm(false).string()),
                std::move(family),
                checkpoint_hashes(lay, multiclass)};
    }
};

/// Predicts, optionally gates, parses and classifies the successor of every incoming
/// packet. Packets are handled in capture order, a chunk at a time, each flow keeping
/// the scaled rows it has seen so far as classifier history.
inline DeployReport deploy_records(const TrainedModels& m, const std::vector<ingest::PacketRecord>& records, bool gate,
                                   std::size_t chunk_packets, std::size_t context_packets, std::size_t max_new_tokens,
                                   const Log& log = {}) {
    require(chunk_packets > 0, ErrorCode::ConfigError, "chunk_packets must be > 0");
    DeployReport rep;
    rep.input_packets = records.size();
    const FlowIndex fi(records);
    const auto scaled = features::transform_records(m.params, records);
    std::map<std::uint32_t, std::vector<std::string>> lines;
    std::map<std::uint32_t, std::size_t> position;
    for (const auto& [f, rows] : fi.rows)
        for (auto r : rows) lines[f].push_back(text::render_packet_line(records[r], m.params.selected_index));

    gpt::GenerationPolicy policy;
    policy.max_new_tokens = max_new_tokens;
    const auto window = m.binary.cfg.window;

    for (std::size_t start = 0; start < records.size(); start += chunk_packets) {
        const auto end = std::min(records.size(), start + chunk_packets);
        std::vector<std::optional<std::string>> to_classify;
        std::vector<std::vector<std::vector<double>>> history;
        std::vector<std::size_t> slot;
        for (std::size_t r = start; r < end; ++r) {
            const auto f = records[r].flow_index;
            const auto i = position[f]++;
            const auto& fl = lines[f];
            const auto& rows = fi.rows.at(f);
            PacketVerdict v;
            v.flow = f;
            v.position = i;
            if (i + 1 < rows.size()) {
                const auto next = records[rows[i + 1]].label;
                v.true_next = std::string(label_name(next));
                ++rep.true_next_packets;
                rep.true_next_attacks += is_attack(next);
            } else {
                v.true_next = "flow_end";
            }
            auto g = gpt::predict_next_packet(m.gpt, m.vocab, gpt::generation_context(m.vocab, fl, static_cast<long>(i), context_packets),
                                              policy);
            v.generated = g.flow_end ? std::string(text::kFlowEndText) : g.line;
            if (g.flow_end) {
                v.outcome = Outcome::PredictedFlowEnd;
            } else if (!g.complete) {
                v.outcome = Outcome::Unparseable;
            } else if (gate && !bert::classify_pair_text(m.bert, m.vocab, fl[i], g.line)) {
                v.outcome = Outcome::RejectedByEvaluator;
            } else {
                std::vector<std::vector<double>> h;
                for (std::size_t k = i + 1 - std::min(i + 1, window - 1); k <= i && window > 1; ++k) {
                    const auto row = scaled.row(rows[k]);
                    h.emplace_back(row.begin(), row.end());
                }
                to_classify.push_back(g.line);
                history.push_back(std::move(h));
                slot.push_back(rep.verdicts.size());
            }
            rep.verdicts.push_back(std::move(v));
        }
        auto bin = lstm::classify_predicted(m.binary, m.params, to_classify, history);
        std::vector<lstm::PredictedLabel> fam;
        if (m.family) fam = lstm::classify_predicted(*m.family, m.params, to_classify, history);
        for (std::size_t k = 0; k < slot.size(); ++k) {
            auto& v = rep.verdicts[slot[k]];
            if (bin[k].rejected) {
                v.outcome = Outcome::Unparseable;
                continue;
            }
            v.attack_probability = bin[k].probs[1];
            v.outcome = bin[k].label == 1 ? Outcome::PredictedAttack : Outcome::PredictedNormal;
            if (v.outcome == Outcome::PredictedAttack && m.family) {
                // most likely attack family, ignoring the Normal column
                const auto& p = fam[k].probs;
                v.attack_class = static_cast<int>(std::max_element(p.begin() + 1, p.end()) - p.begin());
            }
        }
        if (log) log("deploy: " + std::to_string(end) + "/" + std::to_string(records.size()) + " packets");
    }
    for (const auto& v : rep.verdicts) {
        ++rep.counts[static_cast<std::size_t>(v.outcome)];
        if (v.attack_class > 0) ++rep.attack_by_class[static_cast<std::size_t>(v.attack_class)];
    }
    require(rep.total() == rep.input_packets, ErrorCode::StageFailure, "deploy counts do not add up to the input packets");
    return rep;
}

inline ojson to_json(const DeployReport& r, bool gate) {
    ojson j;
    j["schema"] = "nipred.deploy/1";
    j["input_packets"] = r.input_packets;
    j["gate"] = gate;
    ojson c;
    for (std::size_t o = 0; o < r.counts.size(); ++o) c[kOutcomeNames[o]] = r.counts[o];
    j["counts"] = c;
    ojson by;
    for (std::size_t k = 1; k < kNumClasses; ++k) by[class_name(static_cast<int>(k), ClassMode::Multiclass)] = r.attack_by_class[k];
    j["predicted_attack_by_class"] = by;
    j["predicted_attack_fraction"] = r.predicted_attack_fraction();
    j["true_next_attack_fraction"] = r.true_attack_fraction();
    j["true_next_packets"] = r.true_next_packets;
    return j;
}

inline void write_verdicts_csv(const fs::path& path, const DeployReport& r) {
    std::string body = "flow_index,position,outcome,attack_class,attack_probability,true_next,generated\n";
    for (const auto& v : r.verdicts) {
        body += std::to_string(v.flow) + ',' + std::to_string(v.position) + ',' + outcome_name(v.outcome) + ',' +
                (v.attack_class > 0 ? class_name(v.attack_class, ClassMode::Multiclass) : std::string()) + ',' +
                (v.attack_probability >= 0 ? metrics::fixed(v.attack_probability, 6) : std::string()) + ',' + v.true_next +
                ',' + csv_quote(v.generated) + '\n';
    }
    write_text(path, body);
}

/// Deploy phase: loads the trained models, runs the incoming packets through them and
/// writes reports/deploy.json, deploy.txt and deploy_packets.csv.
inline DeployReport run_deploy(const PipelineConfig& cfg, const DeployOptions& opt = {}, const Log& log = {}) {
    const Layout lay{cfg.work()};
    auto models = TrainedModels::load(lay, cfg.multiclass);
    InputSpec in = cfg.deploy.input;
    if (opt.input_path) {
        in.path = *opt.input_path;
        const auto ext = fs::path(in.path).extension().string();
        in.source = ext == ".csv" ? "csv" : "pcap";
    }
    const bool gate = opt.gate.value_or(cfg.deploy.gate);
    const auto traffic = load_traffic(in, cfg);
    auto rep = deploy_records(models, traffic.records, gate, cfg.deploy.chunk_packets, cfg.context_packets,
                              cfg.deploy.max_new_tokens, log);
    auto j = to_json(rep, gate);
    j["input"] = input_fingerprint(in, cfg);
    j["provenance"] = {{"config_hash", cfg.hash()}, {"checkpoints", models.checkpoints}};
    write_json(lay.report("deploy.json"), j);
    write_verdicts_csv(lay.report("deploy_packets.csv"), rep);

    std::string txt = "deploy report (" + std::to_string(rep.input_packets) + " packets, gate " + (gate ? "on" : "off") + ")\n";
    for (std::size_t o = 0; o < rep.counts.size(); ++o) {
        std::string name = kOutcomeNames[o];
        name.resize(std::max<std::size_t>(name.size(), 22), ' ');
        txt += name + std::to_string(rep.counts[o]) + "\n";
    }
    txt += "predicted attack fraction " + metrics::fixed(rep.predicted_attack_fraction()) + "\n";
    txt += "true next attack fraction " + metrics::fixed(rep.true_attack_fraction()) + "\n";
    write_text(lay.report("deploy.txt"), txt);
    return rep;
}

}  // namespace nipred::pipeline
