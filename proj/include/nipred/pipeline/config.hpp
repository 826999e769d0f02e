#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "nipred/bert/model.hpp"
#include "nipred/bert/pairs.hpp"
#include "nipred/bert/train.hpp"
#include "nipred/core/hash.hpp"
#include "nipred/features/split.hpp"
#include "nipred/gpt/generate.hpp"
#include "nipred/gpt/model.hpp"
#include "nipred/gpt/train.hpp"
#include "nipred/lstm/classifier.hpp"
#include "nipred/synth/grammar.hpp"

namespace nipred::pipeline {

using json = nlohmann::json;

inline constexpr const char* kDataRootEnv = "NIPRED_DATA_ROOT";

/// Where traffic comes from: generated, a records CSV, or a pcap.
struct InputSpec {
    std::string source = "synth";  // synth | csv | pcap
    std::string path;              // relative to the data root
    std::size_t n_flows = 1200;    // synth only
    synth::GrammarSpec grammar;    // synth only
    std::string label;             // pcap only: label for every packet, empty = Unlabeled
};

struct DeployConfig {
    InputSpec input;
    bool gate = true;               // reject generations the pair evaluator calls non-consecutive
    std::size_t chunk_packets = 256;
    std::size_t max_new_tokens = 128;
};

struct PipelineConfig {
    std::uint64_t seed = 42;
    std::string data_root = "data";
    std::string work_dir = "work";
    InputSpec input;
    double var_threshold = 0.25;
    double corr_threshold = 0.9;
    features::SplitSpec split;
    std::size_t vocab_size = 1024;
    std::size_t context_packets = 1;
    gpt::GptConfig gpt;
    gpt::GptTrainConfig gpt_train;
    std::size_t gpt_eval_flows = 100;  // held-out flows scored after training
    bert::PairDatasetConfig pairs;
    bert::BertConfig bert;
    bert::BertTrainConfig bert_train;
    lstm::LstmClassifierConfig lstm;
    bool multiclass = true;  // also train the six-way classifier for attack families
    DeployConfig deploy;
    json raw;                // the file as read, for hashing

    std::filesystem::path work() const { return work_dir; }
    std::filesystem::path checkpoints() const { return work() / "checkpoints"; }
    std::filesystem::path reports() const { return work() / "reports"; }
    std::filesystem::path stage_dir() const { return work() / "stages"; }
    std::filesystem::path data_path(const std::string& rel) const {
        std::filesystem::path p(rel);
        return p.is_absolute() ? p : std::filesystem::path(data_root) / p;
    }
    /// Hash of the settings, leaving out where files live so relocated runs agree.
    std::string hash() const {
        auto j = raw;
        if (j.is_object()) j.erase("paths");
        return hex64(fnv1a(j.dump()));
    }
};

namespace detail {

template <typename T>
T section(const json& j, const char* key) {
    return j.contains(key) ? j.at(key).get<T>() : T{};
}

inline InputSpec parse_input(const json& j) {
    InputSpec in;
    in.source = j.value("source", in.source);
    in.path = j.value("path", in.path);
    in.n_flows = j.value("n_flows", in.n_flows);
    in.label = j.value("label", in.label);
    if (j.contains("grammar")) in.grammar = j.at("grammar").get<synth::GrammarSpec>();
    if (in.source != "synth" && in.source != "csv" && in.source != "pcap")
        fail(ErrorCode::ConfigError, "input.source must be synth, csv or pcap");
    if (in.source != "synth" && in.path.empty()) fail(ErrorCode::ConfigError, "input.path is required for " + in.source);
    if (!in.label.empty() && !parse_label(in.label)) fail(ErrorCode::ConfigError, "unknown label " + in.label);
    return in;
}

inline json input_json(const InputSpec& in) {
    return {{"source", in.source}, {"path", in.path}, {"n_flows", in.n_flows}, {"grammar", in.grammar}, {"label", in.label}};
}

}  // namespace detail

/// Parses and validates. Every config problem surfaces as ConfigError.
inline PipelineConfig parse_config(const json& j) {
    try {
        PipelineConfig c;
        c.raw = j;
        c.seed = j.value("seed", c.seed);
        if (j.contains("paths")) {
            c.data_root = j["paths"].value("data", c.data_root);
            c.work_dir = j["paths"].value("work", c.work_dir);
        }
        if (j.contains("input")) c.input = detail::parse_input(j["input"]);
        if (j.contains("features")) {
            const auto& f = j["features"];
            c.var_threshold = f.value("var_threshold", c.var_threshold);
            c.corr_threshold = f.value("corr_threshold", c.corr_threshold);
            if (f.contains("split")) {
                c.split.train_frac = f["split"].value("train", c.split.train_frac);
                c.split.val_frac = f["split"].value("val", c.split.val_frac);
                c.split.test_frac = f["split"].value("test", c.split.test_frac);
            }
        }
        c.split.seed = c.seed;
        if (j.contains("tokenizer")) c.vocab_size = j["tokenizer"].value("vocab_size", c.vocab_size);
        if (j.contains("gpt")) {
            const auto& g = j["gpt"];
            c.gpt = detail::section<gpt::GptConfig>(g, "model");
            c.gpt_train = detail::section<gpt::GptTrainConfig>(g, "train");
            c.context_packets = g.value("context_packets", c.context_packets);
            c.gpt_eval_flows = g.value("eval_flows", c.gpt_eval_flows);
        }
        if (j.contains("pairs")) {
            const auto& p = j["pairs"];
            c.pairs.neg_ratio = p.value("neg_ratio", c.pairs.neg_ratio);
            c.pairs.seed = p.value("seed", c.pairs.seed);
            c.pairs.max_consecutive = p.value("max_consecutive", c.pairs.max_consecutive);
        }
        if (j.contains("bert")) {
            c.bert = detail::section<bert::BertConfig>(j["bert"], "model");
            c.bert_train = detail::section<bert::BertTrainConfig>(j["bert"], "train");
        }
        if (j.contains("lstm")) c.lstm = j["lstm"].get<lstm::LstmClassifierConfig>();
        c.multiclass = j.value("multiclass", c.multiclass);
        if (j.contains("deploy")) {
            const auto& d = j["deploy"];
            if (d.contains("input")) c.deploy.input = detail::parse_input(d["input"]);
            c.deploy.gate = d.value("gate", c.deploy.gate);
            c.deploy.chunk_packets = d.value("chunk_packets", c.deploy.chunk_packets);
            c.deploy.max_new_tokens = d.value("max_new_tokens", c.deploy.max_new_tokens);
        }
        // one seed drives every model unless a section pins its own
        if (!(j.contains("gpt") && j["gpt"].contains("model") && j["gpt"]["model"].contains("seed"))) c.gpt.seed = c.seed;
        if (!(j.contains("bert") && j["bert"].contains("model") && j["bert"]["model"].contains("seed"))) c.bert.seed = c.seed;
        if (!(j.contains("lstm") && j["lstm"].contains("seed"))) c.lstm.seed = c.seed;
        c.gpt.vocab_size = c.vocab_size;
        c.bert.vocab_size = c.vocab_size;

        require(c.vocab_size >= static_cast<std::size_t>(text::kBaseVocab), ErrorCode::ConfigError,
                "tokenizer.vocab_size must be >= " + std::to_string(text::kBaseVocab));
        require(c.var_threshold > 0 && c.var_threshold < 1 && c.corr_threshold > 0 && c.corr_threshold < 1,
                ErrorCode::ConfigError, "feature thresholds must lie in (0,1)");
        require(c.context_packets >= 1, ErrorCode::ConfigError, "context_packets must be >= 1");
        require(c.deploy.chunk_packets >= 1, ErrorCode::ConfigError, "deploy.chunk_packets must be >= 1");
        c.gpt.validate();
        c.bert.validate();
        c.lstm.validate();
        c.input.grammar.validate();
        c.deploy.input.grammar.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        fail(ErrorCode::ConfigError, e.what());
    }
}

/// Reads a JSON config file. Relative paths in it resolve against the file's
/// directory; NIPRED_DATA_ROOT, when set, replaces the data root.
inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot read config " + path);
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, path + ": " + e.what());
    }
    auto c = parse_config(j);
    const auto base = std::filesystem::absolute(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!std::filesystem::path(p).is_absolute()) p = (base / p).lexically_normal().string();
    };
    resolve(c.data_root);
    resolve(c.work_dir);
    if (const char* root = std::getenv(kDataRootEnv); root && *root) c.data_root = root;
    return c;
}

}  // namespace nipred::pipeline
