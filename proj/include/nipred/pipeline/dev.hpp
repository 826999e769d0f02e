#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "nipred/metrics/report.hpp"
#include "nipred/pipeline/dataset.hpp"

namespace nipred::pipeline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline const std::vector<std::string>& dev_stages() {
    static const std::vector<std::string> s = {"ingest",      "features",   "tokenize",   "train-gpt",
                                               "build-pairs", "train-bert", "train-lstm", "evaluate"};
    return s;
}

/// Artifact paths inside the work directory.
struct Layout {
    fs::path work;

    fs::path records() const { return work / "stages" / "records.csv"; }
    fs::path oracle() const { return work / "stages" / "oracle.csv"; }
    fs::path feature_params() const { return work / "stages" / "feature_params.json"; }
    fs::path split() const { return work / "stages" / "split.json"; }
    fs::path vocab() const { return work / "stages" / "vocab.json"; }
    fs::path corpus() const { return work / "stages" / "corpus.txt"; }
    fs::path pairs(const std::string& part) const { return work / "stages" / ("pairs_" + part + ".csv"); }
    fs::path gpt() const { return work / "checkpoints" / "gpt.ckpt"; }
    fs::path bert() const { return work / "checkpoints" / "bert.ckpt"; }
    fs::path lstm(bool multiclass) const {
        return work / "checkpoints" / (multiclass ? "lstm_multiclass.ckpt" : "lstm_binary.ckpt");
    }
    fs::path report(const std::string& name) const { return work / "reports" / name; }
    fs::path manifest() const { return work / "manifest.json"; }
    fs::path timings() const { return work / "timings.json"; }
};

/// Per-stage cache entries: the key a stage ran under and the hashes of what it wrote.
class Manifest {
public:
    explicit Manifest(fs::path path) : path_(std::move(path)) {
        if (fs::exists(path_)) {
            try {
                j_ = nlohmann::ordered_json::parse(read_text(path_));
            } catch (const nlohmann::json::exception&) {
                fail(ErrorCode::StageFailure, "manifest " + path_.string() + " is unreadable");
            }
        }
        if (!j_.contains("stages")) j_["stages"] = ojson::object();
    }

    const ojson* stage(const std::string& name) const {
        return j_["stages"].contains(name) ? &j_["stages"][name] : nullptr;
    }
    void forget(const std::string& name) {
        j_["stages"].erase(name);
        save();
    }
    void record(const std::string& name, const std::string& key, const ojson& artifacts) {
        j_["stages"][name] = {{"key", key}, {"artifacts", artifacts}};
        save();
    }
    void set(const std::string& field, const ojson& v) { j_[field] = v; }
    const ojson& json() const { return j_; }
    void save() { write_json(path_, j_); }

private:
    fs::path path_;
    ojson j_;
};

struct StageOutcome {
    std::string stage;
    bool skipped = false;
    double seconds = 0;
};

using Log = std::function<void(const std::string&)>;

/// Shared state of one dev-phase run.
class DevRun {
public:
    DevRun(PipelineConfig cfg, Log log = {}) : cfg_(std::move(cfg)), lay_{cfg_.work()}, manifest_(lay_.manifest()), log_(std::move(log)) {
        manifest_.set("config_hash", cfg_.hash());
    }

    const Layout& layout() const { return lay_; }
    const PipelineConfig& config() const { return cfg_; }
    const Manifest& manifest() const { return manifest_; }

    /// Runs every stage in order, skipping those whose key and artifacts are unchanged.
    std::vector<StageOutcome> run_all(bool force = false) {
        std::vector<StageOutcome> out;
        for (const auto& s : dev_stages()) out.push_back(run(s, force));
        return out;
    }

    StageOutcome run(const std::string& stage, bool force = false) {
        const auto key = stage_key(stage);
        StageOutcome oc{stage};
        if (!force && cached(stage, key)) {
            oc.skipped = true;
            say(stage + ": cached");
            return oc;
        }
        manifest_.forget(stage);
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<fs::path> written;
        try {
            written = execute(stage);
        } catch (const Error& e) {
            fail(ErrorCode::StageFailure, "stage " + stage + " failed: " + e.what());
        } catch (const std::exception& e) {
            fail(ErrorCode::StageFailure, "stage " + stage + " failed: " + e.what());
        }
        ojson arts = ojson::object();
        for (const auto& p : written) arts[fs::relative(p, lay_.work).generic_string()] = hash_file(p.string());
        manifest_.record(stage, key, arts);
        oc.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        say(stage + ": done in " + metrics::fixed(oc.seconds, 1) + " s");
        return oc;
    }

    /// Key of a stage: its own config slice chained with the keys of its inputs.
    std::string stage_key(const std::string& stage) const {
        nlohmann::json j;
        j["stage"] = stage;
        if (stage == "ingest") {
            j["input"] = input_fingerprint(cfg_.input, cfg_);
        } else if (stage == "features") {
            j["up"] = stage_key("ingest");
            j["var"] = cfg_.var_threshold;
            j["corr"] = cfg_.corr_threshold;
            j["split"] = {cfg_.split.train_frac, cfg_.split.val_frac, cfg_.split.test_frac, cfg_.split.seed};
        } else if (stage == "tokenize") {
            j["up"] = stage_key("features");
            j["vocab_size"] = cfg_.vocab_size;
        } else if (stage == "train-gpt") {
            j["up"] = stage_key("tokenize");
            j["model"] = cfg_.gpt;
            j["train"] = cfg_.gpt_train;
            j["context"] = cfg_.context_packets;
            j["eval_flows"] = cfg_.gpt_eval_flows;
        } else if (stage == "build-pairs") {
            j["up"] = stage_key("tokenize");
            j["pairs"] = {cfg_.pairs.neg_ratio, cfg_.pairs.seed, cfg_.pairs.max_consecutive};
        } else if (stage == "train-bert") {
            j["up"] = stage_key("build-pairs");
            j["model"] = cfg_.bert;
            j["train"] = cfg_.bert_train;
        } else if (stage == "train-lstm") {
            j["up"] = stage_key("features");
            j["model"] = cfg_.lstm;
            j["multiclass"] = cfg_.multiclass;
        } else if (stage == "evaluate") {
            j["up"] = {stage_key("train-gpt"), stage_key("train-bert"), stage_key("train-lstm")};
            j["config"] = cfg_.hash();
        } else {
            fail(ErrorCode::ConfigError, "unknown stage " + stage);
        }
        return hex64(fnv1a(j.dump()));
    }

private:
    bool cached(const std::string& stage, const std::string& key) {
        const auto* e = manifest_.stage(stage);
        if (!e || (*e)["key"] != key) return false;
        for (const auto& [rel, hash] : (*e)["artifacts"].items()) {
            const auto p = lay_.work / rel;
            if (!fs::exists(p)) return false;
            if (hash_file(p.string()) != hash.get<std::string>())
                fail(ErrorCode::StageFailure, "stage " + stage + ": artifact " + rel +
                                                  " does not match its recorded hash (corrupt); rerun with --force");
        }
        return true;
    }

    nlohmann::json provenance() const { return {{"config_hash", cfg_.hash()}}; }

    void say(const std::string& s) const {
        if (log_) log_(s);
    }

    // Loaded lazily and shared by later stages of the same run.
    const std::vector<ingest::PacketRecord>& records() {
        if (!records_) {
            records_ = ingest::read_records_csv(lay_.records().string());
            flows_ = FlowIndex(*records_);
        }
        return *records_;
    }
    const FlowIndex& flows() {
        records();
        return flows_;
    }
    const features::FeatureParams& params() {
        if (!params_) params_ = features::load_feature_params(lay_.feature_params().string());
        return *params_;
    }
    const FlowSplit& split() {
        if (!split_) split_ = flow_split_from_json(nlohmann::json::parse(read_text(lay_.split())));
        return *split_;
    }
    const text::BpeVocab& vocab() {
        if (!vocab_) vocab_ = text::BpeVocab::load(lay_.vocab().string());
        return *vocab_;
    }
    std::vector<std::vector<std::string>> texts(const std::vector<std::uint32_t>& part) {
        return flow_texts(records(), flows(), part, params().selected_index);
    }

    std::vector<fs::path> execute(const std::string& stage) {
        if (stage == "ingest") return ingest_stage();
        if (stage == "features") return features_stage();
        if (stage == "tokenize") return tokenize_stage();
        if (stage == "train-gpt") return gpt_stage();
        if (stage == "build-pairs") return pairs_stage();
        if (stage == "train-bert") return bert_stage();
        if (stage == "train-lstm") return lstm_stage();
        return evaluate_stage();
    }

    std::vector<fs::path> ingest_stage() {
        auto t = load_traffic(cfg_.input, cfg_);
        fs::create_directories(lay_.records().parent_path());
        ingest::write_records_csv(lay_.records().string(), t.records);
        std::vector<fs::path> out{lay_.records()};
        if (t.synthetic) {
            synth::write_oracle_csv(lay_.oracle().string(), *t.synthetic);
            out.push_back(lay_.oracle());
        }
        records_.reset();
        say("ingest: " + std::to_string(t.records.size()) + " packets");
        return out;
    }

    std::vector<fs::path> features_stage() {
        const auto s = split_flows(records(), flows(), cfg_.split);
        auto p = features::fit_features(take_flows(records(), flows(), s.train), cfg_.var_threshold, cfg_.corr_threshold);
        assert_no_leakage(s, records(), flows(), p);
        features::save_feature_params(lay_.feature_params().string(), p);
        write_json(lay_.split(), to_json(s));
        params_ = p;
        split_ = s;
        say("features: " + std::to_string(p.width()) + " columns kept; flows " + std::to_string(s.train.size()) + "/" +
            std::to_string(s.val.size()) + "/" + std::to_string(s.test.size()));
        return {lay_.feature_params(), lay_.split()};
    }

    std::vector<fs::path> tokenize_stage() {
        const auto corpus = corpus_text(texts(split().train));
        write_text(lay_.corpus(), corpus);
        auto v = text::train_bpe(corpus, static_cast<int>(cfg_.vocab_size));
        v.save(lay_.vocab().string());
        vocab_ = v;
        say("tokenize: vocabulary of " + std::to_string(v.size()));
        return {lay_.corpus(), lay_.vocab()};
    }

    std::vector<fs::path> gpt_stage() {
        auto flows_text = text::split_corpus(read_text(lay_.corpus()));
        if (!flows_text) fail(ErrorCode::CorpusEmpty, "corpus is not a sequence of serialized flows");
        auto windows = gpt::training_windows(vocab(), *flows_text, cfg_.context_packets);
        auto model = gpt::GptModel::init(cfg_.gpt);
        auto res = gpt::train_gpt(model, windows, cfg_.gpt_train, [&](std::size_t step, double loss) {
            say("train-gpt: step " + std::to_string(step) + " loss " + metrics::fixed(loss));
        });
        fs::create_directories(lay_.gpt().parent_path());
        gpt::save_gpt(lay_.gpt().string(), model, nullptr, provenance());
        auto test = texts(split().test);
        if (test.size() > cfg_.gpt_eval_flows) test.resize(cfg_.gpt_eval_flows);
        auto sc = gpt::score_next_lines(model, vocab(), test, cfg_.context_packets);
        ojson r;
        r["config_hash"] = cfg_.hash();
        r["windows"] = windows.size();
        r["steps"] = cfg_.gpt_train.steps;
        r["final_loss"] = res.loss.empty() ? 0.0 : res.loss.back();
        r["eval_flows"] = test.size();
        r["next_item_accuracy"] = sc.accuracy();
        r["packet_targets"] = sc.packet_targets;
        r["packet_exact"] = sc.packet_exact;
        r["flow_end_targets"] = sc.flow_end_targets;
        r["flow_end_exact"] = sc.flow_end_exact;
        r["incomplete"] = sc.incomplete;
        r["loss_every_step"] = res.loss;
        write_json(lay_.report("gpt_eval.json"), r);
        say("train-gpt: held-out next-item accuracy " + metrics::fixed(sc.accuracy()));
        return {lay_.gpt(), lay_.report("gpt_eval.json")};
    }

    std::vector<fs::path> pairs_stage() {
        std::vector<fs::path> out;
        const std::map<std::string, const std::vector<std::uint32_t>*> parts = {
            {"train", &split().train}, {"val", &split().val}, {"test", &split().test}};
        for (const auto& [name, ids] : parts) {
            auto pc = cfg_.pairs;
            pc.seed = cfg_.pairs.seed + (name == "train" ? 0 : name == "val" ? 1 : 2);
            if (name != "train" && pc.max_consecutive) pc.max_consecutive = std::max<std::size_t>(1, pc.max_consecutive / 4);
            auto pairs = bert::build_pair_dataset(texts(*ids), pc);
            bert::write_pairs_csv(lay_.pairs(name).string(), pairs);
            out.push_back(lay_.pairs(name));
            say("build-pairs: " + name + " " + std::to_string(pairs.size()) + " pairs");
        }
        return out;
    }

    std::vector<bert::PairExample> examples(const std::string& part) {
        return bert::make_examples(vocab(), bert::read_pairs_csv(lay_.pairs(part).string()), cfg_.bert.max_positions);
    }

    std::vector<fs::path> bert_stage() {
        auto train = examples("train"), val = examples("val");
        auto model = bert::BertModel::init(cfg_.bert);
        auto h = bert::finetune_pair(model, train, val, cfg_.bert_train, [&](std::size_t e, double v, double acc) {
            say("train-bert: epoch " + std::to_string(e + 1) + " val loss " + metrics::fixed(v) + " val acc " + metrics::fixed(acc));
        });
        fs::create_directories(lay_.bert().parent_path());
        bert::save_bert(lay_.bert().string(), model, nullptr, provenance());
        ojson r = nn::to_json(h);
        r["config_hash"] = cfg_.hash();
        write_json(lay_.report("bert_history.json"), r);
        return {lay_.bert(), lay_.report("bert_history.json")};
    }

    std::vector<fs::path> lstm_stage() {
        std::vector<fs::path> out;
        ojson hist;
        hist["config_hash"] = cfg_.hash();
        for (bool multi : {false, true}) {
            if (multi && !cfg_.multiclass) continue;
            auto lc = cfg_.lstm;
            lc.mode = multi ? ClassMode::Multiclass : ClassMode::Binary;
            lc.features = params().width();
            auto train = flow_windows(records(), flows(), split().train, params(), lc.window);
            auto val = flow_windows(records(), flows(), split().val, params(), lc.window);
            auto model = lstm::LstmClassifier::init(lc);
            const std::string tag = multi ? "multiclass" : "binary";
            auto h = lstm::train_classifier(model, train, val, [&](std::size_t e, double tl, double vl) {
                say("train-lstm(" + tag + "): epoch " + std::to_string(e + 1) + " loss " + metrics::fixed(tl) + " val " +
                    metrics::fixed(vl));
            });
            fs::create_directories(lay_.lstm(multi).parent_path());
            lstm::save_classifier(lay_.lstm(multi).string(), model, provenance());
            hist[tag] = nn::to_json(h);
            out.push_back(lay_.lstm(multi));
        }
        write_json(lay_.report("lstm_history.json"), hist);
        out.push_back(lay_.report("lstm_history.json"));
        return out;
    }

    std::vector<fs::path> evaluate_stage();

    PipelineConfig cfg_;
    Layout lay_;
    Manifest manifest_;
    Log log_;
    std::optional<std::vector<ingest::PacketRecord>> records_;
    FlowIndex flows_;
    std::optional<features::FeatureParams> params_;
    std::optional<FlowSplit> split_;
    std::optional<text::BpeVocab> vocab_;
};

/// Checkpoint hashes named in every report.
inline ojson checkpoint_hashes(const Layout& lay, bool multiclass) {
    ojson j;
    j["gpt"] = hash_file(lay.gpt().string());
    j["bert"] = hash_file(lay.bert().string());
    j["lstm_binary"] = hash_file(lay.lstm(false).string());
    if (multiclass) j["lstm_multiclass"] = hash_file(lay.lstm(true).string());
    return j;
}

inline std::vector<std::string> class_names(ClassMode mode) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < num_classes(mode); ++k) out.push_back(class_name(static_cast<int>(k), mode));
    return out;
}

inline std::vector<fs::path> DevRun::evaluate_stage() {
    std::vector<fs::path> out;
    auto add = [&](const std::vector<std::string>& paths) {
        for (const auto& p : paths) out.emplace_back(p);
    };
    ojson provenance;
    provenance["config_hash"] = cfg_.hash();
    provenance["checkpoints"] = checkpoint_hashes(lay_, cfg_.multiclass);

    // pair evaluator on held-out pairs; positive class = non-consecutive
    auto bert_model = bert::load_bert(lay_.bert().string());
    auto test_pairs = examples("test");
    auto preds = bert::classify_pairs(bert_model, test_pairs);
    std::vector<int> truth, guess;
    std::vector<double> score;
    for (std::size_t i = 0; i < test_pairs.size(); ++i) {
        truth.push_back(test_pairs[i].label);
        guess.push_back(preds[i].label);
        score.push_back(preds[i].probs[bert::kNonConsecutive]);
    }
    auto bert_rep = metrics::compute_metrics(truth, guess, {"consecutive", "non-consecutive"}, bert::kNonConsecutive);
    metrics::attach_roc(bert_rep, metrics::roc_curve(truth, score));
    auto bh = nlohmann::json::parse(read_text(lay_.report("bert_history.json")));
    metrics::RenderOptions bopt;
    bopt.provenance = provenance;
    bopt.train_loss = bh["train_loss"].get<std::vector<double>>();
    bopt.val_loss = bh["val_loss"].get<std::vector<double>>();
    add(metrics::render_report(bert_rep, lay_.report("pair_evaluator").string(), bopt));

    // classifiers on held-out windows
    auto lh = nlohmann::json::parse(read_text(lay_.report("lstm_history.json")));
    ojson summary_lstm;
    for (bool multi : {false, true}) {
        if (multi && !cfg_.multiclass) continue;
        auto model = lstm::load_classifier(lay_.lstm(multi).string());
        auto test = flow_windows(records(), flows(), split().test, params(), model.cfg.window);
        auto c = lstm::classify(model, test);
        auto y = lstm::targets(test, model.cfg.mode);
        auto rep = metrics::compute_metrics(y, c.labels, class_names(model.cfg.mode), 1);
        if (!multi) {
            std::vector<double> s;
            for (const auto& p : c.probs) s.push_back(p[1]);
            if (std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0)
                metrics::attach_roc(rep, metrics::roc_curve(y, s));
        }
        const std::string tag = multi ? "multiclass" : "binary";
        metrics::RenderOptions lopt;
        lopt.provenance = provenance;
        lopt.train_loss = lh[tag]["train_loss"].get<std::vector<double>>();
        lopt.val_loss = lh[tag]["val_loss"].get<std::vector<double>>();
        add(metrics::render_report(rep, lay_.report("lstm_" + tag).string(), lopt));
        summary_lstm[tag] = {{"accuracy", rep.accuracy}, {"macro_f1", rep.macro.f1}};
    }

    // generated packets judged by the pair evaluator
    auto gpt_model = gpt::load_gpt(lay_.gpt().string());
    auto test = texts(split().test);
    if (test.size() > cfg_.gpt_eval_flows) test.resize(cfg_.gpt_eval_flows);
    gpt::PairJudge judge = [&](const std::string& a, const std::string& b) {
        return bert::classify_pair_text(bert_model, vocab(), a, b);
    };
    auto ev = gpt::evaluate_generator(gpt_model, vocab(), judge, test, cfg_.context_packets);
    auto gpt_eval = nlohmann::json::parse(read_text(lay_.report("gpt_eval.json")));

    ojson s;
    s["schema"] = "nipred.dev/1";
    s["provenance"] = provenance;
    s["generator"] = {{"next_item_accuracy", gpt_eval["next_item_accuracy"]},
                      {"judged", ev.judged},
                      {"judged_consecutive", ev.consecutive},
                      {"consecutive_fraction", ev.fraction()},
                      {"not_a_packet", ev.not_a_packet}};
    s["pair_evaluator"] = {{"accuracy", bert_rep.accuracy}, {"auc", *bert_rep.auc}};
    s["classifier"] = summary_lstm;
    write_json(lay_.report("dev_summary.json"), s);
    out.push_back(lay_.report("dev_summary.json"));
    say("evaluate: generator fraction judged consecutive " + metrics::fixed(ev.fraction()) + ", pair accuracy " +
        metrics::fixed(bert_rep.accuracy));
    return out;
}

}  // namespace nipred::pipeline
