#include <chrono>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "nipred/nipred.hpp"

using namespace nipred;
using namespace nipred::pipeline;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

void say(const std::string& s) { std::cerr << "[nipred] " << s << '\n'; }

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

// Wall-clock seconds per stage; kept apart from reports and the manifest so reruns stay byte-identical.
void write_timings(const Layout& lay, const std::vector<StageOutcome>& outcomes) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& o : outcomes) j[o.stage] = {{"skipped", o.skipped}, {"seconds", o.seconds}};
    write_text(lay.timings(), j.dump(2) + "\n");
}

// Runs every dev stage up to and including `last`; earlier ones are skipped when cached.
void run_through(const PipelineConfig& cfg, const std::string& last, bool force) {
    DevRun run(cfg, say);
    std::vector<StageOutcome> outcomes;
    for (const auto& s : dev_stages()) {
        outcomes.push_back(run.run(s, force && s == last));
        if (s == last) break;
    }
    write_timings(Layout{cfg.work()}, outcomes);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network intrusion prediction: packet generator, pair evaluator and packet classifier"};
    app.require_subcommand(1);
    std::string config_path;
    bool force = false;

    auto with_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        return sub;
    };

    std::map<std::string, CLI::App*> stage_cmds;
    const std::map<std::string, std::string> stage_help = {
        {"ingest", "Read the configured input into stages/records.csv"},
        {"features", "Split flows, fit encoder, selection and scaler on the training flows"},
        {"tokenize", "Serialize training flows and learn the BPE vocabulary"},
        {"train-gpt", "Train the next-packet generator"},
        {"build-pairs", "Build consecutive and non-consecutive packet pairs"},
        {"train-bert", "Train the packet-pair evaluator"},
        {"train-lstm", "Train the packet classifiers"}};
    for (const auto& [name, help] : stage_help) {
        auto* sub = with_config(app.add_subcommand(name, help + " (runs missing upstream stages first)"));
        sub->add_flag("--force", force, "Rerun this stage even when cached");
        stage_cmds[name] = sub;
    }

    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic labeled traffic");
    std::size_t n_flows = 1200;
    std::uint64_t grammar_seed = 42;
    std::string synth_out, oracle_out;
    synth_cmd->add_option("--flows", n_flows, "Number of flows")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", grammar_seed, "Grammar seed");
    synth_cmd->add_option("--out", synth_out, "Records CSV to write")->required();
    synth_cmd->add_option("--oracle", oracle_out, "Next-packet oracle CSV to write");

    auto* predict_cmd = with_config(app.add_subcommand("predict", "Generate the next packet line for each input line"));
    std::string in_path, out_path, ckpt_path, vocab_path;
    predict_cmd->add_option("--in", in_path, "File of packet lines, one per line")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", out_path, "Where to write generated lines (default stdout)");
    predict_cmd->add_option("--ckpt", ckpt_path, "Generator checkpoint (default: from the work dir)");
    predict_cmd->add_option("--vocab", vocab_path, "Vocabulary (default: from the work dir)");

    auto* judge_cmd = with_config(app.add_subcommand("judge", "Score a pair CSV with the pair evaluator"));
    std::string pairs_path, report_stem;
    judge_cmd->add_option("--pairs", pairs_path, "CSV textA,textB,label")->required()->check(CLI::ExistingFile);
    judge_cmd->add_option("--ckpt", ckpt_path, "Evaluator checkpoint (default: from the work dir)");
    judge_cmd->add_option("--report", report_stem, "Report path stem (default reports/judge)");

    auto* classify_cmd = with_config(app.add_subcommand("classify", "Classify every packet window of a records CSV"));
    std::string mode = "binary";
    classify_cmd->add_option("--in", in_path, "Records CSV")->required()->check(CLI::ExistingFile);
    classify_cmd->add_option("--ckpt", ckpt_path, "Classifier checkpoint (default: from the work dir)");
    classify_cmd->add_option("--mode", mode, "binary or multiclass")->check(CLI::IsMember({"binary", "multiclass"}));
    classify_cmd->add_option("--report", report_stem, "Report path stem (default reports/classify_<mode>)");

    auto* dev_cmd = with_config(app.add_subcommand("dev-run", "Run the whole development phase"));
    dev_cmd->add_flag("--force", force, "Rerun every stage");

    auto* deploy_cmd = with_config(app.add_subcommand("deploy-run", "Predict and classify the next packet of each incoming packet"));
    bool no_gate = false;
    deploy_cmd->add_option("--in", in_path, "Records CSV or pcap replacing the configured deploy input");
    deploy_cmd->add_flag("--no-gate", no_gate, "Do not reject generations the evaluator calls non-consecutive");

    auto* report_cmd = with_config(app.add_subcommand("report", "Print the saved evaluation reports"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        if (synth_cmd->parsed()) {
            synth::GrammarSpec g;
            g.seed = grammar_seed;
            auto corpus = synth::generate(g, n_flows);
            ingest::write_records_csv(synth_out, corpus.records);
            if (!oracle_out.empty()) synth::write_oracle_csv(oracle_out, corpus);
            say("wrote " + std::to_string(corpus.records.size()) + " packets in " + std::to_string(n_flows) + " flows");
            return kOk;
        }

        const auto cfg = load_config(config_path);
        const Layout lay{cfg.work()};

        for (const auto& [name, sub] : stage_cmds)
            if (sub->parsed()) {
                run_through(cfg, name, force);
                return kOk;
            }

        if (dev_cmd->parsed()) {
            const auto t0 = std::chrono::steady_clock::now();
            DevRun run(cfg, say);
            write_timings(lay, run.run_all(force));
            say("dev-run finished in " +
                metrics::fixed(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1) + " s");
            return kOk;
        }

        if (deploy_cmd->parsed()) {
            DeployOptions opt;
            if (!in_path.empty()) opt.input_path = in_path;
            if (no_gate) opt.gate = false;
            auto rep = run_deploy(cfg, opt, say);
            std::cout << read_text(lay.report("deploy.txt"));
            return rep.total() == rep.input_packets ? kOk : kStageFailure;
        }

        if (report_cmd->parsed()) {
            bool any = false;
            for (const auto* name : {"pair_evaluator.txt", "lstm_binary.txt", "lstm_multiclass.txt", "deploy.txt"}) {
                const auto p = lay.report(name);
                if (!fs::exists(p)) continue;
                std::cout << "== " << name << '\n' << read_text(p) << '\n';
                any = true;
            }
            if (fs::exists(lay.report("dev_summary.json"))) {
                std::cout << "== dev_summary.json\n" << read_text(lay.report("dev_summary.json"));
                any = true;
            }
            if (!any) fail(ErrorCode::StageFailure, "no reports under " + lay.report("").string() + "; run dev-run first");
            return kOk;
        }

        if (predict_cmd->parsed()) {
            const auto model = gpt::load_gpt(ckpt_path.empty() ? lay.gpt().string() : ckpt_path);
            const auto vocab = text::BpeVocab::load(vocab_path.empty() ? lay.vocab().string() : vocab_path);
            gpt::GenerationPolicy policy;
            policy.max_new_tokens = cfg.deploy.max_new_tokens;
            std::ofstream file;
            if (!out_path.empty()) {
                file.open(out_path);
                if (!file) fail(ErrorCode::IoFailure, "cannot write " + out_path);
            }
            std::ostream& out = out_path.empty() ? std::cout : file;
            const auto lines = read_lines(in_path);
            for (std::size_t i = 0; i < lines.size(); ++i) {
                auto g = gpt::predict_next_packet(model, vocab, gpt::generation_context(vocab, lines, static_cast<long>(i), cfg.context_packets),
                                                  policy);
                out << (g.flow_end ? std::string(text::kFlowEndText) : g.complete ? g.line : "<|incomplete|>") << '\n';
            }
            return kOk;
        }

        if (judge_cmd->parsed()) {
            const auto model = bert::load_bert(ckpt_path.empty() ? lay.bert().string() : ckpt_path);
            const auto vocab = text::BpeVocab::load(lay.vocab().string());
            const auto xs = bert::make_examples(vocab, bert::read_pairs_csv(pairs_path), model.cfg.max_positions);
            const auto preds = bert::classify_pairs(model, xs);
            std::vector<int> truth, guess;
            std::vector<double> score;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                truth.push_back(xs[i].label);
                guess.push_back(preds[i].label);
                score.push_back(preds[i].probs[bert::kNonConsecutive]);
            }
            auto rep = metrics::compute_metrics(truth, guess, {"consecutive", "non-consecutive"}, bert::kNonConsecutive);
            if (std::count(truth.begin(), truth.end(), 1) && std::count(truth.begin(), truth.end(), 0))
                metrics::attach_roc(rep, metrics::roc_curve(truth, score));
            const auto stem = report_stem.empty() ? lay.report("judge").string() : report_stem;
            fs::create_directories(fs::absolute(stem).parent_path());
            metrics::render_report(rep, stem);
            std::cout << metrics::render_text(rep);
            return kOk;
        }

        if (classify_cmd->parsed()) {
            const bool multi = mode == "multiclass";
            const auto model = lstm::load_classifier(ckpt_path.empty() ? lay.lstm(multi).string() : ckpt_path);
            const auto params = features::load_feature_params(lay.feature_params().string());
            const auto records = ingest::read_records_csv(in_path);
            const FlowIndex fi(records);
            const auto w = flow_windows(records, fi, fi.ids, params, model.cfg.window);
            const auto c = lstm::classify(model, w);
            const auto stem = report_stem.empty() ? lay.report("classify_" + mode).string() : report_stem;
            fs::create_directories(fs::absolute(stem).parent_path());
            bool labeled = true;
            for (auto l : w.labels) labeled = labeled && l != Label::Unlabeled;
            if (labeled) {
                const auto rep = metrics::compute_metrics(lstm::targets(w, model.cfg.mode), c.labels, class_names(model.cfg.mode), 1);
                metrics::render_report(rep, stem);
                std::cout << metrics::render_text(rep);
            } else {
                std::vector<std::size_t> counts(model.cfg.num_classes());
                for (int l : c.labels) ++counts[static_cast<std::size_t>(l)];
                std::string txt;
                for (std::size_t k = 0; k < counts.size(); ++k)
                    txt += class_name(static_cast<int>(k), model.cfg.mode) + " " + std::to_string(counts[k]) + "\n";
                write_text(stem + ".txt", txt);
                std::cout << txt;
            }
            return kOk;
        }
    } catch (const Error& e) {
        say(std::string("error: ") + e.what());
        return e.code() == ErrorCode::ConfigError ? kConfigError : kStageFailure;
    } catch (const std::exception& e) {
        say(std::string("error: ") + e.what());
        return kStageFailure;
    }
    return kOk;
}
