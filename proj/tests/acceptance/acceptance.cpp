// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fails.
//   acceptance --work DIR --cli PATH [--only N,...]

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "nipred/nipred.hpp"
#include "nipred/nn/grad_check.hpp"
#include "nipred/nn/layers.hpp"
#include "oracles.hpp"

using namespace nipred;
using namespace nipred::nn;
using namespace nipred::pipeline;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) { return metrics::fixed(v, digits); }

std::string sci(double v) {
    std::ostringstream o;
    o.precision(2);
    o << std::scientific << v;
    return o.str();
}

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0, bool grad = false) {
    std::vector<double> v(numel(s));
    for (auto& x : v) x = uniform(rng, -scale, scale);
    return Tensor::from(std::move(s), std::move(v), grad);
}

oracle::Mat to_mat(const Tensor& t, std::size_t r0, std::size_t nrows, std::size_t c0, std::size_t ncols) {
    oracle::Mat m(nrows, std::vector<double>(ncols));
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < ncols; ++j) m[i][j] = t(r0 + i, c0 + j);
    return m;
}

// 1. analytic gradients of three composites against central differences
Verdict grad_checks() {
    const auto t0 = Clock::now();
    double worst = 0;
    {
        Rng rng(12);
        auto q = random_tensor({3, 4}, rng, 1.0, true), k = random_tensor({3, 4}, rng, 1.0, true),
             v = random_tensor({3, 4}, rng, 1.0, true);
        std::vector<int> targets{1, 3, 0};
        auto f = [&] { return cross_entropy(softmax(attention(q, k, v, true), 1), targets); };
        worst = std::max(worst, grad_check(f, {{"q", q}, {"k", k}, {"v", v}}));
    }
    {
        Rng rng(13);
        auto p = LstmParams::init(3, 4, rng);
        auto head = Linear::init(4, 3, rng);
        std::vector<Tensor> xs;
        for (int t = 0; t < 3; ++t) xs.push_back(random_tensor({2, 3}, rng, 1.0, true));
        std::vector<int> targets{0, 2};
        auto f = [&] {
            LstmState s{Tensor::zeros({2, 4}), Tensor::zeros({2, 4})};
            for (auto& x : xs) s = lstm_cell(x, s.h, s.c, p);
            return cross_entropy(head(s.h), targets);
        };
        ParamList params;
        p.collect("lstm", params);
        head.collect("head", params);
        for (std::size_t t = 0; t < xs.size(); ++t) params.push_back({"x" + std::to_string(t), xs[t]});
        worst = std::max(worst, grad_check(f, params));
    }
    {
        Rng rng(14);
        auto b1 = TransformerBlock::init(8, 2, 2, rng), b2 = TransformerBlock::init(8, 2, 2, rng);
        auto ln = LayerNorm::init(8);
        auto x = random_tensor({4, 8}, rng, 1.0, true);
        AttentionLayout layout{1, 4, true, {}};
        std::vector<int> targets{1, 5, 0, 7};
        auto f = [&] { return cross_entropy(ln(transformer_block(transformer_block(x, b1, layout), b2, layout)), targets); };
        ParamList params{{"x", x}};
        b1.collect("b1", params);
        b2.collect("b2", params);
        ln.collect("ln", params);
        worst = std::max(worst, grad_check(f, params));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-5 && secs < 10.0, "max rel err " + sci(worst) + " (< 1e-5), " + num(secs, 2) + " s (< 10 s)"};
}

// 2. library kernels against the scalar oracles
Verdict exact_oracles() {
    constexpr double tol = 1e-12;
    constexpr int instances = 100;
    double att = 0, cell = 0, met = 0;
    std::size_t auc_mismatch = 0;
    Rng rng(2024);
    for (int trial = 0; trial < instances; ++trial) {
        const std::size_t heads = 1 + uniform_index(rng, 3), dk = 1 + uniform_index(rng, 4), T = 1 + uniform_index(rng, 6);
        const std::size_t B = 1 + uniform_index(rng, 3), W = heads * dk;
        AttentionLayout layout{B, T, trial % 2 == 0, {}};
        for (std::size_t b = 0; b < B; ++b) layout.lengths.push_back(1 + uniform_index(rng, T));
        auto q = random_tensor({B * T, W}, rng, 2.0), k = random_tensor({B * T, W}, rng, 2.0), v = random_tensor({B * T, W}, rng, 2.0);
        auto out = attention(q, k, v, heads, layout);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t h = 0; h < heads; ++h) {
                auto ref = oracle::attention(to_mat(q, b * T, T, h * dk, dk), to_mat(k, b * T, T, h * dk, dk),
                                             to_mat(v, b * T, T, h * dk, dk), layout.causal, layout.lengths[b]);
                for (std::size_t i = 0; i < layout.lengths[b]; ++i)
                    for (std::size_t j = 0; j < dk; ++j) att = std::max(att, std::fabs(out(b * T + i, h * dk + j) - ref[i][j]));
            }
    }
    for (int trial = 0; trial < instances; ++trial) {
        const std::size_t in = 1 + uniform_index(rng, 5), H = 1 + uniform_index(rng, 5), B = 1 + uniform_index(rng, 3);
        oracle::LstmGateWeights g[4];
        LstmParams p;
        p.input_dim = in;
        p.hidden = H;
        p.W = Tensor::zeros({in, 4 * H}, true);
        p.U = Tensor::zeros({H, 4 * H}, true);
        p.b = Tensor::zeros({4 * H}, true);
        for (std::size_t gate = 0; gate < 4; ++gate) {
            auto& gw = g[gate];
            gw.W.assign(in, std::vector<double>(H));
            gw.U.assign(H, std::vector<double>(H));
            gw.b.assign(H, 0.0);
            for (std::size_t u = 0; u < H; ++u) {
                for (std::size_t i = 0; i < in; ++i) p.W.value()[i * 4 * H + gate * H + u] = gw.W[i][u] = uniform(rng, -1, 1);
                for (std::size_t i = 0; i < H; ++i) p.U.value()[i * 4 * H + gate * H + u] = gw.U[i][u] = uniform(rng, -1, 1);
                p.b.value()[gate * H + u] = gw.b[u] = uniform(rng, -1, 1);
            }
        }
        auto x = random_tensor({B, in}, rng, 2.0), h = random_tensor({B, H}, rng), c = random_tensor({B, H}, rng, 2.0);
        auto s = lstm_cell(x, h, c, p);
        for (std::size_t b = 0; b < B; ++b) {
            std::vector<double> xv(in), hv(H), cv(H), ho, co;
            for (std::size_t i = 0; i < in; ++i) xv[i] = x(b, i);
            for (std::size_t i = 0; i < H; ++i) hv[i] = h(b, i), cv[i] = c(b, i);
            oracle::lstm_step(xv, hv, cv, g, ho, co);
            for (std::size_t u = 0; u < H; ++u) cell = std::max({cell, std::fabs(s.h(b, u) - ho[u]), std::fabs(s.c(b, u) - co[u])});
        }
    }
    for (int trial = 0; trial < instances; ++trial) {
        const std::size_t C = 2 + uniform_index(rng, 5), n = 1 + uniform_index(rng, 300);
        std::vector<int> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<int>(uniform_index(rng, C));
            p[i] = uniform01(rng) < 0.6 ? t[i] : static_cast<int>(uniform_index(rng, C));
        }
        std::vector<std::string> names;
        for (std::size_t k = 0; k < C; ++k) names.push_back("c" + std::to_string(k));
        auto r = metrics::compute_metrics(t, p, names);
        met = std::max(met, std::fabs(r.accuracy - oracle::accuracy(t, p)));
        for (std::size_t k = 0; k < C; ++k) {
            auto o = oracle::class_counts(t, p, static_cast<int>(k));
            met = std::max({met, std::fabs(r.per_class[k].precision - o.precision), std::fabs(r.per_class[k].recall - o.recall),
                            std::fabs(r.per_class[k].f1 - o.f1), std::fabs(static_cast<double>(r.per_class[k].support) - o.support)});
        }
    }
    for (int trial = 0; trial < instances; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 999);
        std::vector<int> pos(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            pos[i] = static_cast<int>(uniform_index(rng, 2));
            s[i] = static_cast<double>(uniform_index(rng, 25)) / 25.0 + (pos[i] ? 0.08 : 0.0);
        }
        pos[0] = 1;
        pos[1] = 0;
        if (metrics::roc_curve(pos, s).auc != oracle::mann_whitney(pos, s)) ++auc_mismatch;
    }
    const bool ok = att <= tol && cell <= tol && met <= tol && auc_mismatch == 0;
    return {ok, std::to_string(instances) + " instances each; max |diff| attention " + sci(att) + ", lstm_cell " + sci(cell) +
                    ", metrics " + sci(met) + " (<= 1e-12); AUC mismatches " + std::to_string(auc_mismatch)};
}

std::string synth_corpus_text(std::size_t flows) {
    synth::GrammarSpec g;
    auto corpus = synth::generate(g, flows);
    const FlowIndex fi(corpus.records);
    auto params = features::fit_features(corpus.records);
    return corpus_text(flow_texts(corpus.records, fi, fi.ids, params.selected_index));
}

// 3. byte-level round trip and merge determinism
Verdict tokenizer() {
    const auto corpus = synth_corpus_text(400);
    const auto a = text::train_bpe(corpus, 1024), b = text::train_bpe(corpus, 1024);
    const bool same_merges = a.merges() == b.merges();
    const bool corpus_ok = a.decode(a.encode(corpus)) == corpus;
    Rng rng(3);
    std::size_t bad = 0;
    constexpr int strings = 10000;
    for (int i = 0; i < strings; ++i) {
        std::string s(uniform_index(rng, 64), '\0');
        for (auto& ch : s) ch = static_cast<char>(uniform_index(rng, 256));
        if (a.decode(a.encode(s)) != s) ++bad;
    }
    return {same_merges && corpus_ok && bad == 0,
            std::to_string(strings) + " random strings, " + std::to_string(bad) + " failures; corpus of " +
                std::to_string(corpus.size()) + " bytes " + (corpus_ok ? "round-trips" : "differs") + "; merges " +
                (same_merges ? "identical" : "differ") + " across runs"};
}

// 4. 26 columns survive selection, scaled values stay in [0,1], no split leakage
Verdict feature_pipeline() {
    Rng rng(71);
    auto m = fixture::engineered_71(rng, 400);
    const auto kept = features::select_features(m, 0.25, 0.9).cols();

    synth::GrammarSpec g;
    auto corpus = synth::generate(g, 600);
    const FlowIndex fi(corpus.records);
    const auto split = split_flows(corpus.records, fi, features::SplitSpec{});
    const auto params = features::fit_features(take_flows(corpus.records, fi, split.train));
    std::string leakage = "passes";
    try {
        assert_no_leakage(split, corpus.records, fi, params);
    } catch (const Error& e) {
        leakage = e.what();
    }
    double lo = 1, hi = 0;
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        const auto x = features::transform_records(params, take_flows(corpus.records, fi, *part));
        for (double v : x.data) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    const bool ok = kept == 26 && lo >= 0.0 && hi <= 1.0 && leakage == "passes";
    return {ok, "kept " + std::to_string(kept) + " of 71 columns (== 26); scaled range [" + num(lo) + ", " + num(hi) +
                    "]; leakage check " + leakage};
}

nlohmann::json read_json_file(const fs::path& p) { return nlohmann::json::parse(read_text(p)); }

// Work dir of one CLI run plus its stage timings.
struct CliRun {
    fs::path work;
    bool ok = false;
    double seconds = 0;
    std::string error;
};

CliRun cli_run(const std::string& cli, const fs::path& root, const std::string& name) {
    CliRun r;
    r.work = root / name;
    fs::remove_all(r.work);
    fs::create_directories(r.work);
    auto j = nlohmann::json::parse(read_text(fs::path(NIPRED_SOURCE_DIR) / "configs" / "default.json"));
    j["paths"]["work"] = fs::absolute(r.work).string();
    j["paths"]["data"] = (fs::path(NIPRED_SOURCE_DIR) / "data").string();
    const auto cfg = r.work / "config.json";
    write_text(cfg, j.dump(2) + "\n");
    const auto t0 = Clock::now();
    for (const auto* sub : {"dev-run", "deploy-run"}) {
        const auto cmd = "\"" + cli + "\" " + sub + " --config \"" + cfg.string() + "\" > \"" + (r.work / sub).string() +
                         ".log\" 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) {
            r.error = std::string(sub) + " exited with " + std::to_string(rc);
            return r;
        }
    }
    r.seconds = seconds_since(t0);
    r.ok = true;
    return r;
}

double stage_seconds(const CliRun& r, const std::string& stage) {
    return read_json_file(Layout{r.work}.timings()).at(stage).at("seconds").get<double>();
}

// 5. held-out next-packet reproduction from the generator report
Verdict generator(const CliRun& r) {
    if (!r.ok) return {false, r.error};
    const auto j = read_json_file(Layout{r.work}.report("gpt_eval.json"));
    const double acc = j.at("next_item_accuracy"), secs = stage_seconds(r, "train-gpt");
    return {acc >= 0.90 && secs <= 600, "next-packet accuracy " + num(acc) + " (>= 0.90) over " +
                                            std::to_string(j.at("packet_targets").get<long>() + j.at("flow_end_targets").get<long>()) + " held-out items; training " +
                                            num(secs, 1) + " s (<= 600 s)"};
}

// 6. held-out pair accuracy
Verdict pair_evaluator(const CliRun& r) {
    if (!r.ok) return {false, r.error};
    const auto j = read_json_file(Layout{r.work}.report("pair_evaluator.json"));
    const double acc = j.at("accuracy"), secs = stage_seconds(r, "train-bert");
    return {acc >= 0.95 && secs <= 600, "test pair accuracy " + num(acc) + " (>= 0.95); training " + num(secs, 1) + " s (<= 600 s)"};
}

// 7. binary classifier accuracy and per-class F1
Verdict classifier(const CliRun& r) {
    if (!r.ok) return {false, r.error};
    const auto j = read_json_file(Layout{r.work}.report("lstm_binary.json"));
    const double acc = j.at("accuracy");
    double worst_f1 = 1;
    std::string per_class;
    for (const auto& c : j.at("per_class")) {
        worst_f1 = std::min(worst_f1, c.at("f1").get<double>());
        per_class += " " + c.at("name").get<std::string>() + "=" + num(c.at("f1").get<double>());
    }
    return {acc >= 0.95 && worst_f1 >= 0.90, "binary accuracy " + num(acc) + " (>= 0.95); F1" + per_class + " (>= 0.90)"};
}

// 8. both phases in a fresh dir, conservation, and a byte-identical second run
Verdict end_to_end(const CliRun& a, const CliRun& b) {
    if (!a.ok) return {false, a.error};
    if (!b.ok) return {false, "second run: " + b.error};
    const auto d = read_json_file(Layout{a.work}.report("deploy.json"));
    std::size_t counted = 0;
    for (const auto& [k, v] : d.at("counts").items()) counted += v.get<std::size_t>();
    const std::size_t input = d.at("input_packets");
    std::size_t compared = 0, differing = 0;
    std::string first_diff;
    for (const auto& e : fs::recursive_directory_iterator(a.work)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a.work);
        const auto dir = rel.begin()->string();
        if (dir != "reports" && dir != "checkpoints") continue;
        ++compared;
        const auto other = b.work / rel;
        if (!fs::exists(other) || hash_file(e.path().string()) != hash_file(other.string())) {
            ++differing;
            if (first_diff.empty()) first_diff = rel.string();
        }
    }
    const bool ok = a.seconds <= 1800 && counted == input && compared > 0 && differing == 0;
    return {ok, "dev-run + deploy-run " + num(a.seconds, 1) + " s (<= 1800 s); verdicts " + std::to_string(counted) + " of " +
                    std::to_string(input) + " packets; " + std::to_string(compared) + " report/checkpoint files, " +
                    std::to_string(differing) + " differ" + (first_diff.empty() ? "" : " (first " + first_diff + ")")};
}

// 9. monotone-worsening validation loss
Verdict early_stopping() {
    constexpr std::size_t patience = 3;
    auto w = constant_param({1}, 0.0);
    std::size_t calls = 0;
    auto h = fit_with_early_stopping(
        80, patience, 0.0,
        [&](std::size_t) {
            w.node().value[0] += 1.0;
            return 0.0;
        },
        [&] { return 1.0 + 0.1 * static_cast<double>(calls++); }, {{"w", w}});
    const bool ok = h.epochs() == patience + 1 && h.stopped_early && h.best_epoch == 0 && w.value()[0] == 1.0;
    return {ok, "halted after " + std::to_string(h.epochs()) + " epochs (== " + std::to_string(patience + 1) +
                    "); restored weights from epoch " + std::to_string(static_cast<long>(w.value()[0]) - 1) + " (best " +
                    std::to_string(h.best_epoch) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
    std::string work = "acceptance_work", cli;
    std::set<int> only;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i], val = argv[i + 1];
        if (flag == "--work") work = val;
        else if (flag == "--cli") cli = val;
        else if (flag == "--only") {
            std::stringstream ss(val);
            for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
        } else {
            std::cerr << "unknown flag " << flag << '\n';
            return 2;
        }
    }
    auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

    int failed = 0;
    auto report = [&](int n, const std::string& name, const std::function<Verdict()>& check) {
        if (!wanted(n)) return;
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::cout << "criterion " << n << " [" << (v.pass ? "PASS" : "FAIL") << "] " << name << ": " << v.detail << std::endl;
    };

    report(1, "gradient checks", grad_checks);
    report(2, "exact oracles", exact_oracles);
    report(3, "tokenizer round trip", tokenizer);
    report(4, "feature pipeline", feature_pipeline);

    const bool needs_cli = wanted(5) || wanted(6) || wanted(7) || wanted(8);
    CliRun first, second;
    if (needs_cli) {
        if (cli.empty()) {
            first.error = second.error = "no --cli given";
        } else {
            first = cli_run(cli, work, "run_a");
            if (wanted(8)) second = cli_run(cli, work, "run_b");
        }
    }
    report(5, "generator next-packet accuracy", [&] { return generator(first); });
    report(6, "pair evaluator accuracy", [&] { return pair_evaluator(first); });
    report(7, "binary classifier", [&] { return classifier(first); });
    report(8, "end-to-end run", [&] { return end_to_end(first, second); });
    report(9, "early stopping", early_stopping);
    return failed == 0 ? 0 : 1;
}
