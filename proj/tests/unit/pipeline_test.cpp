#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "nipred/nipred.hpp"

using namespace nipred;
using namespace nipred::pipeline;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_config(const fs::path& work) {
    auto j = nlohmann::json::parse(R"({
      "seed": 42,
      "input": {"source": "synth", "n_flows": 60},
      "tokenizer": {"vocab_size": 1024},
      "gpt": {"model": {"layers": 1, "width": 16, "heads": 2, "max_positions": 256},
              "train": {"steps": 20, "batch_size": 8, "warmup": 2, "log_every": 10}, "eval_flows": 4},
      "pairs": {"max_consecutive": 60},
      "bert": {"model": {"layers": 1, "width": 16, "heads": 2, "max_positions": 256},
               "train": {"max_epochs": 1, "batch_size": 16}},
      "lstm": {"hidden": 8, "window": 4, "epochs_max": 2},
      "deploy": {"input": {"source": "synth", "n_flows": 12,
                           "grammar": {"stream_seed": 7, "class_mix": [0.2, 0.16, 0.16, 0.16, 0.16, 0.16]}},
                 "chunk_packets": 16, "max_new_tokens": 48}
    })");
    j["paths"] = {{"work", work.string()}, {"data", work.string()}};
    return j;
}

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("nipred_pipeline_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// One full tiny run shared by the tests that only read its outputs.
class TinyRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        work_ = new fs::path(fresh_dir("shared"));
        DevRun run(parse_config(tiny_config(*work_)));
        first_ = new std::vector<StageOutcome>(run.run_all());
    }
    static void TearDownTestSuite() {
        delete first_;
        delete work_;
    }
    static PipelineConfig config() { return parse_config(tiny_config(*work_)); }

    static fs::path* work_;
    static std::vector<StageOutcome>* first_;
};
fs::path* TinyRun::work_ = nullptr;
std::vector<StageOutcome>* TinyRun::first_ = nullptr;

}  // namespace

TEST(PipelineConfig, RejectsBadValues) {
    auto bad = [](nlohmann::json j) {
        try {
            parse_config(j);
        } catch (const Error& e) {
            return e.code() == ErrorCode::ConfigError;
        }
        return false;
    };
    EXPECT_TRUE(bad({{"input", {{"source", "tape"}}}}));
    EXPECT_TRUE(bad({{"input", {{"source", "csv"}}}}));
    EXPECT_TRUE(bad({{"tokenizer", {{"vocab_size", 10}}}}));
    EXPECT_TRUE(bad({{"gpt", {{"model", {{"width", 10}, {"heads", 3}}}}}}));
    EXPECT_TRUE(bad({{"seed", "forty-two"}}));
    EXPECT_TRUE(bad({{"lstm", {{"mode", "ternary"}}}}));
    EXPECT_NO_THROW(parse_config(nlohmann::json::object()));
}

TEST(PipelineConfig, HashIgnoresLocations) {
    auto a = tiny_config("/tmp/a"), b = tiny_config("/tmp/b");
    EXPECT_EQ(parse_config(a).hash(), parse_config(b).hash());
    b["seed"] = 43;
    EXPECT_NE(parse_config(a).hash(), parse_config(b).hash());
}

TEST(PipelineConfig, EnvOverridesDataRootOnly) {
    auto d = fresh_dir("env");
    {
        std::ofstream(d / "c.json") << R"({"paths": {"data": "in", "work": "out"}})";
    }
    unsetenv(kDataRootEnv);
    auto c = load_config((d / "c.json").string());
    EXPECT_EQ(fs::path(c.data_root), d / "in");
    EXPECT_EQ(fs::path(c.work_dir), d / "out");
    setenv(kDataRootEnv, "/elsewhere", 1);
    c = load_config((d / "c.json").string());
    unsetenv(kDataRootEnv);
    EXPECT_EQ(c.data_root, "/elsewhere");
    EXPECT_EQ(fs::path(c.work_dir), d / "out");
}

TEST_F(TinyRun, WritesEveryArtifactAndManifest) {
    ASSERT_EQ(first_->size(), dev_stages().size());
    for (const auto& o : *first_) EXPECT_FALSE(o.skipped) << o.stage;
    const Layout lay{*work_};
    for (const auto& p : {lay.records(), lay.oracle(), lay.feature_params(), lay.split(), lay.vocab(), lay.corpus(),
                          lay.gpt(), lay.bert(), lay.lstm(false), lay.lstm(true), lay.pairs("train"), lay.pairs("test"),
                          lay.report("dev_summary.json"), lay.report("pair_evaluator.json"), lay.report("lstm_binary.txt")})
        EXPECT_TRUE(fs::exists(p)) << p;
    auto m = nlohmann::json::parse(read_text(lay.manifest()));
    EXPECT_EQ(m["config_hash"], config().hash());
    for (const auto& s : dev_stages()) EXPECT_TRUE(m["stages"].contains(s)) << s;
}

TEST_F(TinyRun, ReportsNameConfigAndCheckpoints) {
    const Layout lay{*work_};
    for (const auto* name : {"dev_summary.json", "pair_evaluator.json", "lstm_binary.json", "lstm_multiclass.json"}) {
        auto j = nlohmann::json::parse(read_text(lay.report(name)));
        EXPECT_EQ(j["provenance"]["config_hash"], config().hash()) << name;
        EXPECT_EQ(j["provenance"]["checkpoints"]["gpt"], hash_file(lay.gpt().string())) << name;
    }
    nlohmann::json extra;
    gpt::load_gpt(lay.gpt().string(), &extra);
    EXPECT_EQ(extra["config_hash"], config().hash());
}

TEST_F(TinyRun, RerunSkipsEveryStage) {
    DevRun run(config());
    for (const auto& o : run.run_all()) EXPECT_TRUE(o.skipped) << o.stage;
}

TEST_F(TinyRun, ChangedSettingRerunsOnlyDownstream) {
    auto j = tiny_config(*work_);
    j["lstm"]["epochs_max"] = 3;
    DevRun run(parse_config(j));
    std::map<std::string, bool> skipped;
    for (const auto& o : run.run_all()) skipped[o.stage] = o.skipped;
    EXPECT_TRUE(skipped["train-gpt"]);
    EXPECT_TRUE(skipped["train-bert"]);
    EXPECT_FALSE(skipped["train-lstm"]);
    EXPECT_FALSE(skipped["evaluate"]);
    // and back, so the shared run stays as the other tests expect
    DevRun back(config());
    back.run_all();
}

TEST_F(TinyRun, DeployConservesPackets) {
    auto rep = run_deploy(config());
    EXPECT_EQ(rep.total(), rep.input_packets);
    EXPECT_GT(rep.input_packets, 0u);
    auto j = nlohmann::json::parse(read_text(Layout{*work_}.report("deploy.json")));
    std::size_t sum = 0;
    for (const auto& [k, v] : j["counts"].items()) sum += v.get<std::size_t>();
    EXPECT_EQ(sum, j["input_packets"].get<std::size_t>());
    EXPECT_EQ(j["provenance"]["config_hash"], config().hash());
    std::size_t by_class = 0;
    for (const auto& [k, v] : j["predicted_attack_by_class"].items()) by_class += v.get<std::size_t>();
    EXPECT_EQ(by_class, j["counts"]["PredictedAttack"].get<std::size_t>());
}

TEST_F(TinyRun, GateOffRejectsNothing) {
    DeployOptions opt;
    opt.gate = false;
    auto rep = run_deploy(config(), opt);
    EXPECT_EQ(rep.count(Outcome::RejectedByEvaluator), 0u);
    EXPECT_EQ(rep.total(), rep.input_packets);
}

TEST_F(TinyRun, DeployIsDeterministic) {
    run_deploy(config());
    const auto a = read_text(Layout{*work_}.report("deploy_packets.csv"));
    run_deploy(config());
    EXPECT_EQ(a, read_text(Layout{*work_}.report("deploy_packets.csv")));
}

TEST(Pipeline, CorruptCheckpointNamesStage) {
    auto w = fresh_dir("corrupt");
    auto cfg = parse_config(tiny_config(w));
    DevRun run(cfg);
    for (const auto* s : {"ingest", "features", "tokenize", "train-gpt"}) run.run(s);
    {
        std::ofstream f(Layout{w}.gpt(), std::ios::binary | std::ios::app);
        f << "garbage";
    }
    DevRun again(cfg);
    try {
        again.run("train-gpt");
        FAIL() << "expected StageFailure";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StageFailure);
        EXPECT_NE(std::string(e.what()).find("train-gpt"), std::string::npos) << e.what();
    }
    // the earlier artifacts are left alone
    EXPECT_TRUE(fs::exists(Layout{w}.vocab()));
}

TEST(Pipeline, MissingArtifactReruns) {
    auto w = fresh_dir("missing");
    auto cfg = parse_config(tiny_config(w));
    DevRun run(cfg);
    run.run("ingest");
    fs::remove(Layout{w}.oracle());
    DevRun again(cfg);
    EXPECT_FALSE(again.run("ingest").skipped);
    EXPECT_TRUE(fs::exists(Layout{w}.oracle()));
}

TEST(Pipeline, StageErrorsBecomeStageFailure) {
    auto w = fresh_dir("fail");
    auto j = tiny_config(w);
    j["input"] = {{"source", "csv"}, {"path", "absent.csv"}};
    DevRun run(parse_config(j));
    try {
        run.run("ingest");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StageFailure);
        EXPECT_NE(std::string(e.what()).find("ingest"), std::string::npos);
    }
}

TEST(Pipeline, DeployWithoutCheckpointsFails) {
    auto w = fresh_dir("nockpt");
    try {
        run_deploy(parse_config(tiny_config(w)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingCheckpoint);
    }
}

TEST(Pipeline, FreshRunsAreIdentical) {
    auto a = fresh_dir("repro_a"), b = fresh_dir("repro_b");
    auto ja = tiny_config(a), jb = tiny_config(b);
    ja["lstm"]["epochs_max"] = 1;
    jb["lstm"]["epochs_max"] = 1;
    DevRun(parse_config(ja)).run_all();
    DevRun(parse_config(jb)).run_all();
    run_deploy(parse_config(ja));
    run_deploy(parse_config(jb));
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        EXPECT_EQ(hash_file(entry.path().string()), hash_file((b / rel).string())) << rel;
    }
}
