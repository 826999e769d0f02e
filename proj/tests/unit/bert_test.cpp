#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "nipred/bert/train.hpp"

using namespace nipred;

namespace {

text::BpeVocab byte_vocab() { return text::BpeVocab{}; }

bert::BertConfig tiny(std::size_t vocab = text::kBaseVocab) {
    bert::BertConfig c;
    c.layers = 1;
    c.width = 32;
    c.heads = 2;
    c.vocab_size = vocab;
    c.max_positions = 64;
    c.dropout = 0.0;
    return c;
}

std::vector<std::vector<std::string>> toy_flows(std::size_t n, std::size_t len) {
    std::vector<std::vector<std::string>> flows;
    for (std::size_t f = 0; f < n; ++f) {
        std::vector<std::string> l;
        for (std::size_t k = 0; k < len; ++k) l.push_back("f" + std::to_string(f % 7) + "p" + std::to_string(k));
        flows.push_back(l);
    }
    return flows;
}

}  // namespace

TEST(Pairs, ExampleLayout) {
    auto ex = bert::make_example(byte_vocab(), "ab", "cde", bert::kConsecutive, 64);
    ASSERT_EQ(ex.tokens.size(), 8u);
    EXPECT_EQ(ex.tokens[0], text::CLS);
    EXPECT_EQ(std::count(ex.tokens.begin(), ex.tokens.end(), text::CLS), 1);
    EXPECT_EQ(std::count(ex.tokens.begin(), ex.tokens.end(), text::SEP), 2);
    EXPECT_EQ(ex.tokens[3], text::SEP);
    EXPECT_EQ(ex.tokens.back(), text::SEP);
    EXPECT_EQ(ex.segments, (std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1}));
    try {
        bert::make_example(byte_vocab(), std::string(40, 'a'), std::string(40, 'b'), 0, 64);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SequenceTooLong);
    }
}

TEST(Pairs, AdjacencyWithinOneFlow) {
    std::vector<std::vector<std::string>> flows = {{"p1", "p2", "p3"}};
    auto pairs = bert::build_pair_dataset(flows, {});
    std::set<std::pair<std::string, std::string>> cons, non;
    for (const auto& p : pairs) (p.label == bert::kConsecutive ? cons : non).insert({p.a, p.b});
    EXPECT_EQ(cons, (std::set<std::pair<std::string, std::string>>{{"p1", "p2"}, {"p2", "p3"}}));
    EXPECT_EQ(pairs.size(), 4u);
    for (const auto& ab : non) EXPECT_FALSE(cons.count(ab));
    bool saw_p1p3 = false;
    for (int seed = 0; seed < 30 && !saw_p1p3; ++seed)
        for (const auto& p : bert::build_pair_dataset(flows, {0.5, static_cast<std::uint64_t>(seed), 0}))
            if (p.a == "p1" && p.b == "p3") {
                EXPECT_EQ(p.label, bert::kNonConsecutive);
                saw_p1p3 = true;
            }
    EXPECT_TRUE(saw_p1p3);
}

TEST(Pairs, BalanceIsExact) {
    std::vector<std::vector<std::string>> flows;
    Rng rng(3);
    for (int f = 0; f < 1000; ++f) {
        std::vector<std::string> l;
        const auto n = 2 + uniform_index(rng, 6);
        for (std::size_t k = 0; k < n; ++k) l.push_back("flow" + std::to_string(f) + "_" + std::to_string(k));
        flows.push_back(l);
    }
    auto pairs = bert::build_pair_dataset(flows, {0.5, 11, 0});
    long cons = 0, non = 0;
    for (const auto& p : pairs) (p.label == bert::kConsecutive ? cons : non) += 1;
    EXPECT_LE(std::labs(cons - non), 1);
    EXPECT_EQ(pairs, bert::build_pair_dataset(flows, {0.5, 11, 0}));
    EXPECT_NE(pairs, bert::build_pair_dataset(flows, {0.5, 12, 0}));
}

TEST(Pairs, NonConsecutiveNeverRepeatsAConsecutiveText) {
    auto flows = toy_flows(40, 5);  // flows repeat with period 7
    auto pairs = bert::build_pair_dataset(flows, {0.3, 2, 0});
    std::set<std::pair<std::string, std::string>> cons;
    for (const auto& p : pairs)
        if (p.label == bert::kConsecutive) cons.insert({p.a, p.b});
    std::size_t non = 0;
    for (const auto& p : pairs)
        if (p.label == bert::kNonConsecutive) {
            EXPECT_FALSE(cons.count({p.a, p.b}));
            ++non;
        }
    EXPECT_NEAR(static_cast<double>(pairs.size() - non) / static_cast<double>(pairs.size()), 0.3, 0.01);
}

TEST(Pairs, InsufficientFlows) {
    for (auto flows : std::vector<std::vector<std::vector<std::string>>>{{}, {{"a"}, {"b"}}, {{"a", "b"}}}) {
        try {
            bert::build_pair_dataset(flows, {});
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InsufficientFlows);
        }
    }
}

TEST(Pairs, CsvRoundTrip) {
    auto pairs = bert::build_pair_dataset(toy_flows(10, 4), {});
    const auto path = (std::filesystem::path(::testing::TempDir()) / "pairs.csv").string();
    bert::write_pairs_csv(path, pairs);
    EXPECT_EQ(bert::read_pairs_csv(path), pairs);
    std::filesystem::remove(path);
}

TEST(Mlm, SelectsCeilOfRateTimesEligible) {
    std::vector<int> ids = {text::CLS};
    for (int i = 0; i < 20; ++i) ids.push_back(100 + i);
    ids.push_back(text::SEP);
    ids.push_back(text::PAD);
    ids.push_back(text::FLOW_END);
    Rng rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        auto pos = bert::select_mask_positions(ids, 0.15, rng);
        EXPECT_EQ(pos.size(), 3u);
        for (auto p : pos) EXPECT_FALSE(text::is_special(ids[p]));
    }
}

TEST(Mlm, NothingToMask) {
    auto m = bert::BertModel::init(tiny());
    Rng rng(1);
    std::vector<std::vector<int>> seqs = {{text::CLS, text::SEP, text::SEP}};
    try {
        bert::mlm_loss(m, seqs, 0.15, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NothingToMask);
    }
}

TEST(Mlm, UntrainedLossIsNearLogVocab) {
    auto m = bert::BertModel::init(tiny());
    Rng rng(2);
    std::vector<std::vector<int>> seqs;
    for (int s = 0; s < 8; ++s) {
        std::vector<int> ids = {text::CLS};
        for (int i = 0; i < 30; ++i) ids.push_back(text::kByteBase + static_cast<int>(uniform_index(rng, 256)));
        seqs.push_back(ids);
    }
    const double loss = bert::mlm_loss(m, seqs, 0.15, rng).item();
    EXPECT_NEAR(loss, std::log(static_cast<double>(text::kBaseVocab)), 0.3);
}

TEST(Mlm, MemorizesOneSentence) {
    auto m = bert::BertModel::init(tiny());
    auto seq = byte_vocab().encode("ttl=64 window_size=29200 flags=2", false).ids;
    seq.insert(seq.begin(), text::CLS);
    Rng rng(3);
    auto losses = bert::mlm_pretrain(m, {seq}, 300, 8, 3e-3, rng);
    double tail = 0;
    for (std::size_t i = losses.size() - 20; i < losses.size(); ++i) tail += losses[i] / 20;
    EXPECT_LT(tail, 0.1);
}

TEST(PairHead, ProbabilitiesAndTies) {
    auto m = bert::BertModel::init(tiny());
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        std::string a, b;
        for (int k = 0; k < 5; ++k) a += static_cast<char>('a' + uniform_index(rng, 26));
        for (int k = 0; k < 7; ++k) b += static_cast<char>('a' + uniform_index(rng, 26));
        auto p = bert::classify_pair(m, bert::make_example(byte_vocab(), a, b, 0, 64));
        EXPECT_NEAR(p.probs[0] + p.probs[1], 1.0, 1e-9);
    }
    EXPECT_EQ(bert::predict_from_logits(0.3, 0.3).label, bert::kNonConsecutive);
    EXPECT_EQ(bert::predict_from_logits(0.4, 0.3).label, bert::kConsecutive);
}

class TrainedPairModel : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        auto flows = toy_flows(70, 4);
        auto pairs = bert::build_pair_dataset(flows, {0.5, 5, 0});
        examples = new std::vector<bert::PairExample>(bert::make_examples(byte_vocab(), pairs, 64));
        model = new bert::BertModel(bert::BertModel::init(tiny()));
        bert::BertTrainConfig cfg;
        cfg.max_epochs = 40;
        cfg.patience = 40;
        cfg.lr = 3e-3;
        history = new nn::FitHistory(bert::finetune_pair(*model, *examples, *examples, cfg));
    }
    static void TearDownTestSuite() {
        delete model;
        delete examples;
        delete history;
    }
    static bert::BertModel* model;
    static std::vector<bert::PairExample>* examples;
    static nn::FitHistory* history;
};
bert::BertModel* TrainedPairModel::model = nullptr;
std::vector<bert::PairExample>* TrainedPairModel::examples = nullptr;
nn::FitHistory* TrainedPairModel::history = nullptr;

TEST_F(TrainedPairModel, MemorizedConsecutivePairIsConsecutive) {
    for (const auto& ex : *examples)
        if (ex.label == bert::kConsecutive) {
            auto p = bert::classify_pair(*model, ex);
            EXPECT_GT(p.probs[bert::kConsecutive], 0.9);
        }
    EXPECT_EQ(history->epochs(), history->train_loss.size());
}

TEST_F(TrainedPairModel, SegmentIdsMatter) {
    auto ex = bert::make_example(byte_vocab(), "f1p0", "f1p1", 0, 64);
    auto swapped = ex;
    for (auto& s : swapped.segments) s = 1 - s;
    nn::NoGradGuard guard;
    auto cls = [&](const bert::PairExample& x) {
        std::vector<int> seg;
        auto b = bert::pair_batch(std::span<const bert::PairExample>(&x, 1), seg);
        auto v = model->pooled(model->encode(b, seg), b).value();
        return std::vector<double>(v.begin(), v.end());
    };
    EXPECT_NE(cls(ex), cls(swapped));
}

TEST_F(TrainedPairModel, CheckpointRoundTrip) {
    const auto path = (std::filesystem::path(::testing::TempDir()) / "bert.ckpt").string();
    bert::save_bert(path, *model);
    auto back = bert::load_bert(path);
    auto a = bert::classify_pairs(*model, *examples), b = bert::classify_pairs(back, *examples);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].probs, b[i].probs);
    std::filesystem::remove(path);
}
