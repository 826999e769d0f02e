#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "nipred/core/rng.hpp"
#include "nipred/ingest/csv.hpp"
#include "nipred/text/bpe.hpp"

namespace nipred::bert {

// Label convention: 0 = consecutive ("negative"), 1 = non-consecutive ("positive").
inline constexpr int kConsecutive = 0;
inline constexpr int kNonConsecutive = 1;

struct PairText {
    std::string a, b;
    int label = kConsecutive;

    bool operator==(const PairText&) const = default;
};

/// [CLS] A [SEP] B [SEP] with segment 0 through the first SEP and 1 after it.
struct PairExample {
    std::vector<int> tokens;
    std::vector<int> segments;
    int label = kConsecutive;
};

inline PairExample make_example(const text::BpeVocab& vocab, const std::string& a, const std::string& b, int label,
                                std::size_t max_positions) {
    PairExample ex;
    ex.label = label;
    ex.tokens.push_back(text::CLS);
    auto ta = vocab.encode(a, false).ids;
    ex.tokens.insert(ex.tokens.end(), ta.begin(), ta.end());
    ex.tokens.push_back(text::SEP);
    const auto boundary = ex.tokens.size();
    auto tb = vocab.encode(b, false).ids;
    ex.tokens.insert(ex.tokens.end(), tb.begin(), tb.end());
    ex.tokens.push_back(text::SEP);
    require(ex.tokens.size() <= max_positions, ErrorCode::SequenceTooLong,
            "pair of " + std::to_string(ex.tokens.size()) + " tokens exceeds max_positions " +
                std::to_string(max_positions));
    ex.segments.assign(ex.tokens.size(), 0);
    std::fill(ex.segments.begin() + static_cast<long>(boundary), ex.segments.end(), 1);
    return ex;
}

struct PairDatasetConfig {
    double neg_ratio = 0.5;       // fraction of examples that are consecutive pairs
    std::uint64_t seed = 11;
    std::size_t max_consecutive = 0;  // 0 = every consecutive pair
};

/// Consecutive pairs from every flow, plus non-consecutive pairs drawn half from the
/// same flow at a non-adjacent offset and half across flows. A drawn pair whose text
/// matches some consecutive pair is discarded and redrawn. Output order is shuffled.
inline std::vector<PairText> build_pair_dataset(const std::vector<std::vector<std::string>>& flows,
                                                const PairDatasetConfig& cfg) {
    require(cfg.neg_ratio > 0 && cfg.neg_ratio < 1, ErrorCode::ConfigError, "neg_ratio must lie in (0,1)");
    Rng rng(cfg.seed);
    std::vector<PairText> out;
    std::set<std::pair<std::string, std::string>> consecutive;
    std::vector<std::size_t> long_flows;  // >= 3 packets, so a non-adjacent pair exists
    std::vector<std::size_t> nonempty;
    for (std::size_t f = 0; f < flows.size(); ++f) {
        const auto& l = flows[f];
        if (!l.empty()) nonempty.push_back(f);
        if (l.size() >= 3) long_flows.push_back(f);
        for (std::size_t i = 0; i + 1 < l.size(); ++i) {
            out.push_back({l[i], l[i + 1], kConsecutive});
            consecutive.insert({l[i], l[i + 1]});
        }
    }
    if (out.empty()) fail(ErrorCode::InsufficientFlows, "no flow has two packets");
    if (nonempty.size() < 2 && long_flows.empty())
        fail(ErrorCode::InsufficientFlows, "need a second flow or a flow of three packets");
    shuffle(std::span<PairText>(out), rng);
    if (cfg.max_consecutive && out.size() > cfg.max_consecutive) out.resize(cfg.max_consecutive);

    const auto n_pos = static_cast<std::size_t>(
        std::llround(static_cast<double>(out.size()) * (1.0 - cfg.neg_ratio) / cfg.neg_ratio));
    const std::size_t budget = 50 * n_pos + 1000;
    std::size_t attempts = 0, made = 0;
    while (made < n_pos) {
        if (++attempts > budget) fail(ErrorCode::InsufficientFlows, "cannot draw enough non-consecutive pairs");
        const bool same_flow = (made % 2 == 0 || nonempty.size() < 2) && !long_flows.empty();
        PairText p{"", "", kNonConsecutive};
        if (same_flow) {
            const auto& l = flows[long_flows[uniform_index(rng, long_flows.size())]];
            const auto i = uniform_index(rng, l.size());
            auto j = uniform_index(rng, l.size());
            if (j == i || j == i + 1) continue;
            p.a = l[i];
            p.b = l[j];
        } else {
            const auto f = nonempty[uniform_index(rng, nonempty.size())];
            const auto g = nonempty[uniform_index(rng, nonempty.size())];
            if (f == g) continue;
            p.a = flows[f][uniform_index(rng, flows[f].size())];
            p.b = flows[g][uniform_index(rng, flows[g].size())];
        }
        if (consecutive.count({p.a, p.b})) continue;
        out.push_back(std::move(p));
        ++made;
    }
    shuffle(std::span<PairText>(out), rng);
    return out;
}

/// CSV with columns textA,textB,label. Packet text never holds commas or quotes.
inline void write_pairs_csv(const std::string& path, const std::vector<PairText>& pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    out << "textA,textB,label\n";
    for (const auto& p : pairs) {
        require(p.a.find_first_of(",\"\n") == std::string::npos && p.b.find_first_of(",\"\n") == std::string::npos,
                ErrorCode::InvalidArgument, "pair text holds a CSV delimiter");
        out << p.a << ',' << p.b << ',' << p.label << '\n';
    }
    if (!out) fail(ErrorCode::IoFailure, "write failed for " + path);
}

inline std::vector<PairText> read_pairs_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot read " + path);
    std::string line;
    std::getline(in, line);
    require(line == "textA,textB,label", ErrorCode::IoFailure, path + ": unexpected pair header");
    std::vector<PairText> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(','), c2 = line.rfind(',');
        require(c1 != std::string::npos && c2 != c1, ErrorCode::IoFailure, path + ": malformed pair row");
        const auto lab = line.substr(c2 + 1);
        require(lab == "0" || lab == "1", ErrorCode::LabelOutOfRange, path + ": pair label " + lab);
        out.push_back({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), lab == "1" ? 1 : 0});
    }
    return out;
}

}  // namespace nipred::bert
