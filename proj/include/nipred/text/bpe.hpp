#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nipred/core/error.hpp"

namespace nipred::text {

enum SpecialToken : int { FLOW_BEGIN = 0, FLOW_END = 1, CLS = 2, SEP = 3, MASK = 4, PAD = 5 };

inline constexpr int kNumSpecial = 6;
inline constexpr int kByteBase = kNumSpecial;      // byte b has id 6 + b
inline constexpr int kBaseVocab = kNumSpecial + 256;

inline constexpr std::array<std::string_view, kNumSpecial> kSpecialText = {
    "<|flow_begin|>", "<|flow_end|>", "<|cls|>", "<|sep|>", "<|mask|>", "<|pad|>"};

struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::size_t> specials;  // positions holding special ids

    std::size_t size() const { return ids.size(); }
};

inline bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

/// Byte-level BPE: 256 byte symbols, ordered merge rules, six reserved specials.
class BpeVocab {
public:
    BpeVocab() {
        for (int s = 0; s < kNumSpecial; ++s) bytes_.emplace_back(kSpecialText[static_cast<std::size_t>(s)]);
        for (int b = 0; b < 256; ++b) bytes_.emplace_back(1, static_cast<char>(b));
    }

    int size() const { return static_cast<int>(bytes_.size()); }
    const std::vector<std::pair<int, int>>& merges() const { return merges_; }
    const std::string& token_bytes(int id) const { return bytes_.at(static_cast<std::size_t>(id)); }

    void add_merge(int a, int b) {
        require(a >= kByteBase && a < size() && b >= kByteBase && b < size(), ErrorCode::UnknownId,
                "merge refers to an unknown or special id");
        rank_.emplace(key(a, b), static_cast<int>(merges_.size()));
        merges_.emplace_back(a, b);
        bytes_.push_back(bytes_[static_cast<std::size_t>(a)] + bytes_[static_cast<std::size_t>(b)]);
    }

    /// Encodes arbitrary bytes. With allow_special, literal special markers map to their ids.
    TokenSequence encode(std::string_view text, bool allow_special = true) const {
        TokenSequence out;
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t next = text.size();
            int which = -1;
            if (allow_special) {
                for (int s = 0; s < kNumSpecial; ++s) {
                    const auto at = text.find(kSpecialText[static_cast<std::size_t>(s)], pos);
                    if (at < next) {
                        next = at;
                        which = s;
                    }
                }
            }
            encode_plain(text.substr(pos, next - pos), out.ids);
            if (which < 0) break;
            out.specials.push_back(out.ids.size());
            out.ids.push_back(which);
            pos = next + kSpecialText[static_cast<std::size_t>(which)].size();
        }
        return out;
    }

    std::string decode(std::span<const int> ids) const {
        std::string out;
        for (int id : ids) {
            if (id < 0 || id >= size()) fail(ErrorCode::UnknownId, "token id " + std::to_string(id));
            out += bytes_[static_cast<std::size_t>(id)];
        }
        return out;
    }
    std::string decode(const TokenSequence& t) const { return decode(t.ids); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema_version"] = 1;
        j["vocab_size"] = size();
        auto& sp = j["specials"] = nlohmann::json::object();
        for (int s = 0; s < kNumSpecial; ++s) sp[std::string(kSpecialText[static_cast<std::size_t>(s)])] = s;
        auto& m = j["merges"] = nlohmann::json::array();
        for (auto [a, b] : merges_) m.push_back({a, b});
        return j;
    }

    static BpeVocab from_json(const nlohmann::json& j) {
        require(j.value("schema_version", 0) == 1, ErrorCode::ConfigError, "unsupported vocab version");
        BpeVocab v;
        for (int s = 0; s < kNumSpecial; ++s)
            require(j.at("specials").at(std::string(kSpecialText[static_cast<std::size_t>(s)])).get<int>() == s,
                    ErrorCode::ConfigError, "special token ids must be 0..5");
        for (const auto& m : j.at("merges")) v.add_merge(m.at(0).get<int>(), m.at(1).get<int>());
        require(v.size() == j.at("vocab_size").get<int>(), ErrorCode::ConfigError, "vocab_size disagrees with merges");
        return v;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
        out << to_json().dump() << '\n';
    }

    static BpeVocab load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail(ErrorCode::IoFailure, "cannot open " + path);
        return from_json(nlohmann::json::parse(in));
    }

private:
    static std::uint64_t key(int a, int b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
    }

    // Merges never cross a newline: each line (with its '\n') is encoded on its own.
    void encode_plain(std::string_view text, std::vector<int>& out) const {
        std::size_t start = 0;
        while (start < text.size()) {
            auto nl = text.find('\n', start);
            const auto end = nl == std::string_view::npos ? text.size() : nl + 1;
            encode_chunk(text.substr(start, end - start), out);
            start = end;
        }
    }

    void encode_chunk(std::string_view chunk, std::vector<int>& out) const {
        std::vector<int> ids;
        ids.reserve(chunk.size());
        for (unsigned char c : chunk) ids.push_back(kByteBase + c);
        while (ids.size() > 1) {
            int best = -1;
            for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                auto it = rank_.find(key(ids[i], ids[i + 1]));
                if (it != rank_.end() && (best < 0 || it->second < best)) best = it->second;
            }
            if (best < 0) break;
            const auto [a, b] = merges_[static_cast<std::size_t>(best)];
            const int merged = kBaseVocab + best;
            std::size_t w = 0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (i + 1 < ids.size() && ids[i] == a && ids[i + 1] == b) {
                    ids[w++] = merged;
                    ++i;
                } else {
                    ids[w++] = ids[i];
                }
            }
            ids.resize(w);
        }
        out.insert(out.end(), ids.begin(), ids.end());
    }

    std::vector<std::pair<int, int>> merges_;
    std::vector<std::string> bytes_;
    std::unordered_map<std::uint64_t, int> rank_;
};

/// Greedy BPE training. Each step merges the most frequent adjacent pair (ties go to
/// the lexicographically smaller byte pair) until the vocabulary reaches vocab_size
/// or no pair occurs at least twice. Special markers in the corpus are boundaries.
inline BpeVocab train_bpe(std::string_view corpus, int vocab_size) {
    require(vocab_size >= kBaseVocab, ErrorCode::InvalidArgument, "vocab_size must be >= 262");
    BpeVocab vocab;

    std::map<std::string, long> word_counts;
    {
        std::size_t pos = 0;
        auto add_words = [&](std::string_view seg) {
            std::size_t s = 0;
            while (s < seg.size()) {
                auto nl = seg.find('\n', s);
                const auto e = nl == std::string_view::npos ? seg.size() : nl + 1;
                ++word_counts[std::string(seg.substr(s, e - s))];
                s = e;
            }
        };
        while (pos < corpus.size()) {
            std::size_t next = corpus.size();
            std::size_t len = 0;
            for (auto sp : kSpecialText) {
                const auto at = corpus.find(sp, pos);
                if (at < next) {
                    next = at;
                    len = sp.size();
                }
            }
            add_words(corpus.substr(pos, next - pos));
            if (len == 0) break;
            pos = next + len;
        }
    }
    if (word_counts.empty()) fail(ErrorCode::CorpusEmpty, "no trainable text in corpus");

    struct Word {
        std::vector<int> ids;
        long count;
    };
    std::vector<Word> words;
    words.reserve(word_counts.size());
    for (const auto& [w, c] : word_counts) {
        Word word{{}, c};
        for (unsigned char ch : w) word.ids.push_back(kByteBase + ch);
        words.push_back(std::move(word));
    }

    using Pair = std::pair<int, int>;
    std::map<Pair, long> pair_count;
    std::map<Pair, std::set<std::size_t>> where;
    auto add_word_pairs = [&](std::size_t wi, long sign) {
        const auto& ids = words[wi].ids;
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            const Pair p{ids[i], ids[i + 1]};
            pair_count[p] += sign * words[wi].count;
            if (sign > 0) where[p].insert(wi);
        }
    };
    for (std::size_t wi = 0; wi < words.size(); ++wi) add_word_pairs(wi, +1);

    while (vocab.size() < vocab_size) {
        const Pair* best = nullptr;
        long best_count = 0;
        for (const auto& [p, c] : pair_count) {
            if (c < 2) continue;
            if (!best || c > best_count) {
                best = &p;
                best_count = c;
            } else if (c == best_count) {
                const auto& lb = vocab.token_bytes(p.first);
                const auto& rb = vocab.token_bytes(p.second);
                const auto& blb = vocab.token_bytes(best->first);
                const auto& brb = vocab.token_bytes(best->second);
                if (std::tie(lb, rb) < std::tie(blb, brb)) best = &p;
            }
        }
        if (!best) break;
        const Pair chosen = *best;
        vocab.add_merge(chosen.first, chosen.second);
        const int merged = vocab.size() - 1;

        const auto affected = where[chosen];
        for (auto wi : affected) {
            add_word_pairs(wi, -1);
            auto& ids = words[wi].ids;
            std::size_t w = 0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (i + 1 < ids.size() && ids[i] == chosen.first && ids[i + 1] == chosen.second) {
                    ids[w++] = merged;
                    ++i;
                } else {
                    ids[w++] = ids[i];
                }
            }
            ids.resize(w);
            add_word_pairs(wi, +1);
        }
        where.erase(chosen);
        for (auto it = pair_count.begin(); it != pair_count.end();) {
            if (it->second == 0) {
                where.erase(it->first);
                it = pair_count.erase(it);
            } else {
                ++it;
            }
        }
    }
    return vocab;
}

}  // namespace nipred::text
