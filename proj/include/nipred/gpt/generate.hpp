#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nipred/gpt/decoder.hpp"
#include "nipred/text/bpe.hpp"
#include "nipred/text/packet_line.hpp"

namespace nipred::gpt {

struct GenerationPolicy {
    enum class Mode { Greedy, Temperature };
    Mode mode = Mode::Greedy;
    double temperature = 1.0;
    std::size_t max_new_tokens = 128;
    bool stop_at_newline = true;
    bool stop_at_flow_end = true;

    void validate() const {
        require(mode == Mode::Greedy || temperature > 0, ErrorCode::ConfigError, "temperature must be > 0");
        require(max_new_tokens > 0, ErrorCode::ConfigError, "max_new_tokens must be > 0");
    }
};

/// Outcome of one decoding run. `line` excludes the terminating newline.
struct Generation {
    std::vector<int> ids;
    std::string line;
    bool complete = false;            // ended on a newline or FLOW_END
    bool flow_end = false;
    bool max_tokens_exceeded = false;
};

/// ids that contain a newline byte, for the end-of-line stop rule.
inline std::vector<bool> newline_tokens(const text::BpeVocab& vocab) {
    std::vector<bool> out(static_cast<std::size_t>(vocab.size()), false);
    for (int id = text::kNumSpecial; id < vocab.size(); ++id)
        out[static_cast<std::size_t>(id)] = vocab.token_bytes(id).find('\n') != std::string::npos;
    return out;
}

inline int pick_token(const std::vector<double>& logits, const GenerationPolicy& policy, Rng* rng) {
    if (policy.mode == GenerationPolicy::Mode::Greedy || rng == nullptr) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i)
            if (logits[i] > logits[best]) best = i;
        return static_cast<int>(best);
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> w(logits.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp((logits[i] - mx) / policy.temperature);
    return static_cast<int>(sample_weighted(*rng, w));
}

/// Autoregressive decoding after `context` until a full packet line, FLOW_END, or
/// a limit. A run that hits a limit is returned incomplete, never thrown.
inline Generation predict_next_packet(const GptModel& model, const text::BpeVocab& vocab, std::span<const int> context,
                                      const GenerationPolicy& policy = {}, Rng* rng = nullptr) {
    policy.validate();
    require(!context.empty(), ErrorCode::InvalidArgument, "empty generation context");
    Generation g;
    if (context.size() >= model.cfg.max_positions) {
        g.max_tokens_exceeded = true;
        return g;
    }
    const auto nl = newline_tokens(vocab);
    GptDecoder dec(model);
    std::vector<double> logits;
    for (int id : context) logits = dec.step(id);
    std::string bytes;
    while (true) {
        const int tok = pick_token(logits, policy, rng);
        g.ids.push_back(tok);
        if (tok == text::FLOW_END && policy.stop_at_flow_end) {
            g.flow_end = true;
            g.complete = true;
            break;
        }
        if (text::is_special(tok) || tok >= vocab.size()) break;  // not a packet byte, rejected downstream
        bytes += vocab.token_bytes(tok);
        if (policy.stop_at_newline && nl[static_cast<std::size_t>(tok)]) {
            g.complete = true;
            break;
        }
        if (g.ids.size() >= policy.max_new_tokens || dec.position() >= model.cfg.max_positions) {
            g.max_tokens_exceeded = true;
            break;
        }
        logits = dec.step(tok);
    }
    const auto nlpos = bytes.find('\n');
    g.line = bytes.substr(0, nlpos);
    if (g.complete && !g.flow_end && nlpos != bytes.size() - 1) g.complete = false;
    return g;
}

/// Softmax over the next token after `context`, from a full (uncached) forward pass.
inline std::vector<double> next_token_distribution(const GptModel& model, std::span<const int> context) {
    nn::NoGradGuard guard;
    std::vector<std::vector<int>> one{{context.begin(), context.end()}};
    auto b = nn::make_batch(one);
    auto logits = model.forward(b);
    const auto V = model.cfg.vocab_size;
    std::vector<double> row(logits.value().begin() + static_cast<long>((context.size() - 1) * V),
                            logits.value().begin() + static_cast<long>(context.size() * V));
    auto p = nn::softmax(Tensor::from({1, V}, row));
    return {p.value().begin(), p.value().end()};
}

/// Token form of one item of a flow. Packet lines carry their newline.
inline std::vector<int> encode_packet(const text::BpeVocab& vocab, const std::string& line) {
    return vocab.encode(line + "\n", false).ids;
}

/// Context for predicting the packet after lines[i]: the last `context_packets`
/// items ending at i, where item -1 is FLOW_BEGIN.
inline std::vector<int> generation_context(const text::BpeVocab& vocab, const std::vector<std::string>& lines, long i,
                                           std::size_t context_packets = 1) {
    std::vector<int> out;
    const long first = i - static_cast<long>(context_packets) + 1;
    for (long k = std::max(first, -1L); k <= i; ++k) {
        if (k < 0) {
            out.push_back(text::FLOW_BEGIN);
            continue;
        }
        auto ids = encode_packet(vocab, lines[static_cast<std::size_t>(k)]);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

/// Training windows: context items followed by the next item (packet or FLOW_END).
inline std::vector<std::vector<int>> training_windows(const text::BpeVocab& vocab,
                                                      const std::vector<std::vector<std::string>>& flows,
                                                      std::size_t context_packets = 1) {
    std::vector<std::vector<int>> out;
    for (const auto& lines : flows) {
        const long n = static_cast<long>(lines.size());
        for (long i = -1; i < n; ++i) {
            auto w = generation_context(vocab, lines, i, context_packets);
            if (i + 1 < n) {
                auto next = encode_packet(vocab, lines[static_cast<std::size_t>(i + 1)]);
                w.insert(w.end(), next.begin(), next.end());
            } else {
                w.push_back(text::FLOW_END);
            }
            out.push_back(std::move(w));
        }
    }
    return out;
}

struct NextLineScore {
    std::size_t total = 0;
    std::size_t exact = 0;            // generated item equals the true next item
    std::size_t packet_targets = 0;
    std::size_t packet_exact = 0;
    std::size_t flow_end_targets = 0;
    std::size_t flow_end_exact = 0;
    std::size_t incomplete = 0;

    double accuracy() const { return total ? static_cast<double>(exact) / static_cast<double>(total) : 0.0; }
    double flow_end_rate() const {
        return flow_end_targets ? static_cast<double>(flow_end_exact) / static_cast<double>(flow_end_targets) : 0.0;
    }
};

/// Greedy next-item accuracy over every packet of the given flows. The true next item
/// of a flow's last packet is FLOW_END.
inline NextLineScore score_next_lines(const GptModel& model, const text::BpeVocab& vocab,
                                      const std::vector<std::vector<std::string>>& flows, std::size_t context_packets = 1,
                                      const GenerationPolicy& policy = {}) {
    NextLineScore s;
    for (const auto& lines : flows)
        for (std::size_t i = 0; i < lines.size(); ++i) {
            auto ctx = generation_context(vocab, lines, static_cast<long>(i), context_packets);
            auto g = predict_next_packet(model, vocab, ctx, policy);
            const bool last = i + 1 == lines.size();
            bool ok;
            if (last) {
                ok = g.flow_end;
                ++s.flow_end_targets;
                s.flow_end_exact += ok;
            } else {
                ok = g.complete && !g.flow_end && g.line == lines[i + 1];
                ++s.packet_targets;
                s.packet_exact += ok;
            }
            s.incomplete += !g.complete;
            s.exact += ok;
            ++s.total;
        }
    return s;
}

/// Judges (current, generated) pairs. Returns true when the pair is judged consecutive.
using PairJudge = std::function<bool(const std::string& current, const std::string& generated)>;

struct GeneratorEvaluation {
    std::size_t judged = 0;
    std::size_t consecutive = 0;
    std::size_t not_a_packet = 0;               // FLOW_END or incomplete generations, not judged
    std::vector<double> per_flow;               // fraction judged consecutive per flow, -1 if none judged

    double fraction() const { return judged ? static_cast<double>(consecutive) / static_cast<double>(judged) : 0.0; }
};

/// Generates the next packet for every test packet and asks `judge` whether the
/// pair is consecutive.
inline GeneratorEvaluation evaluate_generator(const GptModel& model, const text::BpeVocab& vocab, const PairJudge& judge,
                                              const std::vector<std::vector<std::string>>& flows,
                                              std::size_t context_packets = 1, const GenerationPolicy& policy = {}) {
    GeneratorEvaluation ev;
    for (const auto& lines : flows) {
        std::size_t judged = 0, ok = 0;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            auto g = predict_next_packet(model, vocab, generation_context(vocab, lines, static_cast<long>(i), context_packets),
                                         policy);
            if (!g.complete || g.flow_end) {
                ++ev.not_a_packet;
                continue;
            }
            ++judged;
            ok += judge(lines[i], g.line) ? 1 : 0;
        }
        ev.judged += judged;
        ev.consecutive += ok;
        ev.per_flow.push_back(judged ? static_cast<double>(ok) / static_cast<double>(judged) : -1.0);
    }
    return ev;
}

}  // namespace nipred::gpt
