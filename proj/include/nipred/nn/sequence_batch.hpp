#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "nipred/nn/attention.hpp"
#include "nipred/text/bpe.hpp"

namespace nipred::nn {

/// Variable-length token sequences stacked into rows, each padded with PAD to the
/// longest one. Row b*seq + t holds token t of sequence b.
struct SequenceBatch {
    std::size_t batch = 0;
    std::size_t seq = 0;
    std::vector<int> ids;
    std::vector<int> positions;
    std::vector<std::size_t> lengths;

    AttentionLayout layout(bool causal) const { return {batch, seq, causal, lengths}; }
    bool valid(std::size_t row) const { return row % seq < lengths[row / seq]; }
};

inline SequenceBatch make_batch(std::span<const std::vector<int>> seqs) {
    SequenceBatch b;
    b.batch = seqs.size();
    for (const auto& s : seqs) b.seq = std::max(b.seq, s.size());
    b.seq = std::max<std::size_t>(b.seq, 1);
    b.ids.assign(b.batch * b.seq, text::PAD);
    b.positions.resize(b.batch * b.seq);
    for (std::size_t i = 0; i < b.batch; ++i) {
        std::copy(seqs[i].begin(), seqs[i].end(), b.ids.begin() + static_cast<long>(i * b.seq));
        for (std::size_t t = 0; t < b.seq; ++t) b.positions[i * b.seq + t] = static_cast<int>(t);
        b.lengths.push_back(std::max<std::size_t>(seqs[i].size(), 1));
    }
    return b;
}

}  // namespace nipred::nn
