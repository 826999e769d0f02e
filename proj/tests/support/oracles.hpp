#pragma once

// Scalar reference implementations used to cross-check the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

/// softmax(Q K^T / sqrt(d_k)) V for one head, long double accumulation.
/// Keys j >= valid are ignored, and with causal also keys j > i.
inline Mat attention(const Mat& Q, const Mat& K, const Mat& V, bool causal, std::size_t valid) {
    const std::size_t n = Q.size(), dk = Q[0].size(), dv = V[0].size();
    Mat out(n, std::vector<double>(dv, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<long double> logit(n);
        std::vector<bool> on(n);
        long double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
            on[j] = j < valid && (!causal || j <= i);
            if (!on[j]) continue;
            long double s = 0;
            for (std::size_t t = 0; t < dk; ++t) s += static_cast<long double>(Q[i][t]) * K[j][t];
            logit[j] = s / std::sqrt(static_cast<long double>(dk));
            if (logit[j] > mx) mx = logit[j];
        }
        long double z = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (on[j]) z += std::exp(logit[j] - mx);
        for (std::size_t c = 0; c < dv; ++c) {
            long double acc = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (on[j]) acc += std::exp(logit[j] - mx) / z * V[j][c];
            out[i][c] = static_cast<double>(acc);
        }
    }
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmGateWeights {
    Mat W;                   // (in, H)
    Mat U;                   // (H, H)
    std::vector<double> b;   // (H)
};

/// One LSTM step. Gates: 0 input, 1 forget, 2 output, 3 cell input.
inline void lstm_step(const std::vector<double>& x, const std::vector<double>& h, const std::vector<double>& c,
                      const LstmGateWeights (&g)[4], std::vector<double>& h_out, std::vector<double>& c_out) {
    const std::size_t H = h.size();
    h_out.assign(H, 0.0);
    c_out.assign(H, 0.0);
    for (std::size_t u = 0; u < H; ++u) {
        double z[4];
        for (int k = 0; k < 4; ++k) {
            long double s = g[k].b[u];
            for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<long double>(x[i]) * g[k].W[i][u];
            for (std::size_t i = 0; i < H; ++i) s += static_cast<long double>(h[i]) * g[k].U[i][u];
            z[k] = static_cast<double>(s);
        }
        const double in = sigmoid(z[0]), f = sigmoid(z[1]), o = sigmoid(z[2]), cell = std::tanh(z[3]);
        c_out[u] = f * c[u] + in * cell;
        h_out[u] = o * std::tanh(c_out[u]);
    }
}

struct ClassCounts {
    double precision, recall, f1, support;
};

/// Per-class precision/recall/F1 by scanning the samples once per class.
inline ClassCounts class_counts(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == k) support += 1;
        if (truth[i] == k && pred[i] == k) tp += 1;
        if (truth[i] != k && pred[i] == k) fp += 1;
        if (truth[i] == k && pred[i] != k) fn += 1;
    }
    ClassCounts c{};
    c.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    c.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    c.f1 = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    c.support = support;
    return c;
}

inline double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    double ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
    return ok / static_cast<double>(truth.size());
}

/// P(score+ > score-) + 1/2 P(tie), by visiting every positive/negative pair.
inline double mann_whitney(const std::vector<int>& positive, const std::vector<double>& scores) {
    unsigned long long twice = 0, pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) twice += 2;
            else if (scores[i] == scores[j]) twice += 1;
        }
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

}  // namespace oracle
