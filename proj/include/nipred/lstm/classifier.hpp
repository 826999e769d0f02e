#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/core/labels.hpp"
#include "nipred/features/pipeline.hpp"
#include "nipred/features/reshape.hpp"
#include "nipred/nn/adam.hpp"
#include "nipred/nn/checkpoint.hpp"
#include "nipred/nn/fit.hpp"
#include "nipred/nn/layers.hpp"
#include "nipred/text/packet_line.hpp"

namespace nipred::lstm {

using nn::Tensor;

struct LstmClassifierConfig {
    std::size_t hidden = 64;
    double dropout = 0.2;
    std::size_t epochs_max = 80;
    std::size_t patience = 3;
    std::size_t window = 10;
    ClassMode mode = ClassMode::Binary;
    std::size_t features = 0;  // set from the data when 0
    std::size_t batch_size = 32;
    double lr = 1e-3;
    bool class_weighting = false;
    std::uint64_t seed = 42;

    std::size_t num_classes() const { return nipred::num_classes(mode); }

    void validate() const {
        require(hidden >= 1 && window >= 1 && batch_size >= 1, ErrorCode::ConfigError, "lstm sizes must be positive");
        require(dropout >= 0 && dropout < 1, ErrorCode::ConfigError, "lstm dropout outside [0,1)");
        require(epochs_max >= 1, ErrorCode::ConfigError, "epochs_max must be >= 1");
    }
};

inline void to_json(nlohmann::json& j, const LstmClassifierConfig& c) {
    j = {{"hidden", c.hidden}, {"dropout", c.dropout}, {"epochs_max", c.epochs_max}, {"patience", c.patience},
         {"window", c.window}, {"mode", c.mode == ClassMode::Binary ? "binary" : "multiclass"},
         {"features", c.features}, {"batch_size", c.batch_size}, {"lr", c.lr},
         {"class_weighting", c.class_weighting}, {"seed", c.seed}};
}

inline ClassMode parse_mode(const std::string& s) {
    if (s == "binary") return ClassMode::Binary;
    if (s == "multiclass") return ClassMode::Multiclass;
    fail(ErrorCode::ConfigError, "mode must be binary or multiclass, got " + s);
}

inline void from_json(const nlohmann::json& j, LstmClassifierConfig& c) {
    LstmClassifierConfig d;
    c.hidden = j.value("hidden", d.hidden);
    c.dropout = j.value("dropout", d.dropout);
    c.epochs_max = j.value("epochs_max", d.epochs_max);
    c.patience = j.value("patience", d.patience);
    c.window = j.value("window", d.window);
    c.mode = parse_mode(j.value("mode", std::string("binary")));
    c.features = j.value("features", d.features);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr = j.value("lr", d.lr);
    c.class_weighting = j.value("class_weighting", d.class_weighting);
    c.seed = j.value("seed", d.seed);
}

/// Unrolled LSTM over the window; last hidden state -> dropout -> dense -> softmax.
struct LstmClassifier {
    LstmClassifierConfig cfg;
    nn::LstmParams cell;
    nn::Linear dense;

    static LstmClassifier init(const LstmClassifierConfig& cfg) {
        cfg.validate();
        require(cfg.features >= 1, ErrorCode::ConfigError, "lstm needs features >= 1");
        Rng rng(cfg.seed);
        LstmClassifier m;
        m.cfg = cfg;
        m.cell = nn::LstmParams::init(cfg.features, cfg.hidden, rng);
        m.dense = nn::Linear::init(cfg.hidden, cfg.num_classes(), rng);
        return m;
    }

    nn::ParamList params() const {
        nn::ParamList out;
        cell.collect("lstm", out);
        dense.collect("dense", out);
        return out;
    }

    /// Logits (n, classes) for samples idx of `w`.
    Tensor forward(const features::Windows& w, std::span<const std::size_t> idx, const nn::ForwardContext& ctx = {}) const {
        require(w.window == cfg.window && w.features == cfg.features, ErrorCode::ShapeMismatch,
                "windows are " + std::to_string(w.window) + "x" + std::to_string(w.features) + ", model expects " +
                    std::to_string(cfg.window) + "x" + std::to_string(cfg.features));
        const auto n = idx.size();
        auto h = Tensor::zeros({n, cfg.hidden});
        auto c = Tensor::zeros({n, cfg.hidden});
        std::vector<double> xt(n * cfg.features);
        for (std::size_t t = 0; t < cfg.window; ++t) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t f = 0; f < cfg.features; ++f) xt[i * cfg.features + f] = w.at(idx[i], t, f);
            auto s = nn::lstm_cell(Tensor::from({n, cfg.features}, xt), h, c, cell);
            h = s.h;
            c = s.c;
        }
        return dense(nn::dropout(h, cfg.dropout, ctx.rng, ctx.training));
    }
};

inline std::vector<int> targets(const features::Windows& w, ClassMode mode) {
    std::vector<int> out;
    out.reserve(w.count);
    for (auto l : w.labels) out.push_back(class_id(l, mode));
    return out;
}

/// Mean cross-entropy with optional per-class weights (normalized by total weight).
inline Tensor window_loss(const LstmClassifier& m, const features::Windows& w, std::span<const std::size_t> idx,
                          std::span<const int> y, std::span<const double> class_weights,
                          const nn::ForwardContext& ctx = {}) {
    auto logits = m.forward(w, idx, ctx);
    std::vector<int> t;
    for (auto i : idx) t.push_back(y[i]);
    if (class_weights.empty()) return nn::cross_entropy(logits, t);
    // Weighted mean: sum over classes of weight * (class mean loss * class count) / total weight.
    std::vector<std::vector<std::uint8_t>> masks(m.cfg.num_classes(), std::vector<std::uint8_t>(t.size(), 0));
    std::vector<double> counts(m.cfg.num_classes(), 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        masks[static_cast<std::size_t>(t[i])][i] = 1;
        counts[static_cast<std::size_t>(t[i])] += 1;
    }
    double wsum = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) wsum += class_weights[k] * counts[k];
    std::optional<Tensor> total;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) continue;
        auto part = nn::scale(nn::cross_entropy(logits, t, masks[k]), class_weights[k] * counts[k] / wsum);
        total = total ? nn::add(*total, part) : part;
    }
    return *total;
}

/// Softmax rows, inference mode.
inline std::vector<std::vector<double>> predict_proba(const LstmClassifier& m, const features::Windows& w,
                                                      std::size_t batch_size = 256) {
    nn::NoGradGuard guard;
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < w.count; s += batch_size) {
        idx.resize(std::min(batch_size, w.count - s));
        std::iota(idx.begin(), idx.end(), s);
        auto p = nn::softmax(m.forward(w, idx));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::vector<double> row(m.cfg.num_classes());
            for (std::size_t k = 0; k < row.size(); ++k) row[k] = p(i, k);
            out.push_back(std::move(row));
        }
    }
    return out;
}

inline int argmax(const std::vector<double>& p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct Classification {
    std::vector<std::vector<double>> probs;
    std::vector<int> labels;
};

inline Classification classify(const LstmClassifier& m, const features::Windows& w) {
    Classification c;
    c.probs = predict_proba(m, w);
    for (const auto& p : c.probs) c.labels.push_back(argmax(p));
    return c;
}

inline double mean_loss(const LstmClassifier& m, const features::Windows& w, std::span<const int> y,
                        std::size_t batch_size = 256) {
    nn::NoGradGuard guard;
    double total = 0;
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < w.count; s += batch_size) {
        idx.resize(std::min(batch_size, w.count - s));
        std::iota(idx.begin(), idx.end(), s);
        total += window_loss(m, w, idx, y, {}).item() * static_cast<double>(idx.size());
    }
    return total / static_cast<double>(w.count);
}

/// Inverse-frequency weights, scaled so the mean weight over samples is 1.
inline std::vector<double> balanced_weights(std::span<const int> y, std::size_t classes) {
    std::vector<double> counts(classes, 0.0), out(classes, 0.0);
    for (int v : y) counts[static_cast<std::size_t>(v)] += 1;
    std::size_t present = 0;
    for (double c : counts) present += c > 0;
    for (std::size_t k = 0; k < classes; ++k)
        if (counts[k] > 0) out[k] = static_cast<double>(y.size()) / (static_cast<double>(present) * counts[k]);
    return out;
}

/// Minibatch Adam with early stopping on validation loss; best-epoch weights kept.
inline nn::FitHistory train_classifier(LstmClassifier& m, const features::Windows& train, const features::Windows& val,
                                       const std::function<void(std::size_t, double, double)>& log = {}) {
    require(train.count > 0 && val.count > 0, ErrorCode::CorpusEmpty, "classifier needs train and val windows");
    const auto ytr = targets(train, m.cfg.mode);
    const auto yva = targets(val, m.cfg.mode);
    for (int v : ytr)
        require(v >= 0 && static_cast<std::size_t>(v) < m.cfg.num_classes(), ErrorCode::LabelOutOfRange,
                "class id " + std::to_string(v));
    const auto weights = m.cfg.class_weighting ? balanced_weights(ytr, m.cfg.num_classes()) : std::vector<double>{};
    Rng rng(m.cfg.seed ^ 0x6c73746d5f6674ULL);
    const auto params = m.params();
    nn::Adam opt(params, nn::AdamConfig{m.cfg.lr, 0.9, 0.999, 1e-7, 0.0});
    std::vector<std::size_t> order(train.count);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> idx;
    auto epoch_fn = [&](std::size_t) {
        shuffle(std::span<std::size_t>(order), rng);
        double total = 0;
        for (std::size_t s = 0; s < order.size(); s += m.cfg.batch_size) {
            idx.assign(order.begin() + static_cast<long>(s),
                       order.begin() + static_cast<long>(std::min(order.size(), s + m.cfg.batch_size)));
            opt.zero_grad();
            nn::ForwardContext ctx{true, m.cfg.dropout, &rng};
            auto loss = window_loss(m, train, idx, ytr, weights, ctx);
            loss.backward();
            opt.step();
            total += loss.item() * static_cast<double>(idx.size());
        }
        return total / static_cast<double>(train.count);
    };
    std::size_t epoch = 0;
    double last_train = 0;
    auto train_and_remember = [&](std::size_t e) { return last_train = epoch_fn(e); };
    auto val_fn = [&] {
        const double v = mean_loss(m, val, yva);
        if (log) log(epoch, last_train, v);
        ++epoch;
        return v;
    };
    return nn::fit_with_early_stopping(m.cfg.epochs_max, m.cfg.patience, 0.0, train_and_remember, val_fn, params);
}

inline nlohmann::json model_json(const LstmClassifierConfig& c) { return {{"model", "lstm"}, {"config", c}}; }

inline void save_classifier(const std::string& path, const LstmClassifier& m,
                            nlohmann::json extra = nlohmann::json::object()) {
    nn::save_checkpoint(path, nn::snapshot(model_json(m.cfg), m.params(), nullptr, m.cfg.seed, std::move(extra)));
}

inline LstmClassifier load_classifier(const std::string& path, nlohmann::json* extra = nullptr) {
    auto ck = nn::load_checkpoint(path);
    require(ck.config.value("model", "") == "lstm", ErrorCode::CheckpointMismatch, path + " is not an lstm checkpoint");
    auto m = LstmClassifier::init(ck.config.at("config").get<LstmClassifierConfig>());
    auto params = m.params();
    nn::restore(ck, nn::config_hash(model_json(m.cfg)), params);
    if (extra) *extra = ck.extra;
    return m;
}

/// Outcome of classifying one generated packet.
struct PredictedLabel {
    bool rejected = false;  // the line did not parse back into a feature row
    int label = -1;
    std::vector<double> probs;
};

/// Generated lines are parsed with the stored feature params, scaled once, appended
/// to their flow's recent scaled rows, and the resulting window classified.
/// `history[i]` holds the already-scaled rows preceding generated line i (oldest first).
inline std::vector<PredictedLabel> classify_predicted(const LstmClassifier& m, const features::FeatureParams& fp,
                                                      const std::vector<std::optional<std::string>>& generated,
                                                      const std::vector<std::vector<std::vector<double>>>& history) {
    require(history.empty() || history.size() == generated.size(), ErrorCode::LengthMismatch,
            "history must match generated lines");
    std::vector<PredictedLabel> out(generated.size());
    features::Windows w;
    w.window = m.cfg.window;
    w.features = m.cfg.features;
    std::vector<std::size_t> slot;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        std::optional<std::vector<double>> row;
        if (generated[i]) {
            if (auto cells = text::parse_packet_line(*generated[i], fp.selected_index)) row = features::transform_cells(fp, *cells);
        }
        if (!row) {
            out[i].rejected = true;
            continue;
        }
        std::vector<std::vector<double>> rows;
        if (!history.empty()) rows = history[i];
        rows.push_back(*row);
        const long pad = static_cast<long>(w.window) - static_cast<long>(rows.size());
        for (long k = 0; k < pad; ++k) w.data.insert(w.data.end(), w.features, 0.0);
        for (std::size_t k = rows.size() - std::min(rows.size(), w.window); k < rows.size(); ++k) {
            require(rows[k].size() == w.features, ErrorCode::ShapeMismatch, "history row width");
            w.data.insert(w.data.end(), rows[k].begin(), rows[k].end());
        }
        w.labels.push_back(Label::Unlabeled);
        w.flow_index.push_back(0);
        w.padded.push_back(pad > 0);
        ++w.count;
        slot.push_back(i);
    }
    if (w.count == 0) return out;
    auto probs = predict_proba(m, w);
    for (std::size_t k = 0; k < slot.size(); ++k) {
        out[slot[k]].probs = probs[k];
        out[slot[k]].label = argmax(probs[k]);
    }
    return out;
}

}  // namespace nipred::lstm
