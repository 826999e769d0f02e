#pragma once

#include <cmath>
#include <array>
#include <cstdio>
#include <optional>
#include <tuple>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/core/format.hpp"
#include "nipred/metrics/metrics.hpp"

namespace nipred::metrics {

inline constexpr const char* kReportSchema = "nipred.eval/1";

/// Non-finite values (the +inf first ROC threshold) become null.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

/// Keys are emitted in a fixed order (ordered_json), so equal reports give equal bytes.
inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["classes"] = r.class_names;
    j["confusion"] = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < r.confusion.classes; ++t) {
        auto row = nlohmann::ordered_json::array();
        for (std::size_t p = 0; p < r.confusion.classes; ++p) row.push_back(r.confusion.at(t, p));
        j["confusion"].push_back(row);
    }
    j["accuracy"] = r.accuracy;
    j["per_class"] = nlohmann::ordered_json::array();
    for (const auto& s : r.per_class) {
        nlohmann::ordered_json c;
        c["name"] = s.name;
        c["precision"] = s.precision;
        c["recall"] = s.recall;
        c["f1"] = s.f1;
        c["support"] = s.support;
        c["precision_undefined"] = s.precision_undefined;
        c["recall_undefined"] = s.recall_undefined;
        j["per_class"].push_back(c);
    }
    j["macro_avg"] = {{"precision", r.macro.precision}, {"recall", r.macro.recall}, {"f1", r.macro.f1}};
    j["weighted_avg"] = {{"precision", r.weighted.precision}, {"recall", r.weighted.recall}, {"f1", r.weighted.f1}};
    j["positive_class"] = r.class_names[r.positive_class];
    j["counts"] = {{"tp", r.tp}, {"tn", r.tn}, {"fp", r.fp}, {"fn", r.fn}};
    if (r.auc) {
        j["auc"] = *r.auc;
        auto pts = nlohmann::ordered_json::array();
        for (const auto& p : r.roc) pts.push_back({finite_or_null(p.threshold), p.fpr, p.tpr});
        j["roc"] = pts;
    }
    return j;
}

inline std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Classification-report layout: one row per class, then accuracy and the averages.
inline std::string render_text(const EvalReport& r) {
    std::size_t name_w = std::string("weighted avg").size();
    for (const auto& n : r.class_names) name_w = std::max(name_w, n.size());
    auto cell = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
    std::ostringstream o;
    o << cell("", name_w) << cell("precision", 12) << cell("recall", 10) << cell("f1-score", 10) << cell("support", 10)
      << "\n\n";
    for (const auto& s : r.per_class)
        o << cell(s.name, name_w) << cell(fixed(s.precision), 12) << cell(fixed(s.recall), 10) << cell(fixed(s.f1), 10)
          << cell(std::to_string(s.support), 10) << "\n";
    const auto n = std::to_string(r.confusion.total());
    o << "\n"
      << cell("accuracy", name_w) << cell("", 12) << cell("", 10) << cell(fixed(r.accuracy), 10) << cell(n, 10) << "\n";
    o << cell("macro avg", name_w) << cell(fixed(r.macro.precision), 12) << cell(fixed(r.macro.recall), 10)
      << cell(fixed(r.macro.f1), 10) << cell(n, 10) << "\n";
    o << cell("weighted avg", name_w) << cell(fixed(r.weighted.precision), 12) << cell(fixed(r.weighted.recall), 10)
      << cell(fixed(r.weighted.f1), 10) << cell(n, 10) << "\n";
    if (r.auc) o << "\n" << cell("auc", name_w) << cell(fixed(*r.auc), 12) << "\n";
    return o.str();
}

inline void write_file(const std::string& path, const std::string& body) {
    if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    out << body;
    if (!out) fail(ErrorCode::IoFailure, "write failed for " + path);
}

inline std::string roc_csv(const std::vector<RocPoint>& pts) {
    std::ostringstream o;
    o << "threshold,fpr,tpr\n";
    for (const auto& p : pts) o << (std::isfinite(p.threshold) ? format_number(p.threshold) : "inf") << ','
                                << format_number(p.fpr) << ',' << format_number(p.tpr) << '\n';
    return o.str();
}

struct Series {
    std::string name;
    std::vector<double> x, y;
    std::string color;
};

/// Minimal line chart: axes, ticks at the ends, one polyline per series, legend.
inline std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::vector<Series>& series, std::optional<std::array<double, 4>> bounds = {}) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (bounds) std::tie(x0, x1, y0, y1) = std::tuple((*bounds)[0], (*bounds)[1], (*bounds)[2], (*bounds)[3]);
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    const double W = 480, H = 360, L = 60, R = 20, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\">" << ylabel << "</text>\n";
    o << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fixed(x0, 2) << "</text>\n";
    o << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fixed(x1, 2) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << fixed(y0, 2) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << fixed(y1, 2) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << fixed(px(s.x[i]), 2) << ',' << fixed(py(s.y[i]), 2);
        o << "\"/>\n";
        o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 + 16 * static_cast<double>(k) << "\" text-anchor=\"end\" fill=\""
          << s.color << "\">" << s.name << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline std::string roc_svg(const std::vector<RocPoint>& pts, double auc) {
    Series curve{"ROC (AUC " + fixed(auc) + ")", {}, {}, "#1f77b4"};
    for (const auto& p : pts) {
        curve.x.push_back(p.fpr);
        curve.y.push_back(p.tpr);
    }
    Series chance{"chance", {0, 1}, {0, 1}, "#999999"};
    return svg_chart("ROC curve", "false positive rate", "true positive rate", {curve, chance},
                     std::array<double, 4>{0, 1, 0, 1});
}

inline std::string loss_svg(const std::vector<double>& train, const std::vector<double>& val) {
    Series a{"train", {}, train, "#1f77b4"}, b{"validation", {}, val, "#d62728"};
    for (std::size_t i = 0; i < train.size(); ++i) a.x.push_back(static_cast<double>(i + 1));
    for (std::size_t i = 0; i < val.size(); ++i) b.x.push_back(static_cast<double>(i + 1));
    return svg_chart("Loss per epoch", "epoch", "loss", {a, b});
}

struct RenderOptions {
    bool plots = true;
    std::vector<double> train_loss, val_loss;  // loss plot when both are non-empty
    nlohmann::ordered_json provenance;          // added to the JSON report when set
};

/// Writes <stem>.json, <stem>.txt and, when requested, <stem>_roc.csv, <stem>_roc.svg
/// and <stem>_loss.svg. Returns the paths written.
inline std::vector<std::string> render_report(const EvalReport& r, const std::string& stem, const RenderOptions& opt = {}) {
    std::vector<std::string> paths;
    auto put = [&](const std::string& suffix, const std::string& body) {
        write_file(stem + suffix, body);
        paths.push_back(stem + suffix);
    };
    auto j = to_json(r);
    if (!opt.provenance.is_null()) j["provenance"] = opt.provenance;
    put(".json", j.dump(2) + "\n");
    put(".txt", render_text(r));
    if (r.auc) put("_roc.csv", roc_csv(r.roc));
    if (opt.plots) {
        if (r.auc) put("_roc.svg", roc_svg(r.roc, *r.auc));
        if (!opt.train_loss.empty() && !opt.val_loss.empty()) put("_loss.svg", loss_svg(opt.train_loss, opt.val_loss));
    }
    return paths;
}

}  // namespace nipred::metrics
