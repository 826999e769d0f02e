#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nipred/core/error.hpp"
#include "nipred/core/format.hpp"
#include "nipred/ingest/record.hpp"

namespace nipred::ingest {

/// Header: the 71 manifest columns in order, then timestamp, flow_index, label.
inline std::vector<std::string> csv_header() {
    std::vector<std::string> cols;
    for (const auto& f : kManifest) cols.emplace_back(f.name);
    cols.emplace_back("timestamp");
    cols.emplace_back("flow_index");
    cols.emplace_back("label");
    return cols;
}

inline std::vector<std::string_view> split_view(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline void write_records_csv(std::ostream& out, const std::vector<PacketRecord>& records) {
    const auto header = csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    std::string line;
    for (const auto& r : records) {
        line.clear();
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            if (f) line += ',';
            if (!is_none(r.values[f])) line += render_cell(f, r.values[f]);
        }
        line += ',';
        line += format_number(r.timestamp);
        line += ',';
        line += std::to_string(r.flow_index);
        line += ',';
        line += label_name(r.label);
        out << line << '\n';
    }
}

inline void write_records_csv(const std::string& path, const std::vector<PacketRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    write_records_csv(out, records);
}

/// Parses one cell back into the record encoding. Empty means none. A categorical
/// "none" is the l4_proto category, not a missing value.
inline double parse_cell(std::size_t feature, std::string_view cell) {
    if (cell.empty()) return kNone;
    auto cats = categories_of(feature);
    if (!cats.empty()) {
        for (std::size_t i = 0; i < cats.size(); ++i)
            if (cats[i] == cell) return static_cast<double>(i);
        fail(ErrorCode::InvalidArgument, "unknown category '" + std::string(cell) + "'");
    }
    if (cell == "none") return kNone;
    auto v = parse_number(cell);
    if (!v) fail(ErrorCode::InvalidArgument, "bad number '" + std::string(cell) + "'");
    return *v;
}

inline std::vector<PacketRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::IoFailure, "empty packet CSV");
    const auto header = csv_header();
    const auto cols = split_view(line, ',');
    if (cols.size() != header.size()) fail(ErrorCode::InvalidArgument, "packet CSV header has wrong column count");
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] != header[i]) fail(ErrorCode::InvalidArgument, "unexpected column '" + std::string(cols[i]) + "'");

    std::vector<PacketRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_view(line, ',');
        if (cells.size() != header.size())
            fail(ErrorCode::InvalidArgument, "row " + std::to_string(lineno) + " has wrong column count");
        PacketRecord r;
        for (std::size_t f = 0; f < kFeatureCount; ++f) r.values[f] = parse_cell(f, cells[f]);
        auto ts = parse_number(cells[kFeatureCount]);
        auto fi = parse_number(cells[kFeatureCount + 1]);
        auto lb = parse_label(cells[kFeatureCount + 2]);
        if (!ts || !fi || !lb) fail(ErrorCode::InvalidArgument, "bad metadata on row " + std::to_string(lineno));
        r.timestamp = *ts;
        r.flow_index = static_cast<std::uint32_t>(*fi);
        r.label = *lb;
        out.push_back(r);
    }
    return out;
}

inline std::vector<PacketRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path);
    return read_records_csv(in);
}

}  // namespace nipred::ingest
