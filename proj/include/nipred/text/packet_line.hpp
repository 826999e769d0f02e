#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nipred/core/error.hpp"
#include "nipred/ingest/csv.hpp"
#include "nipred/ingest/record.hpp"

namespace nipred::text {

inline constexpr std::string_view kFlowBeginText = "<|flow_begin|>";
inline constexpr std::string_view kFlowEndText = "<|flow_end|>";

/// "name=value" for each column, single-space separated, no newline.
inline std::string render_packet_line(const ingest::PacketRecord& r, std::span<const std::size_t> columns) {
    std::string line;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) line += ' ';
        line += ingest::kManifest[columns[i]].name;
        line += '=';
        line += ingest::render_cell(columns[i], r.values[columns[i]]);
    }
    return line;
}

namespace detail {
inline bool valid_token(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    return true;
}
}  // namespace detail

/// Cell strings of a packet line, or nullopt unless the line names exactly the
/// expected columns in order with well-formed values.
inline std::optional<std::vector<std::string>> parse_packet_line(std::string_view line,
                                                                 std::span<const std::size_t> columns) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    const auto fields = ingest::split_view(line, ' ');
    if (fields.size() != columns.size()) return std::nullopt;
    std::vector<std::string> cells;
    cells.reserve(columns.size());
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos) return std::nullopt;
        if (fields[i].substr(0, eq) != ingest::kManifest[columns[i]].name) return std::nullopt;
        const auto value = fields[i].substr(eq + 1);
        if (value != "none") {
            if (ingest::kManifest[columns[i]].kind == ingest::Kind::Categorical) {
                if (!detail::valid_token(value)) return std::nullopt;
            } else if (!parse_number(value)) {
                return std::nullopt;
            }
        }
        cells.emplace_back(value);
    }
    return cells;
}

/// Record values for the given columns from a parsed line. Other columns stay none.
inline std::optional<ingest::PacketRecord> record_from_line(std::string_view line, std::span<const std::size_t> columns) {
    auto cells = parse_packet_line(line, columns);
    if (!cells) return std::nullopt;
    ingest::PacketRecord r;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        try {
            r.values[columns[i]] = ingest::parse_cell(columns[i], (*cells)[i]);
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    return r;
}

/// FLOW_BEGIN line, one line per packet, FLOW_END (no trailing newline).
inline std::string serialize_flow(std::span<const ingest::PacketRecord> records, std::span<const std::size_t> columns) {
    for (const auto& r : records)
        if (r.flow_index != records.front().flow_index)
            fail(ErrorCode::MixedFlows, "records span flows " + std::to_string(records.front().flow_index) + " and " +
                                            std::to_string(r.flow_index));
    std::string out(kFlowBeginText);
    out += '\n';
    for (const auto& r : records) {
        out += render_packet_line(r, columns);
        out += '\n';
    }
    out += kFlowEndText;
    return out;
}

/// Packet lines of one serialized flow.
inline std::optional<std::vector<std::string>> flow_lines(std::string_view text) {
    const auto lines = ingest::split_view(text, '\n');
    if (lines.size() < 2 || lines.front() != kFlowBeginText || lines.back() != kFlowEndText) return std::nullopt;
    std::vector<std::string> out;
    for (std::size_t i = 1; i + 1 < lines.size(); ++i) out.emplace_back(lines[i]);
    return out;
}

/// Flows of a corpus made of serialized flows joined by newlines.
inline std::optional<std::vector<std::vector<std::string>>> split_corpus(std::string_view text) {
    std::vector<std::vector<std::string>> flows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] == '\n') {
            ++pos;
            continue;
        }
        const auto end = text.find(kFlowEndText, pos);
        if (end == std::string_view::npos) return std::nullopt;
        auto lines = flow_lines(text.substr(pos, end + kFlowEndText.size() - pos));
        if (!lines) return std::nullopt;
        flows.push_back(std::move(*lines));
        pos = end + kFlowEndText.size();
    }
    return flows;
}

}  // namespace nipred::text
