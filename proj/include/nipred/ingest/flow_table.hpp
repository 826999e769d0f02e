#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <tuple>

namespace nipred::ingest {

using Address = std::array<std::uint8_t, 16>;

struct FiveTuple {
    Address src{};
    Address dst{};
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint16_t proto = 0;  // IP protocol number, or the ethertype for non-IP frames
    auto operator<=>(const FiveTuple&) const = default;
};

/// Direction-free flow key: the two endpoints are stored in sorted order.
struct FlowKey {
    Address lo_addr{};
    Address hi_addr{};
    std::uint16_t lo_port = 0;
    std::uint16_t hi_port = 0;
    std::uint16_t proto = 0;
    auto operator<=>(const FlowKey&) const = default;

    static FlowKey from(const FiveTuple& t) {
        FlowKey k;
        k.proto = t.proto;
        const bool forward = std::tie(t.src, t.src_port) <= std::tie(t.dst, t.dst_port);
        k.lo_addr = forward ? t.src : t.dst;
        k.lo_port = forward ? t.src_port : t.dst_port;
        k.hi_addr = forward ? t.dst : t.src;
        k.hi_port = forward ? t.dst_port : t.src_port;
        return k;
    }
};

struct FlowTable {
    std::map<FlowKey, std::uint32_t> index;
    std::uint32_t next_index = 0;
};

/// Existing index for a seen tuple (either direction), otherwise the next dense index.
inline std::uint32_t assign_flow(const FiveTuple& tuple, FlowTable& table) {
    auto [it, inserted] = table.index.try_emplace(FlowKey::from(tuple), table.next_index);
    if (inserted) ++table.next_index;
    return it->second;
}

}  // namespace nipred::ingest
