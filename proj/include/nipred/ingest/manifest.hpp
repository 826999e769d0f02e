#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace nipred::ingest {

enum class Layer { L2, L3, L4, Derived };
enum class Kind { Numeric, Categorical };

struct FeatureSpec {
    std::string_view name;
    Layer layer;
    Kind kind;
    std::string_view unit;
};

/// Positional index of every raw feature. The order is the CSV column order.
enum Feature : std::size_t {
    frame_len, cap_len, eth_type, eth_dst_bcast, eth_dst_mcast, eth_src_local, vlan_tagged, vlan_id,
    l2_hdr_len, arp_opcode,
    ip_version, ip_hdr_len, ip_dscp, ip_ecn, ip_len, ip_id, ip_df, ip_mf, ip_frag_off, ip_is_frag,
    ttl, ttl_initial, ttl_hops, ip_proto, ip_opt_len, ip_cksum_ok, ip_src_private, ip_dst_private,
    ip_dst_mcast, ipv6_flow_label, ipv6_ext_hdrs, l4_proto,
    src_port, dst_port, sport_wellknown, dport_wellknown, sport_ephemeral, dport_ephemeral,
    tcp_seq, tcp_ack, tcp_hdr_len, tcp_flags, tcp_fin, tcp_syn, tcp_rst, tcp_psh, tcp_ackf, tcp_urg,
    tcp_ece, tcp_cwr, tcp_ns, tcp_flag_count, window_size, tcp_zero_window, tcp_urg_ptr, tcp_opt_len,
    tcp_opt_mss, tcp_opt_wscale, tcp_opt_sackok, tcp_opt_ts, tcp_opt_nops, udp_len, udp_zero_cksum,
    icmp_type, icmp_code,
    l4_hdr_len, header_len, payload_len, payload_ratio, iat, direction,
    kFeatureCount
};

inline constexpr std::array<FeatureSpec, kFeatureCount> kManifest = {{
    {"frame_len", Layer::L2, Kind::Numeric, "bytes"},
    {"cap_len", Layer::L2, Kind::Numeric, "bytes"},
    {"eth_type", Layer::L2, Kind::Categorical, "token"},
    {"eth_dst_bcast", Layer::L2, Kind::Numeric, "flag"},
    {"eth_dst_mcast", Layer::L2, Kind::Numeric, "flag"},
    {"eth_src_local", Layer::L2, Kind::Numeric, "flag"},
    {"vlan_tagged", Layer::L2, Kind::Numeric, "flag"},
    {"vlan_id", Layer::L2, Kind::Numeric, "id"},
    {"l2_hdr_len", Layer::L2, Kind::Numeric, "bytes"},
    {"arp_opcode", Layer::L2, Kind::Numeric, "code"},
    {"ip_version", Layer::L3, Kind::Numeric, "version"},
    {"ip_hdr_len", Layer::L3, Kind::Numeric, "bytes"},
    {"ip_dscp", Layer::L3, Kind::Numeric, "code"},
    {"ip_ecn", Layer::L3, Kind::Numeric, "code"},
    {"ip_len", Layer::L3, Kind::Numeric, "bytes"},
    {"ip_id", Layer::L3, Kind::Numeric, "id"},
    {"ip_df", Layer::L3, Kind::Numeric, "flag"},
    {"ip_mf", Layer::L3, Kind::Numeric, "flag"},
    {"ip_frag_off", Layer::L3, Kind::Numeric, "8-byte units"},
    {"ip_is_frag", Layer::L3, Kind::Numeric, "flag"},
    {"ttl", Layer::L3, Kind::Numeric, "hops"},
    {"ttl_initial", Layer::L3, Kind::Numeric, "hops"},
    {"ttl_hops", Layer::L3, Kind::Numeric, "hops"},
    {"ip_proto", Layer::L3, Kind::Numeric, "protocol number"},
    {"ip_opt_len", Layer::L3, Kind::Numeric, "bytes"},
    {"ip_cksum_ok", Layer::L3, Kind::Numeric, "flag"},
    {"ip_src_private", Layer::L3, Kind::Numeric, "flag"},
    {"ip_dst_private", Layer::L3, Kind::Numeric, "flag"},
    {"ip_dst_mcast", Layer::L3, Kind::Numeric, "flag"},
    {"ipv6_flow_label", Layer::L3, Kind::Numeric, "id"},
    {"ipv6_ext_hdrs", Layer::L3, Kind::Numeric, "count"},
    {"l4_proto", Layer::L3, Kind::Categorical, "token"},
    {"src_port", Layer::L4, Kind::Numeric, "port"},
    {"dst_port", Layer::L4, Kind::Numeric, "port"},
    {"sport_wellknown", Layer::L4, Kind::Numeric, "flag"},
    {"dport_wellknown", Layer::L4, Kind::Numeric, "flag"},
    {"sport_ephemeral", Layer::L4, Kind::Numeric, "flag"},
    {"dport_ephemeral", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_seq", Layer::L4, Kind::Numeric, "sequence number"},
    {"tcp_ack", Layer::L4, Kind::Numeric, "sequence number"},
    {"tcp_hdr_len", Layer::L4, Kind::Numeric, "bytes"},
    {"tcp_flags", Layer::L4, Kind::Numeric, "bitmask"},
    {"tcp_fin", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_syn", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_rst", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_psh", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_ackf", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_urg", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_ece", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_cwr", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_ns", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_flag_count", Layer::L4, Kind::Numeric, "count"},
    {"window_size", Layer::L4, Kind::Numeric, "bytes"},
    {"tcp_zero_window", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_urg_ptr", Layer::L4, Kind::Numeric, "offset"},
    {"tcp_opt_len", Layer::L4, Kind::Numeric, "bytes"},
    {"tcp_opt_mss", Layer::L4, Kind::Numeric, "bytes"},
    {"tcp_opt_wscale", Layer::L4, Kind::Numeric, "shift"},
    {"tcp_opt_sackok", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_opt_ts", Layer::L4, Kind::Numeric, "flag"},
    {"tcp_opt_nops", Layer::L4, Kind::Numeric, "count"},
    {"udp_len", Layer::L4, Kind::Numeric, "bytes"},
    {"udp_zero_cksum", Layer::L4, Kind::Numeric, "flag"},
    {"icmp_type", Layer::L4, Kind::Numeric, "code"},
    {"icmp_code", Layer::L4, Kind::Numeric, "code"},
    {"l4_hdr_len", Layer::L4, Kind::Numeric, "bytes"},
    {"header_len", Layer::Derived, Kind::Numeric, "bytes"},
    {"payload_len", Layer::Derived, Kind::Numeric, "bytes"},
    {"payload_ratio", Layer::Derived, Kind::Numeric, "fraction"},
    {"iat", Layer::Derived, Kind::Numeric, "seconds"},
    {"direction", Layer::Derived, Kind::Numeric, "flag"},
}};

static_assert(kManifest.size() == 71);

// Category vocabularies for the two categorical columns. Raw records store the
// index into these lists; the ordinal encoder works on the names.
inline constexpr std::array<std::string_view, 4> kEthTypeNames = {"ipv4", "ipv6", "arp", "other"};
inline constexpr std::array<std::string_view, 6> kL4ProtoNames = {"tcp", "udp", "icmp", "icmpv6", "other", "none"};

enum EthType : int { EthIpv4 = 0, EthIpv6 = 1, EthArp = 2, EthOther = 3 };
enum L4Proto : int { ProtoTcp = 0, ProtoUdp = 1, ProtoIcmp = 2, ProtoIcmpv6 = 3, ProtoOther = 4, ProtoNone = 5 };

inline std::span<const std::string_view> categories_of(std::size_t feature) {
    if (feature == eth_type) return kEthTypeNames;
    if (feature == l4_proto) return kL4ProtoNames;
    return {};
}

inline std::optional<std::size_t> feature_index(std::string_view name) {
    for (std::size_t i = 0; i < kManifest.size(); ++i)
        if (kManifest[i].name == name) return i;
    return std::nullopt;
}

inline std::string_view layer_name(Layer l) {
    switch (l) {
        case Layer::L2: return "L2";
        case Layer::L3: return "L3";
        case Layer::L4: return "L4";
        case Layer::Derived: return "derived";
    }
    return "?";
}

}  // namespace nipred::ingest
