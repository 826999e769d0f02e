#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nipred/core/error.hpp"
#include "nipred/core/format.hpp"
#include "nipred/ingest/flow_table.hpp"
#include "nipred/ingest/record.hpp"

namespace nipred::ingest {

struct ParseResult {
    std::vector<PacketRecord> records;
    std::size_t packets_seen = 0;  // complete or truncated packet records in the file
    std::size_t skipped = 0;
};

namespace detail {

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    std::uint32_t u32(std::size_t off) const {
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + off, 4);
        if constexpr (std::endian::native == std::endian::big) v = bswap32(v);
        return swap_ ? bswap32(v) : v;
    }
    std::uint16_t u16(std::size_t off) const {
        std::uint16_t v;
        std::memcpy(&v, bytes_.data() + off, 2);
        if constexpr (std::endian::native == std::endian::big) v = bswap16(v);
        return swap_ ? bswap16(v) : v;
    }

    static std::uint32_t bswap32(std::uint32_t v) {
        return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
    }
    static std::uint16_t bswap16(std::uint16_t v) { return static_cast<std::uint16_t>((v >> 8) | (v << 8)); }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
};

inline std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline double ttl_initial_guess(double ttl) {
    for (double cand : {32.0, 64.0, 128.0, 255.0})
        if (ttl <= cand) return cand;
    return 255.0;
}

inline bool ipv4_private(const std::uint8_t* a) {
    return a[0] == 10 || (a[0] == 172 && (a[1] & 0xf0) == 16) || (a[0] == 192 && a[1] == 168);
}

inline bool ipv4_checksum_ok(const std::uint8_t* hdr, std::size_t len) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2) sum += be16(hdr + i);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return sum == 0xffff;
}

/// Per-flow state behind the iat and direction features.
struct FlowState {
    double last_ts = 0.0;
    Address initiator{};
    std::uint16_t initiator_port = 0;
};

enum class LinkType : std::uint32_t { Null = 0, Ethernet = 1, Raw = 101, LinuxSll = 113 };

/// Decodes one frame. Returns nullopt when the captured bytes cannot hold the
/// headers they announce.
inline std::optional<std::pair<PacketRecord, FiveTuple>> decode_frame(std::span<const std::uint8_t> frame,
                                                                       std::uint32_t orig_len,
                                                                       std::uint32_t link) {
    PacketRecord r;
    FiveTuple tuple;
    const std::uint8_t* p = frame.data();
    const std::size_t n = frame.size();
    std::size_t off = 0;
    std::uint16_t ethertype = 0;

    r[frame_len] = orig_len;
    r[cap_len] = static_cast<double>(n);
    r[vlan_tagged] = 0;

    if (link == static_cast<std::uint32_t>(LinkType::Ethernet)) {
        if (n < 14) return std::nullopt;
        const std::uint8_t* dst = p;
        const std::uint8_t* src = p + 6;
        bool bcast = true;
        for (int i = 0; i < 6; ++i) bcast = bcast && dst[i] == 0xff;
        r[eth_dst_bcast] = bcast ? 1 : 0;
        r[eth_dst_mcast] = (dst[0] & 0x01) ? 1 : 0;
        r[eth_src_local] = (src[0] & 0x02) ? 1 : 0;
        ethertype = be16(p + 12);
        off = 14;
        while (ethertype == 0x8100 || ethertype == 0x88a8) {
            if (n < off + 4) return std::nullopt;
            if (r[vlan_tagged] == 0) r[vlan_id] = be16(p + off) & 0x0fff;
            r[vlan_tagged] = 1;
            ethertype = be16(p + off + 2);
            off += 4;
        }
        std::memcpy(tuple.src.data(), src, 6);
        std::memcpy(tuple.dst.data(), dst, 6);
    } else if (link == static_cast<std::uint32_t>(LinkType::LinuxSll)) {
        if (n < 16) return std::nullopt;
        ethertype = be16(p + 14);
        off = 16;
    } else if (link == static_cast<std::uint32_t>(LinkType::Raw)) {
        if (n < 1) return std::nullopt;
        ethertype = (p[0] >> 4) == 6 ? 0x86dd : 0x0800;
    } else if (link == static_cast<std::uint32_t>(LinkType::Null)) {
        if (n < 5) return std::nullopt;
        ethertype = (p[4] >> 4) == 6 ? 0x86dd : 0x0800;
        off = 4;
    } else {
        return std::nullopt;
    }
    r[l2_hdr_len] = static_cast<double>(off);

    double l3_hdr = 0, l4_hdr = 0, l3_total = 0;
    int proto = -1;
    std::size_t l4_off = 0;
    bool later_fragment = false;

    if (ethertype == 0x0800) {
        r[eth_type] = EthIpv4;
        if (n < off + 20) return std::nullopt;
        const std::uint8_t* ip = p + off;
        if ((ip[0] >> 4) != 4) return std::nullopt;
        const std::size_t ihl = (ip[0] & 0x0f) * 4u;
        if (ihl < 20 || n < off + ihl) return std::nullopt;
        r[ip_version] = 4;
        r[ip_hdr_len] = static_cast<double>(ihl);
        r[ip_dscp] = ip[1] >> 2;
        r[ip_ecn] = ip[1] & 0x3;
        r[ip_len] = be16(ip + 2);
        r[ip_id] = be16(ip + 4);
        const std::uint16_t frag = be16(ip + 6);
        r[ip_df] = (frag & 0x4000) ? 1 : 0;
        r[ip_mf] = (frag & 0x2000) ? 1 : 0;
        r[ip_frag_off] = frag & 0x1fff;
        r[ip_is_frag] = (r[ip_mf] == 1 || r[ip_frag_off] > 0) ? 1 : 0;
        later_fragment = (frag & 0x1fff) != 0;
        r[ttl] = ip[8];
        proto = ip[9];
        r[ip_opt_len] = static_cast<double>(ihl - 20);
        r[ip_cksum_ok] = ipv4_checksum_ok(ip, ihl) ? 1 : 0;
        r[ip_src_private] = ipv4_private(ip + 12) ? 1 : 0;
        r[ip_dst_private] = ipv4_private(ip + 16) ? 1 : 0;
        r[ip_dst_mcast] = (ip[16] & 0xf0) == 0xe0 ? 1 : 0;
        tuple = {};
        std::memcpy(tuple.src.data(), ip + 12, 4);
        std::memcpy(tuple.dst.data(), ip + 16, 4);
        l3_hdr = static_cast<double>(ihl);
        l3_total = r[ip_len];
        l4_off = off + ihl;
    } else if (ethertype == 0x86dd) {
        r[eth_type] = EthIpv6;
        if (n < off + 40) return std::nullopt;
        const std::uint8_t* ip = p + off;
        if ((ip[0] >> 4) != 6) return std::nullopt;
        r[ip_version] = 6;
        const std::uint32_t first = be32(ip);
        r[ip_dscp] = (first >> 22) & 0x3f;
        r[ip_ecn] = (first >> 20) & 0x3;
        r[ipv6_flow_label] = first & 0xfffff;
        r[ip_len] = 40.0 + be16(ip + 4);
        r[ttl] = ip[7];
        r[ip_src_private] = (ip[8] & 0xfe) == 0xfc ? 1 : 0;
        r[ip_dst_private] = (ip[24] & 0xfe) == 0xfc ? 1 : 0;
        r[ip_dst_mcast] = ip[24] == 0xff ? 1 : 0;
        tuple = {};
        std::memcpy(tuple.src.data(), ip + 8, 16);
        std::memcpy(tuple.dst.data(), ip + 24, 16);
        int next = ip[6];
        std::size_t cur = off + 40;
        int ext = 0;
        r[ip_mf] = 0;
        r[ip_frag_off] = 0;
        while (next == 0 || next == 43 || next == 60 || next == 44 || next == 51) {
            if (n < cur + 8) return std::nullopt;
            const std::uint8_t* e = p + cur;
            std::size_t len = 0;
            if (next == 44) {
                len = 8;
                const std::uint16_t fo = be16(e + 2);
                r[ip_frag_off] = fo >> 3;
                r[ip_mf] = fo & 1;
                later_fragment = (fo >> 3) != 0;
            } else if (next == 51) {
                len = (e[1] + 2u) * 4u;
            } else {
                len = (e[1] + 1u) * 8u;
            }
            next = e[0];
            cur += len;
            ++ext;
        }
        r[ip_is_frag] = (r[ip_mf] == 1 || r[ip_frag_off] > 0) ? 1 : 0;
        r[ipv6_ext_hdrs] = ext;
        proto = next;
        l3_hdr = static_cast<double>(cur - off);
        r[ip_hdr_len] = l3_hdr;
        r[ip_opt_len] = l3_hdr - 40;
        l3_total = r[ip_len];
        l4_off = cur;
    } else if (ethertype == 0x0806) {
        r[eth_type] = EthArp;
        if (n >= off + 8) r[arp_opcode] = be16(p + off + 6);
    } else {
        r[eth_type] = EthOther;
    }

    if (proto >= 0) {
        r[ttl_initial] = ttl_initial_guess(r[ttl]);
        r[ttl_hops] = r[ttl_initial] - r[ttl];
        r[ip_proto] = proto;
        tuple.proto = static_cast<std::uint16_t>(proto);
        const std::uint8_t* l4 = p + l4_off;
        if (proto == 6) {
            r[l4_proto] = ProtoTcp;
            if (!later_fragment) {
                if (n < l4_off + 20) return std::nullopt;
                const std::size_t doff = (l4[12] >> 4) * 4u;
                if (doff < 20 || n < l4_off + doff) return std::nullopt;
                tuple.src_port = be16(l4);
                tuple.dst_port = be16(l4 + 2);
                r[tcp_seq] = be32(l4 + 4);
                r[tcp_ack] = be32(l4 + 8);
                r[tcp_hdr_len] = static_cast<double>(doff);
                const std::uint8_t flags = l4[13];
                r[tcp_flags] = flags;
                r[tcp_fin] = flags & 0x01 ? 1 : 0;
                r[tcp_syn] = flags & 0x02 ? 1 : 0;
                r[tcp_rst] = flags & 0x04 ? 1 : 0;
                r[tcp_psh] = flags & 0x08 ? 1 : 0;
                r[tcp_ackf] = flags & 0x10 ? 1 : 0;
                r[tcp_urg] = flags & 0x20 ? 1 : 0;
                r[tcp_ece] = flags & 0x40 ? 1 : 0;
                r[tcp_cwr] = flags & 0x80 ? 1 : 0;
                r[tcp_ns] = l4[12] & 0x01;
                r[tcp_flag_count] = std::popcount(flags);
                r[window_size] = be16(l4 + 14);
                r[tcp_zero_window] = r[window_size] == 0 ? 1 : 0;
                r[tcp_urg_ptr] = be16(l4 + 18);
                r[tcp_opt_len] = static_cast<double>(doff - 20);
                r[tcp_opt_sackok] = 0;
                r[tcp_opt_ts] = 0;
                r[tcp_opt_nops] = 0;
                for (std::size_t o = 20; o < doff;) {
                    const std::uint8_t kind = l4[o];
                    if (kind == 0) break;
                    if (kind == 1) {
                        r[tcp_opt_nops] += 1;
                        ++o;
                        continue;
                    }
                    if (o + 1 >= doff) break;
                    const std::uint8_t len = l4[o + 1];
                    if (len < 2 || o + len > doff) break;
                    if (kind == 2 && len == 4) r[tcp_opt_mss] = be16(l4 + o + 2);
                    if (kind == 3 && len == 3) r[tcp_opt_wscale] = l4[o + 2];
                    if (kind == 4) r[tcp_opt_sackok] = 1;
                    if (kind == 8) r[tcp_opt_ts] = 1;
                    o += len;
                }
                l4_hdr = static_cast<double>(doff);
            }
        } else if (proto == 17) {
            r[l4_proto] = ProtoUdp;
            if (!later_fragment) {
                if (n < l4_off + 8) return std::nullopt;
                tuple.src_port = be16(l4);
                tuple.dst_port = be16(l4 + 2);
                r[udp_len] = be16(l4 + 4);
                r[udp_zero_cksum] = be16(l4 + 6) == 0 ? 1 : 0;
                l4_hdr = 8;
            }
        } else if (proto == 1 || proto == 58) {
            r[l4_proto] = proto == 1 ? ProtoIcmp : ProtoIcmpv6;
            if (!later_fragment) {
                if (n < l4_off + 4) return std::nullopt;
                r[icmp_type] = l4[0];
                r[icmp_code] = l4[1];
                l4_hdr = 8;
            }
        } else {
            r[l4_proto] = ProtoOther;
        }
        if (proto == 6 || proto == 17) {
            if (!later_fragment) {
                r[src_port] = tuple.src_port;
                r[dst_port] = tuple.dst_port;
                r[sport_wellknown] = tuple.src_port < 1024 ? 1 : 0;
                r[dport_wellknown] = tuple.dst_port < 1024 ? 1 : 0;
                r[sport_ephemeral] = tuple.src_port >= 49152 ? 1 : 0;
                r[dport_ephemeral] = tuple.dst_port >= 49152 ? 1 : 0;
            }
        }
        r[l4_hdr_len] = l4_hdr;
        r[header_len] = l3_hdr + l4_hdr;
        r[payload_len] = std::max(0.0, l3_total - l3_hdr - l4_hdr);
    } else {
        r[l4_proto] = ProtoNone;
        tuple.proto = ethertype;
        r[header_len] = 0;
        r[payload_len] = std::max(0.0, static_cast<double>(orig_len) - r[l2_hdr_len]);
    }
    r[payload_ratio] = orig_len > 0 ? quantize6(r[payload_len] / orig_len) : 0.0;
    return std::make_pair(r, tuple);
}

}  // namespace detail

/// Decodes a classic pcap capture held in memory.
inline ParseResult parse_pcap_bytes(std::span<const std::uint8_t> bytes, Label label = Label::Unlabeled) {
    if (bytes.size() < 24) fail(ErrorCode::MalformedCapture, "truncated global header");
    std::uint32_t magic;
    std::memcpy(&magic, bytes.data(), 4);
    if constexpr (std::endian::native == std::endian::big) magic = detail::ByteReader::bswap32(magic);
    bool swap = false, nanos = false;
    switch (magic) {
        case 0xa1b2c3d4: break;
        case 0xd4c3b2a1: swap = true; break;
        case 0xa1b23c4d: nanos = true; break;
        case 0x4d3cb2a1: swap = true; nanos = true; break;
        default: fail(ErrorCode::MalformedCapture, "bad magic number");
    }
    detail::ByteReader rd(bytes, swap);
    const std::uint32_t link = rd.u32(20) & 0x0fffffff;

    ParseResult out;
    FlowTable table;
    std::vector<detail::FlowState> flows;
    std::size_t off = 24;
    while (off < bytes.size()) {
        ++out.packets_seen;
        if (bytes.size() - off < 16) {
            ++out.skipped;
            break;
        }
        const std::uint32_t sec = rd.u32(off), frac = rd.u32(off + 4);
        const std::uint32_t incl = rd.u32(off + 8), orig = rd.u32(off + 12);
        off += 16;
        if (incl > bytes.size() - off) {
            ++out.skipped;
            break;
        }
        auto decoded = detail::decode_frame(bytes.subspan(off, incl), orig, link);
        off += incl;
        if (!decoded) {
            ++out.skipped;
            continue;
        }
        auto& [rec, tuple] = *decoded;
        rec.timestamp = sec + frac * (nanos ? 1e-9 : 1e-6);
        rec.label = label;
        rec.flow_index = assign_flow(tuple, table);
        if (rec.flow_index == flows.size()) {
            flows.push_back({rec.timestamp, tuple.src, tuple.src_port});
        }
        auto& st = flows[rec.flow_index];
        rec[iat] = quantize6(std::max(0.0, rec.timestamp - st.last_ts));
        rec[direction] = (tuple.src == st.initiator && tuple.src_port == st.initiator_port) ? 0 : 1;
        st.last_ts = rec.timestamp;
        out.records.push_back(rec);
    }
    return out;
}

inline ParseResult parse_pcap(const std::string& path, Label label = Label::Unlabeled) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open capture " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_pcap_bytes(bytes, label);
}

}  // namespace nipred::ingest
