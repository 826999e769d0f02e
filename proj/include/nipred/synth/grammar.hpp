#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/core/format.hpp"
#include "nipred/core/rng.hpp"
#include "nipred/ingest/csv.hpp"
#include "nipred/ingest/pcap_reader.hpp"

namespace nipred::synth {

using ingest::PacketRecord;

struct GrammarSpec {
    std::uint64_t seed = 42;         // the grammar: which variants exist
    std::uint64_t stream_seed = 0;   // which flows are drawn from it; 0 reuses seed
    std::array<double, kNumClasses> class_mix = {0.5, 0.1, 0.1, 0.1, 0.1, 0.1};
    std::size_t variants_per_class = 3;
    std::size_t min_flow_len = 3;
    std::size_t max_flow_len = 9;
    std::size_t ports_per_variant = 1;  // client-port pool; >1 makes the next line depend on more than the current one
    double flow_spacing = 0.02;         // seconds between consecutive flow starts
    std::size_t min_separation = 3;

    void validate() const {
        double s = 0;
        for (double f : class_mix) {
            require(f >= 0, ErrorCode::ConfigError, "class_mix entries must be >= 0");
            s += f;
        }
        require(std::fabs(s - 1.0) < 1e-9, ErrorCode::ConfigError, "class_mix must sum to 1");
        require(variants_per_class >= 1 && ports_per_variant >= 1, ErrorCode::ConfigError, "grammar sizes");
        require(min_flow_len >= 2 && max_flow_len >= min_flow_len, ErrorCode::ConfigError, "grammar flow lengths");
        require(flow_spacing > 0, ErrorCode::ConfigError, "flow_spacing must be > 0");
    }
};

inline void to_json(nlohmann::json& j, const GrammarSpec& g) {
    j = {{"seed", g.seed}, {"stream_seed", g.stream_seed}, {"class_mix", g.class_mix}, {"variants_per_class", g.variants_per_class},
         {"min_flow_len", g.min_flow_len}, {"max_flow_len", g.max_flow_len},
         {"ports_per_variant", g.ports_per_variant}, {"flow_spacing", g.flow_spacing},
         {"min_separation", g.min_separation}};
}

inline void from_json(const nlohmann::json& j, GrammarSpec& g) {
    GrammarSpec d;
    g.seed = j.value("seed", d.seed);
    g.stream_seed = j.value("stream_seed", d.stream_seed);
    g.class_mix = j.value("class_mix", d.class_mix);
    g.variants_per_class = j.value("variants_per_class", d.variants_per_class);
    g.min_flow_len = j.value("min_flow_len", d.min_flow_len);
    g.max_flow_len = j.value("max_flow_len", d.max_flow_len);
    g.ports_per_variant = j.value("ports_per_variant", d.ports_per_variant);
    g.flow_spacing = j.value("flow_spacing", d.flow_spacing);
    g.min_separation = j.value("min_separation", d.min_separation);
}

/// One packet of a variant's fixed sequence, before the client port is filled in.
struct PacketTemplate {
    bool from_server = false;
    std::uint8_t flags = 0;
    int payload = 0;
    int ip_id = 0;
    int dscp = 0;
    bool df = true;
    int ttl = 64;
    int window = 0;
    int tcp_hdr = 20;
    std::uint32_t seq = 0, ack = 0;
    double iat = 0.0;
    bool local_mac = false;
};

struct Variant {
    Label label = Label::Normal;
    int server_port = 80;
    bool client_private = true, server_private = false;
    std::vector<int> client_ports;
    std::vector<PacketTemplate> packets;
};

/// Per-class signature: every packet of the class carries these envelopes.
struct ClassStyle {
    int ttl_initial;
    int window_lo, window_hi;
    std::vector<int> dscp;
    std::vector<int> server_ports;
    int payload_lo, payload_hi;
    bool attacker_external;  // client outside the private ranges
};

inline const ClassStyle& class_style(Label l) {
    static const std::array<ClassStyle, kNumClasses> styles = {{
        {64, 28000, 65535, {0, 0, 8}, {1883, 443, 80, 5683}, 2, 400, false},           // Normal
        {255, 512, 2048, {0}, {80, 443}, 0, 0, true},                                  // DDoS
        {128, 8192, 16384, {26, 18}, {80, 8080}, 300, 1400, false},                     // BrowserHijacking
        {128, 17000, 20000, {10}, {80, 8080, 8000}, 120, 700, true},                    // CommandInjection
        {128, 4000, 7000, {46, 34}, {80, 443}, 500, 1300, true},                         // XSS
        {255, 3000, 3900, {0, 4}, {4444, 31337, 6667}, 8, 90, true},                    // BackdoorMalware
    }};
    return styles[static_cast<std::size_t>(l)];
}

namespace detail {

inline int pick(const std::vector<int>& v, Rng& rng) { return v[uniform_index(rng, v.size())]; }
inline int between(int lo, int hi, Rng& rng) {
    return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Direction/flag skeleton of a flow of length n.
inline std::vector<std::pair<bool, std::uint8_t>> skeleton(Label l, std::size_t n, Rng& rng) {
    std::vector<std::pair<bool, std::uint8_t>> s;
    constexpr std::uint8_t SYN = 0x02, ACK = 0x10, PSH = 0x08, FIN = 0x01, RST = 0x04;
    if (l == Label::DDoS) {
        for (std::size_t i = 0; i < n; ++i) s.push_back({false, SYN});
        if (uniform_index(rng, 2)) s.back() = {true, RST | ACK};
        return s;
    }
    s.push_back({false, SYN});
    s.push_back({true, SYN | ACK});
    while (s.size() + 2 < n) {
        const bool server = s.size() % 2 == 1 ? uniform_index(rng, 3) != 0 : uniform_index(rng, 3) == 0;
        s.push_back({server, static_cast<std::uint8_t>(uniform_index(rng, 4) ? (PSH | ACK) : ACK)});
    }
    if (s.size() + 1 < n) s.push_back({false, FIN | ACK});
    if (s.size() < n) s.push_back({true, l == Label::BackdoorMalware ? RST : static_cast<std::uint8_t>(FIN | ACK)});
    s.resize(n);
    return s;
}

}  // namespace detail

/// The fixed per-variant packet sequences. Deterministic in the spec.
inline std::vector<Variant> build_variants(const GrammarSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<Variant> out;
    int next_id = 1;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto label = static_cast<Label>(c);
        const auto& st = class_style(label);
        for (std::size_t v = 0; v < spec.variants_per_class; ++v) {
            Variant var;
            var.label = label;
            var.server_port = st.server_ports[v % st.server_ports.size()];
            var.client_private = !st.attacker_external;
            var.server_private = st.attacker_external || uniform_index(rng, 2) == 0;
            for (std::size_t p = 0; p < spec.ports_per_variant; ++p)
                var.client_ports.push_back(detail::between(49152, 65535, rng));
            const auto n = static_cast<std::size_t>(
                detail::between(static_cast<int>(spec.min_flow_len), static_cast<int>(spec.max_flow_len), rng));
            const auto skel = detail::skeleton(label, n, rng);
            std::uint32_t cseq = 1, sseq = 1;
            const int hops_c = detail::between(1, 12, rng), hops_s = detail::between(1, 12, rng);
            for (std::size_t k = 0; k < n; ++k) {
                PacketTemplate t;
                t.from_server = skel[k].first;
                t.flags = skel[k].second;
                const bool syn = t.flags & 0x02;
                const bool carries = (t.flags & 0x08) != 0;
                t.payload = carries ? detail::between(std::max(1, st.payload_lo), std::max(1, st.payload_hi), rng) : 0;
                if (label == Label::DDoS) t.payload = detail::between(0, 1, rng) * 6;
                t.ip_id = (next_id++ * 7919) % 65536;
                t.dscp = detail::pick(st.dscp, rng);
                t.df = label != Label::DDoS;
                t.ttl = st.ttl_initial - (t.from_server ? hops_s : hops_c);
                t.window = detail::between(st.window_lo, st.window_hi, rng);
                t.tcp_hdr = syn ? 40 : (st.attacker_external ? 20 : 32);
                t.seq = t.from_server ? sseq : cseq;
                t.ack = (t.flags & 0x10) ? (t.from_server ? cseq : sseq) : 0;
                if (label == Label::DDoS) t.seq = static_cast<std::uint32_t>(uniform_index(rng, 4000000000ULL));
                (t.from_server ? sseq : cseq) += static_cast<std::uint32_t>(t.payload + (syn || (t.flags & 0x01) ? 1 : 0));
                t.iat = k == 0 ? 0.0 : quantize6(0.0005 * static_cast<double>(detail::between(1, 400, rng)));
                t.local_mac = label != Label::Normal && !t.from_server;
                var.packets.push_back(t);
            }
            out.push_back(std::move(var));
        }
    }
    return out;
}

/// Record fields for one packet, derived the same way the capture decoder derives them.
inline PacketRecord render(const Variant& var, const PacketTemplate& t, int client_port) {
    using namespace ingest;
    PacketRecord r;
    const int frame = 14 + 20 + t.tcp_hdr + t.payload;
    r[frame_len] = frame;
    r[cap_len] = frame;
    r[eth_type] = EthIpv4;
    r[eth_dst_bcast] = 0;
    r[eth_dst_mcast] = 0;
    r[eth_src_local] = t.local_mac ? 1 : 0;
    r[vlan_tagged] = 0;
    r[l2_hdr_len] = 14;
    r[ip_version] = 4;
    r[ip_hdr_len] = 20;
    r[ip_dscp] = t.dscp;
    r[ip_ecn] = 0;
    r[ip_len] = frame - 14;
    r[ip_id] = t.ip_id;
    r[ip_df] = t.df ? 1 : 0;
    r[ip_mf] = 0;
    r[ip_frag_off] = 0;
    r[ip_is_frag] = 0;
    r[ttl] = t.ttl;
    r[ttl_initial] = ingest::detail::ttl_initial_guess(t.ttl);
    r[ttl_hops] = r[ttl_initial] - t.ttl;
    r[ip_proto] = 6;
    r[ip_opt_len] = 0;
    r[ip_cksum_ok] = 1;
    r[ip_src_private] = (t.from_server ? var.server_private : var.client_private) ? 1 : 0;
    r[ip_dst_private] = (t.from_server ? var.client_private : var.server_private) ? 1 : 0;
    r[ip_dst_mcast] = 0;
    r[l4_proto] = ProtoTcp;
    const int sport = t.from_server ? var.server_port : client_port;
    const int dport = t.from_server ? client_port : var.server_port;
    r[src_port] = sport;
    r[dst_port] = dport;
    r[sport_wellknown] = sport < 1024 ? 1 : 0;
    r[dport_wellknown] = dport < 1024 ? 1 : 0;
    r[sport_ephemeral] = sport >= 49152 ? 1 : 0;
    r[dport_ephemeral] = dport >= 49152 ? 1 : 0;
    r[tcp_seq] = t.seq;
    r[tcp_ack] = t.ack;
    r[tcp_hdr_len] = t.tcp_hdr;
    r[tcp_flags] = t.flags;
    r[tcp_fin] = t.flags & 0x01 ? 1 : 0;
    r[tcp_syn] = t.flags & 0x02 ? 1 : 0;
    r[tcp_rst] = t.flags & 0x04 ? 1 : 0;
    r[tcp_psh] = t.flags & 0x08 ? 1 : 0;
    r[tcp_ackf] = t.flags & 0x10 ? 1 : 0;
    r[tcp_urg] = 0;
    r[tcp_ece] = 0;
    r[tcp_cwr] = 0;
    r[tcp_ns] = 0;
    r[tcp_flag_count] = std::popcount(t.flags);
    r[window_size] = t.window;
    r[tcp_zero_window] = 0;
    r[tcp_urg_ptr] = 0;
    r[tcp_opt_len] = t.tcp_hdr - 20;
    r[tcp_opt_sackok] = t.tcp_hdr == 40 ? 1 : 0;
    r[tcp_opt_ts] = t.tcp_hdr >= 32 ? 1 : 0;
    r[tcp_opt_nops] = t.tcp_hdr == 40 ? 1 : (t.tcp_hdr == 32 ? 2 : 0);
    if (t.tcp_hdr == 40) {
        r[tcp_opt_mss] = 1460;
        r[tcp_opt_wscale] = 7;
    }
    r[l4_hdr_len] = t.tcp_hdr;
    r[header_len] = 20 + t.tcp_hdr;
    r[payload_len] = t.payload;
    r[payload_ratio] = quantize6(static_cast<double>(t.payload) / frame);
    r[iat] = t.iat;
    r[direction] = t.from_server ? 1 : 0;
    return r;
}

/// Records of a generated corpus plus the ground truth for next-packet prediction.
struct SynthCorpus {
    std::vector<PacketRecord> records;                   // capture order, flows interleaved
    std::vector<std::vector<std::size_t>> flow_rows;     // per flow_index, row indices in order

    /// The true next packet after position `pos` of a flow, or nullopt at the flow end.
    std::optional<PacketRecord> next_packet(std::uint32_t flow, std::size_t pos) const {
        const auto& rows = flow_rows.at(flow);
        require(pos < rows.size(), ErrorCode::InvalidArgument, "position outside flow");
        if (pos + 1 == rows.size()) return std::nullopt;
        return records[rows[pos + 1]];
    }
};

/// Flow counts per class by largest remainder, so the mix is exact up to rounding.
inline std::array<std::size_t, kNumClasses> apportion(const std::array<double, kNumClasses>& mix, std::size_t n) {
    std::array<std::size_t, kNumClasses> out{};
    std::array<double, kNumClasses> rem{};
    std::size_t used = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double exact = mix[c] * static_cast<double>(n);
        out[c] = static_cast<std::size_t>(std::floor(exact));
        rem[c] = exact - static_cast<double>(out[c]);
        used += out[c];
    }
    while (used < n) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < kNumClasses; ++c)
            if (rem[c] > rem[best]) best = c;
        ++out[best];
        rem[best] = -1;
        ++used;
    }
    return out;
}

inline SynthCorpus generate(const GrammarSpec& spec, std::size_t n_flows) {
    require(n_flows >= 1, ErrorCode::InvalidArgument, "n_flows must be >= 1");
    const auto variants = build_variants(spec);
    Rng rng((spec.stream_seed ? spec.stream_seed : spec.seed) ^ 0x666c6f7773ULL);
    const auto counts = apportion(spec.class_mix, n_flows);
    std::vector<std::size_t> flow_class;
    for (std::size_t c = 0; c < kNumClasses; ++c) flow_class.insert(flow_class.end(), counts[c], c);
    shuffle(std::span<std::size_t>(flow_class), rng);

    struct Pending {
        double ts;
        std::size_t flow, pos;
        PacketRecord rec;
    };
    std::vector<Pending> all;
    for (std::size_t f = 0; f < n_flows; ++f) {
        const auto c = flow_class[f];
        const auto& var = variants[c * spec.variants_per_class + uniform_index(rng, spec.variants_per_class)];
        const int port = var.client_ports[uniform_index(rng, var.client_ports.size())];
        double ts = 1700000000.0 + spec.flow_spacing * static_cast<double>(f);
        for (std::size_t k = 0; k < var.packets.size(); ++k) {
            ts += var.packets[k].iat;
            auto rec = render(var, var.packets[k], port);
            rec.label = var.label;
            rec.timestamp = ts;
            all.push_back({ts, f, k, rec});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Pending& a, const Pending& b) {
        if (a.ts != b.ts) return a.ts < b.ts;
        if (a.flow != b.flow) return a.flow < b.flow;
        return a.pos < b.pos;
    });
    SynthCorpus out;
    std::map<std::size_t, std::uint32_t> index;
    for (auto& p : all) {
        auto [it, fresh] = index.emplace(p.flow, static_cast<std::uint32_t>(index.size()));
        if (fresh) out.flow_rows.emplace_back();
        p.rec.flow_index = it->second;
        out.flow_rows[it->second].push_back(out.records.size());
        out.records.push_back(p.rec);
    }
    return out;
}

/// Fields whose value ranges for Normal and for the given attack class do not overlap.
inline std::vector<std::string> separating_fields(const std::vector<Variant>& variants, Label attack) {
    std::vector<std::string> out;
    for (std::size_t f = 0; f < ingest::kFeatureCount; ++f) {
        double nlo = INFINITY, nhi = -INFINITY, alo = INFINITY, ahi = -INFINITY;
        for (const auto& v : variants) {
            if (v.label != Label::Normal && v.label != attack) continue;
            for (const auto& t : v.packets) {
                const double x = render(v, t, v.client_ports[0]).values[f];
                if (ingest::is_none(x)) continue;
                auto& lo = v.label == Label::Normal ? nlo : alo;
                auto& hi = v.label == Label::Normal ? nhi : ahi;
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
        if (nlo > nhi || alo > ahi) continue;
        if (nhi < alo || ahi < nlo) out.emplace_back(ingest::kManifest[f].name);
    }
    return out;
}

/// Sidecar with the true next packet of every (flow_index, position).
inline void write_oracle_csv(const std::string& path, const SynthCorpus& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    out << "flow_index,position,next";
    for (const auto& f : ingest::kManifest) out << ',' << f.name;
    out << '\n';
    for (std::uint32_t flow = 0; flow < c.flow_rows.size(); ++flow)
        for (std::size_t pos = 0; pos < c.flow_rows[flow].size(); ++pos) {
            out << flow << ',' << pos;
            auto next = c.next_packet(flow, pos);
            out << (next ? ",packet" : ",flow_end");
            for (std::size_t f = 0; f < ingest::kFeatureCount; ++f) {
                out << ',';
                if (next && !ingest::is_none(next->values[f])) out << ingest::render_cell(f, next->values[f]);
            }
            out << '\n';
        }
}

}  // namespace nipred::synth
