#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nipred/core/hash.hpp"
#include "nipred/nn/adam.hpp"

namespace nipred::nn {

using json = nlohmann::json;

inline constexpr char kCheckpointMagic[8] = {'N', 'I', 'P', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string config_hash(const json& config) { return hex64(fnv1a(config.dump())); }

/// In-memory image of a checkpoint file.
struct Checkpoint {
    json config;
    std::string config_hash;
    std::uint64_t seed = 0;
    long step = 0;
    json extra = json::object();
    std::vector<std::string> names;
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> values;
    std::vector<AdamState> optimizer;  // empty when not saved

    const std::vector<double>& tensor(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return values[i];
        fail(ErrorCode::CorruptCheckpoint, "checkpoint has no tensor " + name);
    }
};

inline Checkpoint snapshot(const json& config, const ParamList& params, const Adam* opt, std::uint64_t seed,
                           json extra = json::object()) {
    Checkpoint c;
    c.config = config;
    c.config_hash = config_hash(config);
    c.seed = seed;
    c.step = opt ? opt->steps() : 0;
    c.extra = std::move(extra);
    for (const auto& p : params) {
        c.names.push_back(p.name);
        c.shapes.push_back(p.tensor.shape());
        c.values.emplace_back(p.tensor.value().begin(), p.tensor.value().end());
    }
    if (opt) c.optimizer = opt->state();
    return c;
}

namespace detail {
template <typename T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_doubles(std::string& out, const std::vector<double>& v) {
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}
}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
    json header;
    header["config"] = c.config;
    header["config_hash"] = c.config_hash;
    header["seed"] = c.seed;
    header["step"] = c.step;
    header["extra"] = c.extra;
    header["has_optimizer"] = !c.optimizer.empty();
    json tensors = json::array();
    for (std::size_t i = 0; i < c.names.size(); ++i) tensors.push_back({{"name", c.names[i]}, {"shape", c.shapes[i]}});
    header["tensors"] = tensors;
    const std::string h = header.dump();

    std::string out(kCheckpointMagic, 8);
    detail::put(out, kCheckpointVersion);
    detail::put(out, static_cast<std::uint64_t>(h.size()));
    out += h;
    for (const auto& v : c.values) detail::put_doubles(out, v);
    for (std::size_t i = 0; i < c.optimizer.size(); ++i) {
        detail::put_doubles(out, c.optimizer[i].m.empty() ? std::vector<double>(c.values[i].size()) : c.optimizer[i].m);
        detail::put_doubles(out, c.optimizer[i].v.empty() ? std::vector<double>(c.values[i].size()) : c.optimizer[i].v);
    }
    detail::put(out, fnv1a(out));
    return out;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    const auto bytes = serialize_checkpoint(c);
    const auto tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorCode::IoFailure, "cannot write " + tmp);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) fail(ErrorCode::IoFailure, "write failed " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
    auto corrupt = [](const std::string& why) { fail(ErrorCode::CorruptCheckpoint, "corrupt checkpoint: " + why); };
    if (bytes.size() < 8 + 4 + 8 + 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) corrupt("bad magic");
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (fnv1a(std::string_view(bytes.data(), bytes.size() - 8)) != stored) corrupt("checksum mismatch");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 8, 4);
    if (version != kCheckpointVersion) corrupt("unsupported version " + std::to_string(version));
    std::uint64_t hlen;
    std::memcpy(&hlen, bytes.data() + 12, 8);
    std::size_t pos = 20;
    if (hlen > bytes.size() - pos - 8) corrupt("header length");

    Checkpoint c;
    json header;
    try {
        header = json::parse(bytes.substr(pos, hlen));
        c.config = header.at("config");
        c.config_hash = header.at("config_hash").get<std::string>();
        c.seed = header.at("seed").get<std::uint64_t>();
        c.step = header.at("step").get<long>();
        c.extra = header.value("extra", json::object());
        for (const auto& t : header.at("tensors")) {
            c.names.push_back(t.at("name").get<std::string>());
            c.shapes.push_back(t.at("shape").get<Shape>());
        }
    } catch (const json::exception& e) {
        corrupt(e.what());
    }
    pos += hlen;
    const std::size_t end = bytes.size() - 8;
    auto take = [&](std::size_t n) {
        if (n * sizeof(double) > end - pos) corrupt("truncated payload");
        std::vector<double> v(n);
        std::memcpy(v.data(), bytes.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        return v;
    };
    for (const auto& s : c.shapes) c.values.push_back(take(numel(s)));
    if (header.value("has_optimizer", false)) {
        for (const auto& s : c.shapes) {
            AdamState st;
            st.m = take(numel(s));
            st.v = take(numel(s));
            c.optimizer.push_back(std::move(st));
        }
    }
    if (pos != end) corrupt("trailing bytes");
    return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::MissingCheckpoint, "missing checkpoint " + path);
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::IoFailure, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

/// Copies stored values into `params` by name. The stored config hash must match.
inline void restore(const Checkpoint& c, const std::string& expected_hash, ParamList& params, Adam* opt = nullptr) {
    require(c.config_hash == expected_hash, ErrorCode::CheckpointMismatch,
            "checkpoint config hash " + c.config_hash + " does not match " + expected_hash);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& src = c.tensor(params[k].name);
        auto dst = params[k].tensor.value();
        require(src.size() == dst.size(), ErrorCode::CheckpointMismatch, "tensor size for " + params[k].name);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    if (opt && !c.optimizer.empty()) {
        require(c.optimizer.size() == params.size(), ErrorCode::CheckpointMismatch, "optimizer state count");
        opt->state() = c.optimizer;
        opt->set_steps(c.step);
    }
}

}  // namespace nipred::nn
