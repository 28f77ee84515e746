#pragma once

// phi checkpoints: "MULO" | version u32 | flat length u64 | float64 values,
// plus a JSON sidecar at <path>.json describing how phi was meta-trained.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mulo/config.hpp"
#include "mulo/lo.hpp"

namespace mulo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    LOConfig lo{};
    ParamMode mode = ParamMode::MuP;
    std::size_t meta_horizon = 1000;  // inner steps seen per episode during meta-training
    std::size_t outer_step = 0;
    std::size_t input_dim = kNumFeatures;
    std::size_t hidden = kLoHidden;
};

inline json to_json(const CheckpointMeta& m) {
    return {{"lo", to_json(m.lo)},
            {"param_mode", std::string(to_string(m.mode))},
            {"meta_horizon", m.meta_horizon},
            {"outer_step", m.outer_step},
            {"input_dim", m.input_dim},
            {"hidden", m.hidden}};
}

inline CheckpointMeta read_checkpoint_meta(const json& j) {
    CheckpointMeta m;
    if (j.contains("lo")) m.lo = read_lo_config(j["lo"], m.lo, "lo");
    m.mode = read_mode(j, "param_mode", m.mode, "");
    read_field(j, "meta_horizon", m.meta_horizon, "");
    read_field(j, "outer_step", m.outer_step, "");
    read_field(j, "input_dim", m.input_dim, "");
    read_field(j, "hidden", m.hidden, "");
    return m;
}

struct Checkpoint {
    std::vector<double> flat;
    CheckpointMeta meta;

    LOWeights weights() const { return unflatten(flat, meta.input_dim, meta.hidden); }
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) { return p.string() + ".json"; }

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::vector<char> buf{'M', 'U', 'L', 'O'};
    detail::put<std::uint32_t>(buf, kCheckpointVersion);
    detail::put<std::uint64_t>(buf, ck.flat.size());
    for (double v : ck.flat) detail::put(buf, v);
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    std::ofstream side(sidecar_path(path));
    if (!side) throw std::runtime_error("cannot write checkpoint sidecar for " + path.string());
    side << to_json(ck.meta).dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 || std::memcmp(buf.data(), "MULO", 4) != 0) throw FormatError("bad checkpoint magic", 0);
    std::size_t off = 4;
    const auto version = detail::get<std::uint32_t>(buf, off, "version");
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version", 4);
    const auto n = detail::get<std::uint64_t>(buf, off, "length");
    if (buf.size() != off + n * 8) throw FormatError("checkpoint payload length mismatch", buf.size());
    Checkpoint ck;
    ck.flat.resize(n);
    std::memcpy(ck.flat.data(), buf.data() + off, n * 8);
    if (std::filesystem::exists(sidecar_path(path))) ck.meta = read_checkpoint_meta(load_json_file(sidecar_path(path)));
    if (lo_flat_size(ck.meta.input_dim, ck.meta.hidden) != n) {
        throw FormatError("checkpoint length does not match the architecture in its sidecar", 16);
    }
    return ck;
}

}  // namespace mulo
