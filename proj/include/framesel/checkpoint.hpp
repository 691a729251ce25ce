#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "framesel/binio.hpp"
#include "framesel/errors.hpp"
#include "framesel/tensor.hpp"

namespace framesel {

// Checkpoint container: the full config echoed as text, then a named-tensor
// list with shapes and raw 32-bit payloads. Round-trips are bitwise.
//
//   magic "FSCP1", u32 version, u32 config-length, config bytes,
//   u32 tensor-count, then per tensor: u32 name-length, name bytes, u8 rank,
//   u32 rows, u32 cols, float32 data.

inline constexpr char kCheckpointMagic[5] = {'F', 'S', 'C', 'P', '1'};

struct Checkpoint {
    std::string config_text;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;

    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out.write(kCheckpointMagic, 5);
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.config_text.size()));
    out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        out.put(static_cast<char>(tensor.rank));
        detail::put_u32(out, tensor.dims[0]);
        detail::put_u32(out, tensor.dims[1]);
        for (float v : tensor.data) detail::put_f32(out, v);
    }
    if (!out) throw IoError("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0)
        throw FormatError("bad checkpoint magic in " + path.string());
    std::uint32_t version = detail::get_u32(in);
    if (version != 1) throw FormatError("unsupported checkpoint version");

    Checkpoint ckpt;
    std::uint32_t cfg_len = detail::get_u32(in);
    ckpt.config_text.resize(cfg_len);
    in.read(ckpt.config_text.data(), cfg_len);
    if (!in) throw FormatError("truncated checkpoint config in " + path.string());

    std::uint32_t count = detail::get_u32(in);
    ckpt.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = detail::get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw FormatError("truncated checkpoint in " + path.string());
        int rank = in.get();
        std::uint32_t rows = detail::get_u32(in);
        std::uint32_t cols = detail::get_u32(in);
        Tensor<float> t;
        if (rank == 2)
            t.assign_mat(rows, cols);
        else if (rank == 1)
            t.assign_vec(rows);
        else
            throw FormatError("bad tensor rank in " + path.string());
        for (auto& v : t.data) v = detail::get_f32(in);
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ckpt;
}

} // namespace framesel
