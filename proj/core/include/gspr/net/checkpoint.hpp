#pragma once

#include <filesystem>

#include "gspr/net/network.hpp"

namespace gspr::net {

// Binary layout (little-endian): "GSPRCKPT", uint32 version, uint64 config
// hash, uint32 tensor count, then per tensor: uint32 name length, name,
// uint32 rows, uint32 cols, rows * cols float32 in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const NetParams<float>& p, const NetConfig& cfg, const std::filesystem::path& path);

// Throws FormatError on a malformed file and ConfigError when the stored
// hash, tensor names or shapes disagree with `cfg`.
NetParams<float> load_checkpoint(const NetConfig& cfg, const std::filesystem::path& path);

}  // namespace gspr::net
