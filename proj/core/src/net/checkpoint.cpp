#include "gspr/net/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "gspr/error.hpp"

namespace gspr::net {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic{'G', 'S', 'P', 'R', 'C', 'K', 'P', 'T'};

template <typename V>
void put(std::ofstream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::ifstream& in, const std::filesystem::path& path) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw FormatError("truncated checkpoint: " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const NetParams<float>& p, const NetConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint: " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, cfg.hash());
  const auto tensors = p.tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m->cols()));
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(float)));
  }
  if (!out) throw InputError("failed writing checkpoint: " + path.string());
}

NetParams<float> load_checkpoint(const NetConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing file: " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("not a checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  if (get<std::uint64_t>(in, path) != cfg.hash()) {
    throw ConfigError("checkpoint was written for a different network configuration: " + path.string());
  }
  NetParams<float> p = init_params<float>(cfg);
  auto tensors = p.tensors();
  const auto count = get<std::uint32_t>(in, path);
  if (count != tensors.size()) throw ConfigError("checkpoint tensor count mismatch: " + path.string());
  for (auto& [expected, m] : tensors) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw FormatError("corrupt tensor name in checkpoint: " + path.string());
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("truncated checkpoint: " + path.string());
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    if (name != expected || rows != m->rows() || cols != m->cols()) {
      throw ConfigError("checkpoint tensor " + name + " does not match " + expected);
    }
    if (!in.read(reinterpret_cast<char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(float)))) {
      throw FormatError("truncated checkpoint: " + path.string());
    }
  }
  return p;
}

}  // namespace gspr::net
