#include "gspr/voxelizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "gspr/error.hpp"

namespace gspr {
namespace {

constexpr char kBlobMagic[4] = {'G', 'S', 'V', 'X'};
constexpr std::uint32_t kBlobVersion = 1;

int bin(double value, double lo, double hi, int bins) {
  const int b = static_cast<int>(std::floor((value - lo) / (hi - lo) * bins));
  return std::clamp(b, 0, bins - 1);
}

}  // namespace

void CylGridConfig::validate() const {
  if (n_rho < 1 || n_theta < 1 || n_z < 1) throw ConfigError("grid bin counts must be >= 1");
  if (!(max_range > 0.0)) throw ConfigError("grid max_range must be positive");
  if (!(z_max > z_min)) throw ConfigError("grid z_max must exceed z_min");
  if (max_per_voxel < 1) throw ConfigError("grid H (max Gaussians per voxel) must be >= 1");
  if (n_target < 1) throw ConfigError("grid N_target must be >= 1");
}

Cylindrical to_cylindrical(const Vec3& p) {
  double theta = std::atan2(p.y(), p.x());
  if (theta < 0.0) theta += 2.0 * std::numbers::pi;
  if (theta >= 2.0 * std::numbers::pi) theta = 0.0;
  return {std::hypot(p.x(), p.y()), theta, p.z()};
}

std::int64_t voxel_index(const Vec3& xyz, const CylGridConfig& cfg) {
  const Cylindrical c = to_cylindrical(xyz);
  if (c.rho > cfg.max_range || c.z < cfg.z_min || c.z > cfg.z_max) return -1;
  const int r = bin(c.rho, 0.0, cfg.max_range, cfg.n_rho);
  const int t = bin(c.theta, 0.0, 2.0 * std::numbers::pi, cfg.n_theta);
  const int z = bin(c.z, cfg.z_min, cfg.z_max, cfg.n_z);
  return (static_cast<std::int64_t>(r) * cfg.n_theta + t) * cfg.n_z + z;
}

VoxelMap partition(const GaussianScene& scene, const CylGridConfig& cfg) {
  cfg.validate();
  VoxelMap map;
  map.input_count = scene.gaussians.size();
  std::vector<std::pair<std::int64_t, std::size_t>> assigned;
  assigned.reserve(scene.gaussians.size());
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const std::int64_t v = voxel_index(scene.gaussians[i].position, cfg);
    if (v < 0) {
      ++map.dropped;
    } else {
      assigned.emplace_back(v, i);
    }
  }
  std::sort(assigned.begin(), assigned.end());
  for (std::size_t a = 0; a < assigned.size();) {
    std::size_t b = a;
    Voxel voxel;
    voxel.index = assigned[a].first;
    while (b < assigned.size() && assigned[b].first == voxel.index) voxel.members.push_back(assigned[b++].second);
    voxel.occupancy = voxel.members.size();
    if (voxel.members.size() > static_cast<std::size_t>(cfg.max_per_voxel)) {
      std::stable_sort(voxel.members.begin(), voxel.members.end(), [&](std::size_t x, std::size_t y) {
        return scene.gaussians[x].opacity > scene.gaussians[y].opacity;
      });
      voxel.members.resize(cfg.max_per_voxel);
      std::sort(voxel.members.begin(), voxel.members.end());
    }
    map.voxels.push_back(std::move(voxel));
    a = b;
  }
  return map;
}

VoxelizedScene encode(const GaussianScene& scene, const VoxelMap& map) {
  VoxelizedScene vs;
  vs.place_id = scene.place_id;
  vs.pose = scene.ego_pose;
  vs.encoded.resize(static_cast<Eigen::Index>(map.voxels.size()), attr::kCount);
  for (std::size_t r = 0; r < map.voxels.size(); ++r) {
    const auto& members = map.voxels[r].members;
    Eigen::Matrix<double, 1, attr::kCount> sum = Eigen::Matrix<double, 1, attr::kCount>::Zero();
    const Eigen::Vector4d first = scene.gaussians[members.front()].rotation;
    for (const std::size_t m : members) {
      auto v = scene.gaussians[m].to_vector();
      Eigen::Map<Eigen::Matrix<double, 1, attr::kCount>> row(v.data());
      if (Eigen::Vector4d(row.segment<4>(attr::kRotation)).dot(first) < 0.0) {
        row.segment<4>(attr::kRotation) *= -1.0;
      }
      sum += row;
    }
    sum /= static_cast<double>(members.size());
    if (members.size() == 1) {
      vs.encoded.row(static_cast<Eigen::Index>(r)) = sum;
      continue;
    }
    Eigen::Vector4d q = sum.segment<4>(attr::kRotation).transpose();
    if (!canonicalize_quaternion(q)) q = first;
    sum.segment<4>(attr::kRotation) = q.transpose();
    vs.encoded.row(static_cast<Eigen::Index>(r)) = sum;
  }
  return vs;
}

VoxelizedScene voxelize(const GaussianScene& scene, const CylGridConfig& cfg) {
  return encode(scene, partition(scene, cfg));
}

VoxelizedScene select_voxels(const VoxelizedScene& vs, int n_target, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(vs.size());
  if (n == 0) throw InputError("select_voxels on an empty voxelized scene");
  if (n_target < 1) throw ConfigError("select_voxels needs N_target >= 1");
  const auto target = static_cast<std::size_t>(n_target);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> rows;
  if (n >= target) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (n > target) {
      for (std::size_t i = 0; i < target; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      idx.resize(target);
      std::sort(idx.begin(), idx.end());
    }
    rows = std::move(idx);
  } else {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (rows.size() < target) rows.push_back(pick(rng));
  }
  VoxelizedScene out;
  out.place_id = vs.place_id;
  out.pose = vs.pose;
  out.encoded.resize(static_cast<Eigen::Index>(target), vs.encoded.cols());
  for (std::size_t i = 0; i < target; ++i) {
    out.encoded.row(static_cast<Eigen::Index>(i)) = vs.encoded.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

void write_voxel_blob(const VoxelizedScene& vs, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write voxel blob: " + path.string());
  const std::uint32_t header[3] = {kBlobVersion, static_cast<std::uint32_t>(vs.size()),
                                   static_cast<std::uint32_t>(attr::kCount)};
  out.write(kBlobMagic, 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<float> row(attr::kCount);
  for (Eigen::Index r = 0; r < vs.size(); ++r) {
    for (int c = 0; c < attr::kCount; ++c) row[c] = static_cast<float>(vs.encoded(r, c));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw FormatError("failed writing voxel blob: " + path.string());
}

VoxelizedScene read_voxel_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open voxel blob: " + path.string());
  char magic[4];
  std::uint32_t header[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, kBlobMagic, 4) != 0) throw FormatError("not a voxel blob: " + path.string());
  if (header[0] != kBlobVersion) throw FormatError("unsupported voxel blob version in " + path.string());
  if (header[2] != static_cast<std::uint32_t>(attr::kCount)) {
    throw FormatError("voxel blob row width is not 59: " + path.string());
  }
  VoxelizedScene vs;
  vs.encoded.resize(header[1], attr::kCount);
  std::vector<float> row(attr::kCount);
  for (std::uint32_t r = 0; r < header[1]; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw FormatError("voxel blob truncated: " + path.string());
    for (int c = 0; c < attr::kCount; ++c) {
      if (!std::isfinite(row[c])) throw DataError("non-finite value in voxel blob row " + std::to_string(r));
      vs.encoded(r, c) = row[c];
    }
  }
  return vs;
}

}  // namespace gspr
