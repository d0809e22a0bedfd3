#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "gspr/scene_io.hpp"

namespace gspr {

struct CylGridConfig {
  double max_range = 40.0;
  int n_rho = 40;
  int n_theta = 120;
  int n_z = 10;
  double z_min = -3.0;
  double z_max = 7.0;
  int max_per_voxel = 16;  // H
  int n_target = 8192;     // N after select_voxels

  void validate() const;
  std::size_t voxel_count() const { return static_cast<std::size_t>(n_rho) * n_theta * n_z; }
};

struct Cylindrical {
  double rho;
  double theta;  // [0, 2*pi)
  double z;
};

Cylindrical to_cylindrical(const Vec3& xyz);

// Linear voxel index (rho-major, then theta, then z), or -1 when the point
// falls outside the range cap or the z band.
std::int64_t voxel_index(const Vec3& xyz, const CylGridConfig& cfg);

struct Voxel {
  std::int64_t index = 0;
  std::vector<std::size_t> members;  // Gaussian indices, ascending
  std::size_t occupancy = 0;         // before the H cap
};

struct VoxelMap {
  std::vector<Voxel> voxels;  // ascending voxel index, non-empty only
  std::size_t dropped = 0;    // outside range or z band
  std::size_t input_count = 0;

  bool empty() const { return voxels.empty(); }
};

// Floor-binning into cylindrical voxels; over-full voxels keep the H most
// opaque Gaussians (ties by original index).
VoxelMap partition(const GaussianScene& scene, const CylGridConfig& cfg);

// N x 59 mean-encoded voxels; coords are the encoded positions.
struct VoxelizedScene {
  Eigen::MatrixXd encoded;  // rows: attribute layout of Gaussian::to_vector
  std::int64_t place_id = 0;
  RigidTransform pose;

  Eigen::Index size() const { return encoded.rows(); }
  Eigen::MatrixXd coords() const { return encoded.leftCols(3); }
};

// Attribute-wise means; quaternions are sign-aligned to the first member,
// averaged, renormalized and canonicalized (w >= 0). A lone member is copied.
VoxelizedScene encode(const GaussianScene& scene, const VoxelMap& map);

VoxelizedScene voxelize(const GaussianScene& scene, const CylGridConfig& cfg);

// Exactly n_target rows: a seeded uniform subset (kept in voxel order) when
// there are enough voxels, otherwise every voxel followed by seeded
// with-replacement duplicates. Throws InputError on an empty scene.
VoxelizedScene select_voxels(const VoxelizedScene& vs, int n_target, std::uint64_t seed);

// Flat blob: magic "GSVX", uint32 version, uint32 N, uint32 59, then
// N x 59 little-endian float32.
void write_voxel_blob(const VoxelizedScene& vs, const std::filesystem::path& path);
VoxelizedScene read_voxel_blob(const std::filesystem::path& path);

}  // namespace gspr
