#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gspr/geometry.hpp"

namespace gspr {

// Layout of the 59-scalar Gaussian vector: position, scale, rotation
// quaternion (w, x, y, z), 48 SH coefficients (channel-major, 16 per
// channel, DC first), opacity.
namespace attr {
inline constexpr int kPosition = 0;
inline constexpr int kScale = 3;
inline constexpr int kRotation = 6;
inline constexpr int kSh = 10;
inline constexpr int kOpacity = 58;
inline constexpr int kCount = 59;
inline constexpr int kShCount = 48;
// Node feature width: every attribute except position.
inline constexpr int kFeatureCount = kCount - 3;
}  // namespace attr

// Zeroth-order SH basis constant, used to map RGB to the DC coefficient.
inline constexpr double kShC0 = 0.28209479177387814;

struct Gaussian {
  Vec3 position = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
  std::array<double, attr::kShCount> sh{};
  double opacity = 0.5;

  std::array<double, attr::kCount> to_vector() const;
  static Gaussian from_vector(std::span<const double, attr::kCount> v);
};

// Unit-normalize and flip so that w >= 0. Returns false for a zero quaternion.
bool canonicalize_quaternion(Eigen::Vector4d& q);

// Empty string when the Gaussian satisfies its invariants, otherwise a reason.
std::string validate(const Gaussian& g);

enum class SceneSource { kExternalOptimized, kInitializationOnly, kSynthetic };

const char* to_string(SceneSource s);
SceneSource scene_source_from_string(const std::string& s);

struct GaussianScene {
  std::vector<Gaussian> gaussians;
  RigidTransform ego_pose;
  std::int64_t place_id = 0;
  SceneSource source = SceneSource::kExternalOptimized;
};

enum class PlyPrecision { kFloat32, kFloat64 };

// Reads the standard 3D-GS vertex layout (x, y, z, nx, ny, nz, f_dc_0..2,
// f_rest_0..44, opacity, scale_0..2, rot_0..3). Raw log-scales and logit
// opacities are activated on load. Pose, place id and source are recovered
// from header comments when present.
GaussianScene read_gaussian_ply(const std::filesystem::path& path);

// Inverse of read_gaussian_ply. Float64 properties keep the round trip
// exact to well below 1e-6; float32 matches most external viewers.
void write_gaussian_ply(const GaussianScene& scene, const std::filesystem::path& path,
                        PlyPrecision precision = PlyPrecision::kFloat64);

// Parameters of the deterministic test-scene generator. Each place owns a
// fixed landmark template; each seed is one noisy re-observation of it.
struct SyntheticSceneSpec {
  std::size_t count = 4000;       // Gaussians per scene
  std::int64_t place_id = 0;
  std::size_t landmarks = 40;     // place-specific landmark clusters
  double max_radius = 45.0;       // landmark centers up to this range (m)
  double shared_radius = 10.0;    // place-agnostic clutter stays inside this range (m)
  double shared_fraction = 0.25;  // share of Gaussians drawn from the shared clutter
  double z_min = -2.0;
  double z_max = 6.0;
  double position_noise = 0.05;   // per-observation jitter (m)
  double attribute_noise = 0.02;  // per-observation jitter of scale/SH/opacity
  double pose_jitter = 0.3;       // ego offset between observations (m)
  std::size_t palette = 4;        // distinct landmark colors shared by all places
  std::uint64_t template_seed = 0x5eed;
};

GaussianScene generate_synthetic_scene(std::uint64_t seed, const SyntheticSceneSpec& spec);

}  // namespace gspr
