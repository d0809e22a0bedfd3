#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gspr/frames.hpp"
#include "gspr/image.hpp"
#include "gspr/scene_io.hpp"

namespace gspr {

// Semantic class ids follow the Cityscapes train-id convention.
namespace semantic {
inline constexpr std::uint16_t kRoad = 0;
inline constexpr std::uint16_t kSky = 10;
inline constexpr std::uint16_t kPerson = 11;
inline constexpr std::uint16_t kCar = 13;
}  // namespace semantic

enum class PointOrigin : std::uint8_t { kLidar, kDome };

// Colored initialization points in the center ego frame.
struct InitPrior {
  std::vector<Vec3> points;
  std::vector<Eigen::Vector3d> colors;  // RGB in [0, 1]
  std::vector<PointOrigin> provenance;
};

struct MaskBundle {
  Mask static_mask;   // overlaid with the background color
  Mask dynamic_mask;  // loss-detached
};

// Indices of points with positive camera depth whose projection lands in
// [0, width) x [0, height).
std::vector<std::size_t> frustum_cull(std::span<const Vec3> points, const Camera& camera);

// Continuous pixel coordinates of a LiDAR point, or nullopt behind the camera.
std::optional<Eigen::Vector2d> project(const Vec3& lidar_point, const Camera& camera);

// Bilinear sample with pixel centers at integer coordinates; the right and
// bottom neighbours are clamped to the last row/column.
Eigen::Vector3d sample_bilinear(const Image& image, double u, double v);

// Colors of points that all project into the view. Throws InputError naming
// the first point outside the frustum.
std::vector<Eigen::Vector3d> colorize_points(std::span<const Vec3> points, const CameraView& view);

// Multi-view variant: each point takes its color from the view with the
// smallest camera depth among those that see it.
std::vector<Eigen::Vector3d> colorize_points(std::span<const Vec3> points, const CalibratedFrame& frame);

struct GroundPlane {
  Vec3 normal = Vec3::UnitZ();  // unit length, oriented with normal.z >= 0
  double offset = 0.0;          // plane: normal . p + offset = 0

  double distance(const Vec3& p) const { return std::abs(normal.dot(p) + offset); }
};

struct GroundFilterResult {
  std::vector<std::size_t> kept;  // non-ground indices, ascending
  GroundPlane plane;
  bool removed = false;  // false when the dominant plane is not near-horizontal
};

struct GroundFilterOptions {
  double distance_threshold = 0.2;
  int iterations = 200;
  std::uint64_t seed = 0;
  double max_tilt_deg = 30.0;
};

// Seeded three-point plane consensus. Sampling runs over a canonical
// (lexicographic) ordering of the points, so the result does not depend on
// input order. Throws InputError when fewer than 3 points are given.
GroundFilterResult filter_ground(std::span<const Vec3> points, const GroundFilterOptions& options = {});

// Indices of points outside every (yaw-rotated, inclusive) box.
std::vector<std::size_t> erase_boxes(std::span<const Vec3> points, std::span<const Box3D> boxes);

// Fibonacci lattice on the upper hemisphere with radius
// radius_factor * max |p|, centered at the ego origin.
std::vector<Vec3> generate_dome(std::span<const Vec3> points, std::size_t n_dome, double radius_factor);

Mask make_static_mask(const SemanticMap& semantic_map, std::span<const std::uint16_t> static_classes);

// Axis-aligned hull of each box's projected (in front) corners, restricted
// to pixels whose class matches the box class.
Mask make_dynamic_mask(std::span<const Box3D> boxes, const SemanticMap& semantic_map, const Camera& camera);

struct PrepOptions {
  GroundFilterOptions ground;
  bool filter_ground = true;
  bool erase_boxes = true;
  // false: replace each scan by uniformly random points in its bounding box
  bool lidar_init = true;
  std::uint64_t random_init_seed = 0;
  bool dome = true;
  std::size_t n_dome = 2000;
  double radius_factor = 1.2;
  // Static regions color points with `background`; dynamic regions give no color.
  bool static_mask = true;
  bool dynamic_mask = true;
  std::vector<std::uint16_t> static_classes = {semantic::kSky, semantic::kRoad};
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  Eigen::Vector3d unobserved = Eigen::Vector3d::Constant(0.5);
};

// Merges a 3-frame window (center = index 1) into one colored prior in the
// center ego frame. `poses` map each LiDAR frame to the world.
InitPrior assemble_sequence(std::span<const CalibratedFrame, 3> frames, std::span<const RigidTransform, 3> poses,
                            const PrepOptions& options = {});

MaskBundle make_masks(const CameraView& view, std::span<const Box3D> boxes,
                      std::span<const std::uint16_t> static_classes);

// Colored point PLY (float x, y, z; uchar red, green, blue).
void write_prior_ply(const InitPrior& prior, const std::filesystem::path& path);

// Initialization-grade Gaussian scene: one isotropic Gaussian per prior
// point with scale = RMS distance to its 3 nearest neighbours, identity
// rotation, SH DC from the point color and opacity 0.1.
GaussianScene prior_to_scene(const InitPrior& prior, std::int64_t place_id, const RigidTransform& ego_pose);

}  // namespace gspr
