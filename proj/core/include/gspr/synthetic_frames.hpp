#pragma once

#include <cstdint>
#include <vector>

#include "gspr/frames.hpp"
#include "gspr/scene_io.hpp"

namespace gspr {

// Drive past one synthetic place: LiDAR sweeps of the place's landmark
// Gaussians plus a ground plane and one parked car, seen by a ring of
// pinhole cameras with semantic maps (road, building, sky, car).
struct SyntheticFrameSpec {
  SyntheticSceneSpec scene;
  int frames = 3;
  double frame_spacing = 2.0;  // meters along the track (+x)
  int cameras = 4;
  double fov_deg = 100.0;
  int image_width = 128;
  int image_height = 96;
  std::size_t ground_points = 1500;
  double ground_z = -2.0;
  double ground_radius = 30.0;
};

inline constexpr std::uint16_t kSemanticBuilding = 2;

// Frames are ordered along the track; each carries its pose to the world,
// points in its own LiDAR frame and one box for the car. The car placement
// and color depend on `seed` (it is a dynamic object).
std::vector<CalibratedFrame> generate_synthetic_frames(std::uint64_t seed, const SyntheticFrameSpec& spec);

}  // namespace gspr
