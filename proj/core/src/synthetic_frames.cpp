#include "gspr/synthetic_frames.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gspr/mgs_prep.hpp"
#include "gspr/seed.hpp"

namespace gspr {
namespace {

struct ColoredPoint {
  Vec3 p;
  Eigen::Vector3d color;
  std::uint16_t label;
};

Camera ring_camera(int index, const SyntheticFrameSpec& spec) {
  const double yaw = 2.0 * std::numbers::pi * index / spec.cameras;
  const Vec3 forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 down(0.0, 0.0, -1.0);
  Camera c;
  c.rotation.row(0) = right.transpose();
  c.rotation.row(1) = down.transpose();
  c.rotation.row(2) = forward.transpose();
  c.width = spec.image_width;
  c.height = spec.image_height;
  const double f = 0.5 * spec.image_width / std::tan(0.5 * spec.fov_deg * std::numbers::pi / 180.0);
  c.intrinsics << f, 0.0, 0.5 * (spec.image_width - 1), 0.0, f, 0.5 * (spec.image_height - 1), 0.0, 0.0, 1.0;
  return c;
}

CameraView render(const std::vector<ColoredPoint>& pts, const Camera& cam) {
  CameraView v;
  v.camera = cam;
  v.image = make_image(cam.width, cam.height);
  v.semantic_map = SemanticMap(cam.width, cam.height);
  const double horizon = cam.intrinsics(1, 2);
  for (int y = 0; y < cam.height; ++y) {
    const bool sky = y < horizon;
    const Eigen::Vector3d c = sky ? Eigen::Vector3d(0.55, 0.7, 0.95) : Eigen::Vector3d(0.3, 0.3, 0.32);
    for (int x = 0; x < cam.width; ++x) {
      for (int k = 0; k < 3; ++k) v.image.at(x, y, k) = c[k];
      v.semantic_map.at(x, y, 0) = sky ? semantic::kSky : semantic::kRoad;
    }
  }
  std::vector<double> depth(static_cast<std::size_t>(cam.width) * cam.height, std::numeric_limits<double>::infinity());
  for (const auto& cp : pts) {
    const Vec3 pc = cam.to_camera(cp.p);
    if (pc.z() <= 0.1) continue;
    const Vec3 uv = cam.intrinsics * pc;
    const double u = uv.x() / uv.z();
    const double w = uv.y() / uv.z();
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(w));
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int x = x0 + dx;
        const int y = y0 + dy;
        if (x < 0 || y < 0 || x >= cam.width || y >= cam.height) continue;
        double& d = depth[static_cast<std::size_t>(y) * cam.width + x];
        if (pc.z() >= d) continue;
        d = pc.z();
        for (int k = 0; k < 3; ++k) v.image.at(x, y, k) = cp.color[k];
        v.semantic_map.at(x, y, 0) = cp.label;
      }
    }
  }
  return v;
}

}  // namespace

std::vector<CalibratedFrame> generate_synthetic_frames(std::uint64_t seed, const SyntheticFrameSpec& spec) {
  const GaussianScene scene = generate_synthetic_scene(seed, spec.scene);
  std::mt19937_64 rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(spec.scene.place_id)), 0xf2a3eULL));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // Points in the place (center ego) frame.
  std::vector<ColoredPoint> world;
  for (const auto& g : scene.gaussians) {
    Eigen::Vector3d color;
    for (int c = 0; c < 3; ++c) color[c] = std::clamp(0.5 + kShC0 * g.sh[c * 16], 0.0, 1.0);
    world.push_back({g.position, color, kSemanticBuilding});
  }
  for (std::size_t i = 0; i < spec.ground_points; ++i) {
    const double r = spec.ground_radius * std::sqrt(u(rng));
    const double a = 2.0 * std::numbers::pi * u(rng);
    const double shade = 0.28 + 0.06 * u(rng);
    world.push_back({Vec3(r * std::cos(a), r * std::sin(a), spec.ground_z), Eigen::Vector3d::Constant(shade),
                     semantic::kRoad});
  }
  Box3D car;
  car.class_id = semantic::kCar;
  car.size = Vec3(4.2, 1.8, 1.5);
  car.center = Vec3(-6.0 + 12.0 * u(rng), (u(rng) < 0.5 ? -1.0 : 1.0) * (3.0 + 2.0 * u(rng)),
                    spec.ground_z + 0.5 * car.size.z());
  car.yaw = 0.2 * (2.0 * u(rng) - 1.0);
  const Eigen::Vector3d car_color(0.3 + 0.6 * u(rng), 0.1 + 0.3 * u(rng), 0.1 + 0.6 * u(rng));
  for (int i = 0; i < 400; ++i) {
    // Points on the box surface: pick a face, then a point on it.
    Vec3 local(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    const int axis = static_cast<int>(u(rng) * 3.0) % 3;
    local[axis] = u(rng) < 0.5 ? -0.5 : 0.5;
    const Vec3 p = car.center + yaw_rotation(car.yaw) * local.cwiseProduct(car.size);
    world.push_back({p, car_color, semantic::kCar});
  }

  std::vector<Camera> cameras;
  for (int c = 0; c < spec.cameras; ++c) cameras.push_back(ring_camera(c, spec));

  std::vector<CalibratedFrame> frames;
  const double mid = 0.5 * (spec.frames - 1);
  for (int f = 0; f < spec.frames; ++f) {
    RigidTransform offset;
    offset.translation = Vec3((f - mid) * spec.frame_spacing, 0.0, 0.0);
    const RigidTransform to_local = offset.inverse();
    CalibratedFrame frame;
    frame.pose = scene.ego_pose * offset;
    std::vector<ColoredPoint> local;
    local.reserve(world.size());
    for (const auto& cp : world) local.push_back({to_local.apply(cp.p), cp.color, cp.label});
    for (const auto& cp : local) frame.lidar.push_back(cp.p);
    Box3D b = car;
    b.center = to_local.apply(car.center);
    frame.boxes3d.push_back(b);
    for (const auto& cam : cameras) frame.views.push_back(render(local, cam));
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace gspr
