#include "gspr/scene_io.hpp"
#include "gspr/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace gspr {
namespace {

struct Landmark {
  Vec3 center;
  Vec3 spread;
  Vec3 log_scale;
  Eigen::Vector4d rotation;
  Eigen::Vector3d color;
  std::array<double, attr::kShCount> sh_rest{};
  double opacity = 0.5;
};

Eigen::Vector4d random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  if (!canonicalize_quaternion(q)) q = {1.0, 0.0, 0.0, 0.0};
  return q;
}

Landmark make_landmark(std::mt19937_64& rng, double r_min, double r_max, double z_min, double z_max,
                       const std::vector<Eigen::Vector3d>& palette) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Landmark l;
  const double rho = r_min + (r_max - r_min) * std::sqrt(u(rng));
  const double theta = 2.0 * std::numbers::pi * u(rng);
  l.center = {rho * std::cos(theta), rho * std::sin(theta), z_min + (z_max - z_min) * u(rng)};
  l.spread = {0.3 + 1.5 * u(rng), 0.3 + 1.5 * u(rng), 0.2 + 1.0 * u(rng)};
  l.log_scale = {std::log(0.05 + 0.6 * u(rng)), std::log(0.05 + 0.6 * u(rng)), std::log(0.05 + 0.6 * u(rng))};
  l.rotation = random_quaternion(rng);
  l.color = palette[std::min<std::size_t>(palette.size() - 1, static_cast<std::size_t>(u(rng) * palette.size()))];
  std::normal_distribution<double> n(0.0, 0.05);
  for (auto& s : l.sh_rest) s = n(rng);
  l.opacity = 0.15 + 0.8 * u(rng);
  return l;
}

}  // namespace

GaussianScene generate_synthetic_scene(std::uint64_t seed, const SyntheticSceneSpec& spec) {
  const auto place = static_cast<std::uint64_t>(spec.place_id);
  std::mt19937_64 shared_rng(mix_seed(spec.template_seed, 0xa11ULL));
  std::mt19937_64 place_rng(mix_seed(spec.template_seed, mix_seed(place, 0x91aceULL)));
  std::mt19937_64 obs_rng(mix_seed(mix_seed(spec.template_seed, place), mix_seed(seed, 0x0b5ULL)));

  std::vector<Eigen::Vector3d> palette;
  {
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (std::size_t i = 0; i < std::max<std::size_t>(spec.palette, 1); ++i) {
      palette.emplace_back(u(shared_rng), u(shared_rng), u(shared_rng));
    }
  }
  std::vector<Landmark> shared;
  for (int i = 0; i < 12; ++i) {
    shared.push_back(make_landmark(shared_rng, 0.5, spec.shared_radius, spec.z_min, spec.z_min + 1.5, palette));
  }
  std::vector<Landmark> own;
  for (std::size_t i = 0; i < std::max<std::size_t>(spec.landmarks, 1); ++i) {
    own.push_back(make_landmark(place_rng, spec.shared_radius, spec.max_radius, spec.z_min, spec.z_max, palette));
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);

  // Ego offset of this observation relative to the place anchor.
  const double jitter_r = spec.pose_jitter * std::sqrt(u(obs_rng));
  const double jitter_a = 2.0 * std::numbers::pi * u(obs_rng);
  const Vec3 offset(jitter_r * std::cos(jitter_a), jitter_r * std::sin(jitter_a), 0.0);
  const double yaw = 0.01 * (2.0 * u(obs_rng) - 1.0);
  const RigidTransform place_to_ego{yaw_rotation(-yaw), yaw_rotation(-yaw) * (-offset)};

  GaussianScene scene;
  scene.place_id = spec.place_id;
  scene.source = SceneSource::kSynthetic;
  scene.ego_pose.translation = Vec3(100.0 * static_cast<double>(spec.place_id), 0.0, 0.0) + offset;
  scene.ego_pose.rotation = yaw_rotation(yaw);
  scene.gaussians.reserve(spec.count);

  for (std::size_t i = 0; i < spec.count; ++i) {
    const bool from_shared = u(obs_rng) < spec.shared_fraction;
    const auto& pool = from_shared ? shared : own;
    const Landmark& l = pool[std::min(pool.size() - 1, static_cast<std::size_t>(u(obs_rng) * pool.size()))];

    Gaussian g;
    Vec3 p = l.center;
    for (int k = 0; k < 3; ++k) p[k] += l.spread[k] * n(obs_rng) + spec.position_noise * n(obs_rng);
    p.z() = std::clamp(p.z(), spec.z_min, spec.z_max);
    g.position = place_to_ego.apply(p);
    for (int k = 0; k < 3; ++k) g.scale[k] = std::exp(l.log_scale[k] + spec.attribute_noise * n(obs_rng));
    g.rotation = l.rotation;
    for (int k = 0; k < 4; ++k) g.rotation[k] += spec.attribute_noise * n(obs_rng);
    canonicalize_quaternion(g.rotation);
    for (int c = 0; c < 3; ++c) {
      g.sh[c * 16] = (l.color[c] - 0.5) / kShC0 + spec.attribute_noise * n(obs_rng);
      for (int k = 1; k < 16; ++k) g.sh[c * 16 + k] = l.sh_rest[c * 16 + k] + spec.attribute_noise * n(obs_rng);
    }
    g.opacity = std::clamp(l.opacity + spec.attribute_noise * n(obs_rng), 0.01, 0.99);
    scene.gaussians.push_back(g);
  }
  return scene;
}

}  // namespace gspr
