#include "gspr/mgs_prep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "gspr/error.hpp"
#include "gspr/ply.hpp"
#include "gspr/spatial.hpp"

namespace gspr {
namespace {

constexpr double kMinDepth = 1e-9;

bool in_image(const Eigen::Vector2d& uv, int width, int height) {
  return uv.x() >= 0.0 && uv.x() < width && uv.y() >= 0.0 && uv.y() < height;
}

struct ViewHit {
  int view = -1;
  double depth = std::numeric_limits<double>::infinity();
  Eigen::Vector2d uv;
};

// View with the smallest depth that sees p (ties: lower view index).
ViewHit nearest_view(const Vec3& p, const CalibratedFrame& frame) {
  ViewHit best;
  for (std::size_t v = 0; v < frame.views.size(); ++v) {
    const Camera& cam = frame.views[v].camera;
    const Vec3 pc = cam.to_camera(p);
    if (pc.z() <= kMinDepth || pc.z() >= best.depth) continue;
    const Vec3 h = cam.intrinsics * pc;
    const Eigen::Vector2d uv(h.x() / h.z(), h.y() / h.z());
    if (!in_image(uv, cam.width, cam.height)) continue;
    best = {static_cast<int>(v), pc.z(), uv};
  }
  return best;
}

struct ViewMasks {
  Mask static_mask;
  Mask dynamic_mask;
};

std::optional<Eigen::Vector3d> masked_color(const CameraView& view, const ViewMasks* masks, const Eigen::Vector2d& uv,
                                            const PrepOptions& options) {
  if (masks != nullptr) {
    const int x = std::clamp(static_cast<int>(std::lround(uv.x())), 0, view.image.width - 1);
    const int y = std::clamp(static_cast<int>(std::lround(uv.y())), 0, view.image.height - 1);
    if (options.dynamic_mask && masks->dynamic_mask.at(x, y)) return std::nullopt;
    if (options.static_mask && masks->static_mask.at(x, y)) return options.background;
  }
  return sample_bilinear(view.image, uv.x(), uv.y());
}

Vec3 plane_normal(const Vec3& a, const Vec3& b, const Vec3& c) { return (b - a).cross(c - a); }

}  // namespace

std::optional<Eigen::Vector2d> project(const Vec3& lidar_point, const Camera& camera) {
  const Vec3 pc = camera.to_camera(lidar_point);
  if (pc.z() <= kMinDepth) return std::nullopt;
  const Vec3 h = camera.intrinsics * pc;
  return Eigen::Vector2d(h.x() / h.z(), h.y() / h.z());
}

std::vector<std::size_t> frustum_cull(std::span<const Vec3> points, const Camera& camera) {
  camera.validate();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto uv = project(points[i], camera);
    if (uv && in_image(*uv, camera.width, camera.height)) out.push_back(i);
  }
  return out;
}

Eigen::Vector3d sample_bilinear(const Image& image, double u, double v) {
  const int x0 = std::clamp(static_cast<int>(std::floor(u)), 0, image.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(v)), 0, image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = std::clamp(u - x0, 0.0, 1.0);
  const double fy = std::clamp(v - y0, 0.0, 1.0);
  Eigen::Vector3d out;
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c);
    const double bottom = (1.0 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c);
    out[c] = std::clamp((1.0 - fy) * top + fy * bottom, 0.0, 1.0);
  }
  return out;
}

std::vector<Eigen::Vector3d> colorize_points(std::span<const Vec3> points, const CameraView& view) {
  view.camera.validate();
  std::vector<Eigen::Vector3d> colors;
  colors.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto uv = project(points[i], view.camera);
    if (!uv || !in_image(*uv, view.camera.width, view.camera.height)) {
      throw InputError("point " + std::to_string(i) + " lies outside the camera frustum");
    }
    colors.push_back(sample_bilinear(view.image, uv->x(), uv->y()));
  }
  return colors;
}

std::vector<Eigen::Vector3d> colorize_points(std::span<const Vec3> points, const CalibratedFrame& frame) {
  std::vector<Eigen::Vector3d> colors;
  colors.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const ViewHit hit = nearest_view(points[i], frame);
    if (hit.view < 0) throw InputError("point " + std::to_string(i) + " lies outside every camera frustum");
    colors.push_back(sample_bilinear(frame.views[hit.view].image, hit.uv.x(), hit.uv.y()));
  }
  return colors;
}

GroundFilterResult filter_ground(std::span<const Vec3> points, const GroundFilterOptions& options) {
  const std::size_t n = points.size();
  if (n < 3) throw InputError("filter_ground needs at least 3 points, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Vec3& p = points[a];
    const Vec3& q = points[b];
    if (p.x() != q.x()) return p.x() < q.x();
    if (p.y() != q.y()) return p.y() < q.y();
    return p.z() < q.z();
  });

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  GroundPlane best;
  std::size_t best_inliers = 0;
  bool found = false;
  for (int it = 0; it < options.iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const Vec3& pa = points[order[a]];
    Vec3 normal = plane_normal(pa, points[order[b]], points[order[c]]);
    const double len = normal.norm();
    if (!(len > 1e-12)) continue;
    normal /= len;
    if (normal.z() < 0.0) normal = -normal;
    const GroundPlane plane{normal, -normal.dot(pa)};
    std::size_t inliers = 0;
    for (std::size_t k = 0; k < n; ++k) inliers += plane.distance(points[order[k]]) <= options.distance_threshold;
    if (!found || inliers > best_inliers) {
      best = plane;
      best_inliers = inliers;
      found = true;
    }
  }

  GroundFilterResult result;
  result.plane = best;
  const double cos_limit = std::cos(options.max_tilt_deg * std::numbers::pi / 180.0);
  result.removed = found && std::abs(best.normal.z()) >= cos_limit;
  for (std::size_t i = 0; i < n; ++i) {
    if (!result.removed || best.distance(points[i]) > options.distance_threshold) result.kept.push_back(i);
  }
  return result;
}

std::vector<std::size_t> erase_boxes(std::span<const Vec3> points, std::span<const Box3D> boxes) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool inside = std::any_of(boxes.begin(), boxes.end(), [&](const Box3D& b) { return b.contains(points[i]); });
    if (!inside) kept.push_back(i);
  }
  return kept;
}

std::vector<Vec3> generate_dome(std::span<const Vec3> points, std::size_t n_dome, double radius_factor) {
  if (points.empty()) throw InputError("generate_dome needs a non-empty cloud");
  if (n_dome == 0) throw InputError("generate_dome needs n_dome > 0");
  if (!(radius_factor >= 1.0)) throw InputError("generate_dome needs radius_factor >= 1");
  double max_range = 0.0;
  for (const auto& p : points) max_range = std::max(max_range, p.norm());
  const double radius = radius_factor * max_range;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> dome;
  dome.reserve(n_dome);
  for (std::size_t i = 0; i < n_dome; ++i) {
    // z uniform on (0, 1) gives equal-area bands on the hemisphere.
    const double z = (static_cast<double>(i) + 0.5) / static_cast<double>(n_dome);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    dome.emplace_back(radius * r * std::cos(phi), radius * r * std::sin(phi), radius * z);
  }
  return dome;
}

Mask make_static_mask(const SemanticMap& semantic_map, std::span<const std::uint16_t> static_classes) {
  Mask mask(semantic_map.width, semantic_map.height);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    mask.data[i] =
        std::find(static_classes.begin(), static_classes.end(), semantic_map.data[i]) != static_classes.end();
  }
  return mask;
}

Mask make_dynamic_mask(std::span<const Box3D> boxes, const SemanticMap& semantic_map, const Camera& camera) {
  camera.validate();
  Mask mask(semantic_map.width, semantic_map.height);
  for (const auto& box : boxes) {
    double u0 = std::numeric_limits<double>::infinity(), v0 = u0;
    double u1 = -u0, v1 = -u0;
    bool any = false;
    for (const auto& corner : box.corners()) {
      const auto uv = project(corner, camera);
      if (!uv) continue;
      any = true;
      u0 = std::min(u0, uv->x());
      u1 = std::max(u1, uv->x());
      v0 = std::min(v0, uv->y());
      v1 = std::max(v1, uv->y());
    }
    if (!any) continue;
    const int x0 = static_cast<int>(std::max(0.0, std::ceil(u0)));
    const int x1 = static_cast<int>(std::min<double>(mask.width - 1, std::floor(u1)));
    const int y0 = static_cast<int>(std::max(0.0, std::ceil(v0)));
    const int y1 = static_cast<int>(std::min<double>(mask.height - 1, std::floor(v1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (semantic_map.at(x, y) == box.class_id) mask.at(x, y) = 1;
      }
    }
  }
  return mask;
}

MaskBundle make_masks(const CameraView& view, std::span<const Box3D> boxes,
                      std::span<const std::uint16_t> static_classes) {
  return {make_static_mask(view.semantic_map, static_classes),
          make_dynamic_mask(boxes, view.semantic_map, view.camera)};
}

InitPrior assemble_sequence(std::span<const CalibratedFrame, 3> frames, std::span<const RigidTransform, 3> poses,
                            const PrepOptions& options) {
  const RigidTransform world_to_center = poses[1].inverse();
  std::array<RigidTransform, 3> to_center;
  for (int f = 0; f < 3; ++f) {
    poses[f].inverse();  // rejects singular poses
    to_center[f] = world_to_center * poses[f];
  }

  std::array<std::vector<ViewMasks>, 3> masks;
  const bool use_masks = options.static_mask || options.dynamic_mask;
  if (use_masks) {
    for (int f = 0; f < 3; ++f) {
      for (const auto& view : frames[f].views) {
        auto m = make_masks(view, frames[f].boxes3d, options.static_classes);
        masks[f].push_back({std::move(m.static_mask), std::move(m.dynamic_mask)});
      }
    }
  }
  auto color_from = [&](int f, const Vec3& local) -> std::optional<Eigen::Vector3d> {
    const ViewHit hit = nearest_view(local, frames[f]);
    if (hit.view < 0) return std::nullopt;
    const ViewMasks* vm = use_masks ? &masks[f][hit.view] : nullptr;
    return masked_color(frames[f].views[hit.view], vm, hit.uv, options).value_or(options.unobserved);
  };

  InitPrior prior;
  for (int f = 0; f < 3; ++f) {
    const CalibratedFrame& frame = frames[f];
    std::vector<Vec3> pts = frame.lidar;
    if (options.filter_ground && pts.size() >= 3) {
      const auto keep = filter_ground(pts, options.ground).kept;
      std::vector<Vec3> next;
      next.reserve(keep.size());
      for (auto i : keep) next.push_back(pts[i]);
      pts = std::move(next);
    }
    if (options.erase_boxes) {
      const auto keep = erase_boxes(pts, frame.boxes3d);
      std::vector<Vec3> next;
      next.reserve(keep.size());
      for (auto i : keep) next.push_back(pts[i]);
      pts = std::move(next);
    }
    if (!options.lidar_init && !pts.empty()) {
      Vec3 lo = pts[0], hi = pts[0];
      for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      std::mt19937_64 rng(options.random_init_seed + static_cast<std::uint64_t>(f));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& p : pts) p = lo + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(hi - lo);
    }
    for (const auto& p : pts) {
      const auto color = color_from(f, p);
      if (!color) continue;  // outside every frustum of its own frame
      prior.points.push_back(to_center[f].apply(p));
      prior.colors.push_back(*color);
      prior.provenance.push_back(PointOrigin::kLidar);
    }
  }

  if (options.dome && !prior.points.empty()) {
    const auto dome = generate_dome(prior.points, options.n_dome, options.radius_factor);
    std::array<RigidTransform, 3> from_center;
    for (int f = 0; f < 3; ++f) from_center[f] = to_center[f].inverse();
    for (const auto& d : dome) {
      std::optional<Eigen::Vector3d> best;
      double best_depth = std::numeric_limits<double>::infinity();
      for (int f = 0; f < 3; ++f) {
        const Vec3 local = from_center[f].apply(d);
        const ViewHit hit = nearest_view(local, frames[f]);
        if (hit.view < 0 || hit.depth >= best_depth) continue;
        best_depth = hit.depth;
        const ViewMasks* vm = use_masks ? &masks[f][hit.view] : nullptr;
        best = masked_color(frames[f].views[hit.view], vm, hit.uv, options).value_or(options.unobserved);
      }
      prior.points.push_back(d);
      prior.colors.push_back(best.value_or(options.unobserved));
      prior.provenance.push_back(PointOrigin::kDome);
    }
  }
  return prior;
}

void write_prior_ply(const InitPrior& prior, const std::filesystem::path& path) {
  const std::vector<ply::Property> props = {{"x", ply::ScalarType::kFloat32},    {"y", ply::ScalarType::kFloat32},
                                            {"z", ply::ScalarType::kFloat32},    {"red", ply::ScalarType::kUInt8},
                                            {"green", ply::ScalarType::kUInt8}, {"blue", ply::ScalarType::kUInt8}};
  std::vector<double> rows;
  rows.reserve(prior.points.size() * 6);
  for (std::size_t i = 0; i < prior.points.size(); ++i) {
    for (int k = 0; k < 3; ++k) rows.push_back(prior.points[i][k]);
    for (int k = 0; k < 3; ++k) rows.push_back(std::clamp(prior.colors[i][k], 0.0, 1.0) * 255.0);
  }
  std::size_t dome = std::count(prior.provenance.begin(), prior.provenance.end(), PointOrigin::kDome);
  ply::write(path, {"dome_points " + std::to_string(dome)}, "vertex", props, rows);
}

GaussianScene prior_to_scene(const InitPrior& prior, std::int64_t place_id, const RigidTransform& ego_pose) {
  GaussianScene scene;
  scene.place_id = place_id;
  scene.ego_pose = ego_pose;
  scene.source = SceneSource::kInitializationOnly;
  const std::size_t n = prior.points.size();
  if (n == 0) return scene;
  const int k = static_cast<int>(std::min<std::size_t>(3, n - 1));
  const auto nn = k > 0 ? knn_table(prior.points, k, true) : std::vector<std::int32_t>{};
  scene.gaussians.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_sq = 0.0;
    for (int j = 0; j < k; ++j) mean_sq += (prior.points[nn[i * k + j]] - prior.points[i]).squaredNorm();
    const double s = k > 0 ? std::clamp(std::sqrt(mean_sq / k), 0.01, 5.0) : 0.1;
    Gaussian g;
    g.position = prior.points[i];
    g.scale = Vec3::Constant(s);
    for (int c = 0; c < 3; ++c) g.sh[c * 16] = (prior.colors[i][c] - 0.5) / kShC0;
    g.opacity = 0.1;
    scene.gaussians.push_back(g);
  }
  return scene;
}

}  // namespace gspr
