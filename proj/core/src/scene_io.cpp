#include "gspr/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gspr/error.hpp"
#include "gspr/ply.hpp"

namespace gspr {
namespace {

constexpr double kOpacityFloor = 1e-12;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<std::string> gaussian_property_names() {
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < 45; ++i) names.push_back("f_rest_" + std::to_string(i));
  names.push_back("opacity");
  for (int i = 0; i < 3; ++i) names.push_back("scale_" + std::to_string(i));
  for (int i = 0; i < 4; ++i) names.push_back("rot_" + std::to_string(i));
  return names;
}

// SH index (channel-major, 16 per channel) of f_dc_c / f_rest_k.
int dc_slot(int channel) { return channel * 16; }
int rest_slot(int k) { return (k / 15) * 16 + 1 + k % 15; }

}  // namespace

std::array<double, attr::kCount> Gaussian::to_vector() const {
  std::array<double, attr::kCount> v{};
  for (int i = 0; i < 3; ++i) {
    v[attr::kPosition + i] = position[i];
    v[attr::kScale + i] = scale[i];
  }
  for (int i = 0; i < 4; ++i) v[attr::kRotation + i] = rotation[i];
  for (int i = 0; i < attr::kShCount; ++i) v[attr::kSh + i] = sh[i];
  v[attr::kOpacity] = opacity;
  return v;
}

Gaussian Gaussian::from_vector(std::span<const double, attr::kCount> v) {
  Gaussian g;
  for (int i = 0; i < 3; ++i) {
    g.position[i] = v[attr::kPosition + i];
    g.scale[i] = v[attr::kScale + i];
  }
  for (int i = 0; i < 4; ++i) g.rotation[i] = v[attr::kRotation + i];
  for (int i = 0; i < attr::kShCount; ++i) g.sh[i] = v[attr::kSh + i];
  g.opacity = v[attr::kOpacity];
  return g;
}

bool canonicalize_quaternion(Eigen::Vector4d& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) return false;
  q /= n;
  if (q[0] < 0.0) q = -q;
  return true;
}

std::string validate(const Gaussian& g) {
  for (double x : g.to_vector()) {
    if (!std::isfinite(x)) return "non-finite attribute";
  }
  if ((g.scale.array() <= 0.0).any()) return "non-positive scale";
  if (std::abs(g.rotation.norm() - 1.0) > 1e-6) return "rotation is not a unit quaternion";
  if (g.rotation[0] < 0.0) return "rotation has negative w";
  if (!(g.opacity > 0.0 && g.opacity < 1.0)) return "opacity outside (0, 1)";
  return {};
}

const char* to_string(SceneSource s) {
  switch (s) {
    case SceneSource::kExternalOptimized: return "external_optimized";
    case SceneSource::kInitializationOnly: return "initialization_only";
    case SceneSource::kSynthetic: return "synthetic";
  }
  return "external_optimized";
}

SceneSource scene_source_from_string(const std::string& s) {
  if (s == "external_optimized") return SceneSource::kExternalOptimized;
  if (s == "initialization_only") return SceneSource::kInitializationOnly;
  if (s == "synthetic") return SceneSource::kSynthetic;
  throw FormatError("unknown scene source '" + s + "'");
}

GaussianScene read_gaussian_ply(const std::filesystem::path& path) {
  const ply::File file = ply::read(path);
  const ply::Table* vertex = file.find("vertex");
  if (vertex == nullptr) throw FormatError("PLY has no 'vertex' element: " + path.string());

  const auto names = gaussian_property_names();
  std::vector<std::size_t> col(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto idx = vertex->element.find(names[i]);
    if (!idx || vertex->element.properties[*idx].is_list) {
      throw FormatError("Gaussian PLY is missing property '" + names[i] + "': " + path.string());
    }
    col[i] = vertex->scalar_columns[*idx];
  }
  const auto c = [&](std::size_t row, std::size_t prop) { return vertex->at(row, col[prop]); };
  constexpr std::size_t kDc = 6, kRest = 9, kOpacity = 54, kScale = 55, kRot = 58;

  GaussianScene scene;
  for (const auto& comment : file.comments) {
    std::istringstream cs(comment);
    std::string key;
    cs >> key;
    if (key == "place_id") {
      cs >> scene.place_id;
    } else if (key == "source") {
      std::string s;
      cs >> s;
      scene.source = scene_source_from_string(s);
    } else if (key == "ego_pose") {
      std::array<double, 12> v{};
      for (auto& x : v) cs >> x;
      if (!cs) throw FormatError("malformed ego_pose comment in " + path.string());
      scene.ego_pose = RigidTransform::from_row_major(v);
    }
  }

  const std::size_t n = vertex->element.count;
  scene.gaussians.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t p = 0; p < names.size(); ++p) {
      if (!std::isfinite(c(r, p))) {
        throw DataError("non-finite value in property '" + names[p] + "' of record " + std::to_string(r) +
                        ": " + path.string());
      }
    }
    Gaussian g;
    for (int i = 0; i < 3; ++i) {
      g.position[i] = c(r, i);
      g.scale[i] = std::max(std::exp(c(r, kScale + i)), std::numeric_limits<double>::min());
      g.sh[dc_slot(i)] = c(r, kDc + i);
    }
    if (!g.scale.allFinite()) throw DataError("scale overflows in record " + std::to_string(r));
    for (int k = 0; k < 45; ++k) g.sh[rest_slot(k)] = c(r, kRest + k);
    g.opacity = std::clamp(sigmoid(c(r, kOpacity)), kOpacityFloor, 1.0 - kOpacityFloor);
    for (int i = 0; i < 4; ++i) g.rotation[i] = c(r, kRot + i);
    if (!canonicalize_quaternion(g.rotation)) {
      throw DataError("zero rotation quaternion in record " + std::to_string(r) + ": " + path.string());
    }
    scene.gaussians.push_back(g);
  }
  return scene;
}

void write_gaussian_ply(const GaussianScene& scene, const std::filesystem::path& path, PlyPrecision precision) {
  const auto names = gaussian_property_names();
  const auto type = precision == PlyPrecision::kFloat64 ? ply::ScalarType::kFloat64 : ply::ScalarType::kFloat32;
  std::vector<ply::Property> props;
  for (const auto& n : names) props.push_back({n, type});

  std::vector<double> rows;
  rows.reserve(scene.gaussians.size() * names.size());
  for (std::size_t r = 0; r < scene.gaussians.size(); ++r) {
    const Gaussian& g = scene.gaussians[r];
    if (g.opacity <= 0.0 || g.opacity >= 1.0) {
      throw InputError("opacity of Gaussian " + std::to_string(r) + " is not strictly inside (0, 1)");
    }
    if (const auto why = validate(g); !why.empty()) {
      throw InputError("Gaussian " + std::to_string(r) + " is invalid: " + why);
    }
    const std::size_t base = rows.size();
    rows.resize(base + names.size(), 0.0);
    double* row = rows.data() + base;
    for (int i = 0; i < 3; ++i) {
      row[i] = g.position[i];
      row[6 + i] = g.sh[dc_slot(i)];
      row[55 + i] = std::log(g.scale[i]);
    }
    for (int k = 0; k < 45; ++k) row[9 + k] = g.sh[rest_slot(k)];
    row[54] = std::log(g.opacity) - std::log1p(-g.opacity);
    for (int i = 0; i < 4; ++i) row[58 + i] = g.rotation[i];
  }

  std::ostringstream pose;
  pose.precision(17);
  pose << "ego_pose";
  for (double v : scene.ego_pose.to_row_major()) pose << ' ' << v;
  const std::vector<std::string> comments = {"place_id " + std::to_string(scene.place_id),
                                             std::string("source ") + to_string(scene.source), pose.str()};
  ply::write(path, comments, "vertex", props, rows);
}

}  // namespace gspr
