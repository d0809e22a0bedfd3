#include "gspr/frames.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gspr/error.hpp"
#include "gspr/png_io.hpp"

namespace gspr {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw FormatError(file.string() + ":" + std::to_string(line) + ": expected a number, got '" + s + "'");
  }
  return v;
}

RigidTransform parse_pose(const std::vector<std::string>& f, std::size_t offset, const std::filesystem::path& file,
                          std::size_t line) {
  std::array<double, 12> v{};
  for (int i = 0; i < 12; ++i) v[i] = parse_double(f[offset + i], file, line);
  return RigidTransform::from_row_major(v);
}

void append_pose(std::ostream& os, const RigidTransform& pose) {
  for (double v : pose.to_row_major()) os << '\t' << v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest: " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    fn(split_tabs(line), number);
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write file: " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

void Camera::validate() const {
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
    throw InputError("camera intrinsics need positive focal terms");
  }
  if (intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0 || intrinsics(2, 2) != 1.0) {
    throw InputError("camera intrinsics bottom row must be (0, 0, 1)");
  }
  if (width <= 0 || height <= 0) throw InputError("camera image size must be positive");
}

std::array<Vec3, 8> Box3D::corners() const {
  std::array<Vec3, 8> out;
  const Mat3 r = yaw_rotation(yaw);
  int i = 0;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int sz : {-1, 1}) {
        out[i++] = center + r * Vec3(0.5 * sx * size.x(), 0.5 * sy * size.y(), 0.5 * sz * size.z());
      }
    }
  }
  return out;
}

bool Box3D::contains(const Vec3& p) const {
  const Vec3 local = yaw_rotation(-yaw) * (p - center);
  return std::abs(local.x()) <= 0.5 * size.x() && std::abs(local.y()) <= 0.5 * size.y() &&
         std::abs(local.z()) <= 0.5 * size.z();
}

std::vector<FrameRecord> read_frame_manifest(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  std::vector<FrameRecord> out;
  for_each_line(path, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() < 19 || (f.size() - 16) % 3 != 0) {
      throw FormatError(path.string() + ":" + std::to_string(line) +
                        ": expected split, sequence, lidar, boxes, 12 pose values and camera triples");
    }
    FrameRecord r;
    r.split = f[0];
    r.sequence = f[1];
    r.lidar = resolve(base, f[2]);
    r.boxes = f[3].empty() || f[3] == "-" ? std::filesystem::path{} : resolve(base, f[3]);
    r.pose = parse_pose(f, 4, path, line);
    for (std::size_t i = 16; i < f.size(); i += 3) {
      r.cameras.push_back({resolve(base, f[i]), resolve(base, f[i + 1]), resolve(base, f[i + 2])});
    }
    out.push_back(std::move(r));
  });
  return out;
}

void write_frame_manifest(const std::vector<FrameRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) {
    out << r.split << '\t' << r.sequence << '\t' << r.lidar.generic_string() << '\t'
        << (r.boxes.empty() ? std::string("-") : r.boxes.generic_string());
    append_pose(out, r.pose);
    for (const auto& c : r.cameras) {
      out << '\t' << c.image.generic_string() << '\t' << c.semantic.generic_string() << '\t'
          << c.calib.generic_string();
    }
    out << '\n';
  }
}

CalibratedFrame load_frame(const FrameRecord& record) {
  for (const auto& p : {record.lidar}) {
    if (!std::filesystem::exists(p)) throw InputError("missing file: " + p.string());
  }
  CalibratedFrame frame;
  frame.lidar = read_lidar_bin(record.lidar);
  if (!record.boxes.empty()) frame.boxes3d = read_boxes(record.boxes);
  frame.pose = record.pose;
  for (const auto& c : record.cameras) {
    for (const auto& p : {c.image, c.semantic, c.calib}) {
      if (!std::filesystem::exists(p)) throw InputError("missing file: " + p.string());
    }
    CameraView v;
    v.image = read_png_rgb(c.image);
    v.semantic_map = read_png_labels(c.semantic);
    v.camera = read_calib(c.calib);
    v.camera.validate();
    if (!v.semantic_map.same_size(v.image.width, v.image.height) ||
        !v.semantic_map.same_size(v.camera.width, v.camera.height)) {
      throw InputError("image, semantic map and calibration sizes disagree for " + c.image.string());
    }
    frame.views.push_back(std::move(v));
  }
  return frame;
}

std::vector<Vec3> read_lidar_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() % 16 != 0) throw FormatError("LiDAR file size is not a multiple of 16 bytes: " + path.string());
  std::vector<Vec3> pts(data.size() / 16);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    float v[4];
    std::memcpy(v, data.data() + 16 * i, 16);
    pts[i] = {v[0], v[1], v[2]};
    if (!pts[i].allFinite()) throw DataError("non-finite LiDAR point " + std::to_string(i) + " in " + path.string());
  }
  return pts;
}

void write_lidar_bin(const std::vector<Vec3>& points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write file: " + path.string());
  for (const auto& p : points) {
    const float v[4] = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z()), 0.0f};
    out.write(reinterpret_cast<const char*>(v), sizeof(v));
  }
}

std::vector<Box3D> read_boxes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing file: " + path.string());
  std::vector<Box3D> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Box3D b;
    int cls = 0;
    ls >> b.center.x() >> b.center.y() >> b.center.z() >> b.size.x() >> b.size.y() >> b.size.z() >> b.yaw >> cls;
    if (!ls) throw FormatError("malformed box line '" + line + "' in " + path.string());
    if ((b.size.array() <= 0.0).any()) throw DataError("box with non-positive size in " + path.string());
    b.class_id = static_cast<std::uint16_t>(cls);
    out.push_back(b);
  }
  return out;
}

void write_boxes(const std::vector<Box3D>& boxes, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& b : boxes) {
    out << b.center.x() << ' ' << b.center.y() << ' ' << b.center.z() << ' ' << b.size.x() << ' ' << b.size.y()
        << ' ' << b.size.z() << ' ' << b.yaw << ' ' << b.class_id << '\n';
  }
}

Camera read_calib(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing file: " + path.string());
  Camera c;
  in >> c.width >> c.height;
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) in >> c.intrinsics(r, k);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) in >> c.rotation(r, k);
  for (int r = 0; r < 3; ++r) in >> c.translation[r];
  if (!in) throw FormatError("malformed calibration file: " + path.string());
  return c;
}

void write_calib(const Camera& c, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << c.width << ' ' << c.height << '\n';
  for (int r = 0; r < 3; ++r) out << c.intrinsics(r, 0) << ' ' << c.intrinsics(r, 1) << ' ' << c.intrinsics(r, 2) << '\n';
  for (int r = 0; r < 3; ++r) out << c.rotation(r, 0) << ' ' << c.rotation(r, 1) << ' ' << c.rotation(r, 2) << '\n';
  out << c.translation.x() << ' ' << c.translation.y() << ' ' << c.translation.z() << '\n';
}

std::vector<SceneRecord> read_scene_manifest(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  std::vector<SceneRecord> out;
  for_each_line(path, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != 15) {
      throw FormatError(path.string() + ":" + std::to_string(line) +
                        ": expected path, split, place_id and 12 pose values");
    }
    SceneRecord r;
    r.path = resolve(base, f[0]);
    r.split = f[1];
    r.place_id = static_cast<std::int64_t>(parse_double(f[2], path, line));
    r.pose = parse_pose(f, 3, path, line);
    out.push_back(std::move(r));
  });
  return out;
}

void write_scene_manifest(const std::vector<SceneRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) {
    out << r.path.generic_string() << '\t' << r.split << '\t' << r.place_id;
    append_pose(out, r.pose);
    out << '\n';
  }
}

}  // namespace gspr
