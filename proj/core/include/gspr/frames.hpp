#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gspr/geometry.hpp"
#include "gspr/image.hpp"

namespace gspr {

// Pinhole camera with LiDAR->camera extrinsics. Pixel centers sit at
// integer coordinates; the image covers [0, width) x [0, height).
struct Camera {
  Mat3 intrinsics = Mat3::Identity();
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 0;
  int height = 0;

  Vec3 to_camera(const Vec3& lidar_point) const { return rotation * lidar_point + translation; }
  // Throws InputError for non-positive focal terms or a bad bottom row.
  void validate() const;
};

struct Box3D {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();  // extents along the box's own x, y, z
  double yaw = 0.0;
  std::uint16_t class_id = 0;

  std::array<Vec3, 8> corners() const;
  bool contains(const Vec3& p) const;  // inclusive boundaries
};

struct CameraView {
  Image image;
  SemanticMap semantic_map;
  Camera camera;
};

// One timestamp: LiDAR scan, its 3D boxes (LiDAR frame), pose to world and
// every calibrated camera view.
struct CalibratedFrame {
  std::vector<CameraView> views;
  std::vector<Vec3> lidar;
  std::vector<Box3D> boxes3d;
  RigidTransform pose;
};

// One line of a frame manifest. Fields are tab-separated:
//   split  sequence  lidar  boxes  pose(12 row-major values)  [image  semantic  calib]+
// Consecutive lines with the same split and sequence form one drive.
struct FrameRecord {
  std::string split;
  std::string sequence;
  std::filesystem::path lidar;
  std::filesystem::path boxes;
  RigidTransform pose;
  struct CameraFiles {
    std::filesystem::path image;
    std::filesystem::path semantic;
    std::filesystem::path calib;
  };
  std::vector<CameraFiles> cameras;
};

// Relative paths resolve against the manifest's directory.
std::vector<FrameRecord> read_frame_manifest(const std::filesystem::path& path);
void write_frame_manifest(const std::vector<FrameRecord>& records, const std::filesystem::path& path);

CalibratedFrame load_frame(const FrameRecord& record);

// LiDAR scans: KITTI-style float32 (x, y, z, intensity) records.
std::vector<Vec3> read_lidar_bin(const std::filesystem::path& path);
void write_lidar_bin(const std::vector<Vec3>& points, const std::filesystem::path& path);

// Boxes: one per line "cx cy cz sx sy sz yaw class_id".
std::vector<Box3D> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::vector<Box3D>& boxes, const std::filesystem::path& path);

// Calibration: "width height" then K (9), R (9), t (3), whitespace separated.
Camera read_calib(const std::filesystem::path& path);
void write_calib(const Camera& camera, const std::filesystem::path& path);

// Scene manifest: one Gaussian scene (PLY) or voxel blob per line,
//   path  split  place_id  pose(12 row-major values)
struct SceneRecord {
  std::filesystem::path path;
  std::string split;
  std::int64_t place_id = 0;
  RigidTransform pose;
};

std::vector<SceneRecord> read_scene_manifest(const std::filesystem::path& path);
void write_scene_manifest(const std::vector<SceneRecord>& records, const std::filesystem::path& path);

}  // namespace gspr
