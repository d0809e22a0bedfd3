#pragma once

#include <array>
#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gspr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform x' = R x + t (meters).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  // From 12 row-major values of the 3x4 matrix [R | t].
  static RigidTransform from_row_major(std::span<const double, 12> v);
  std::array<double, 12> to_row_major() const;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform compose(const RigidTransform& rhs) const;
  // Throws InputError when the rotation block is singular.
  RigidTransform inverse() const;
};

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return a.compose(b);
}

// Euclidean distance in the ground (x, y) plane.
double planar_distance(const RigidTransform& a, const RigidTransform& b);

// Rotation about +z by `yaw` radians.
Mat3 yaw_rotation(double yaw);

}  // namespace gspr
