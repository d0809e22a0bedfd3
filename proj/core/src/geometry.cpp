#include "gspr/geometry.hpp"

#include <cmath>

#include <Eigen/LU>

#include "gspr/error.hpp"

namespace gspr {

RigidTransform RigidTransform::from_row_major(std::span<const double, 12> v) {
  RigidTransform out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.rotation(r, c) = v[r * 4 + c];
    out.translation[r] = v[r * 4 + 3];
  }
  return out;
}

std::array<double, 12> RigidTransform::to_row_major() const {
  std::array<double, 12> v{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[r * 4 + c] = rotation(r, c);
    v[r * 4 + 3] = translation[r];
  }
  return v;
}

RigidTransform RigidTransform::compose(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
  const double det = rotation.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-12) {
    throw InputError("rigid transform is not invertible (det = " + std::to_string(det) + ")");
  }
  const Mat3 inv = rotation.inverse();
  return {inv, -(inv * translation)};
}

double planar_distance(const RigidTransform& a, const RigidTransform& b) {
  return std::hypot(a.translation.x() - b.translation.x(), a.translation.y() - b.translation.y());
}

Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace gspr
