#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gspr/geometry.hpp"

namespace gspr {

// Exact k nearest neighbours by Euclidean distance, ties broken by the
// smaller index. Row i of the result holds the k neighbours of point i in
// ascending (distance, index) order. With `exclude_self`, i never lists
// itself (coincident duplicates are still eligible). Requires k < n when
// excluding self, k <= n otherwise. Uses a uniform bucket grid.
std::vector<std::int32_t> knn_table(std::span<const Vec3> points, int k, bool exclude_self);

}  // namespace gspr
