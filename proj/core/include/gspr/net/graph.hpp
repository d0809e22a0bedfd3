#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gspr/voxelizer.hpp"

namespace gspr::net {

// Node graph over encoded voxels: zero-mean coordinates, the 56 non-position
// attributes as features, and J nearest neighbours per node.
struct GaussianGraph {
  Eigen::MatrixXd coords;                // n x 3
  Eigen::MatrixXd feats;                 // n x 56
  std::vector<std::int32_t> neighbors;  // n x J, row-major
  int J = 0;

  Eigen::Index size() const { return coords.rows(); }
};

// Zero-mean normalization. Coordinates are first differenced against the
// first row, so adding a constant offset to every (exactly representable)
// input row leaves the output bit-identical.
Eigen::MatrixXd center_coords(const Eigen::MatrixXd& coords);

// Throws ConfigError when n <= J.
GaussianGraph build_graph(const VoxelizedScene& vs, int J);

// J nearest neighbours, self excluded, ties by smaller index.
std::vector<std::int32_t> neighbor_table(const Eigen::MatrixXd& coords, int J);

// Farthest point sampling seeded at the node nearest the centroid; ties go
// to the smaller index. Returns nodes in selection order.
std::vector<std::int32_t> farthest_point_sample(const Eigen::MatrixXd& coords, std::size_t count);

struct GraphLevel {
  Eigen::MatrixXd coords;                // n_l x 3
  std::vector<std::int32_t> neighbors;  // n_l x J
};

// Coordinate-only structure of the network: level 0 plus one level per
// pooling stage. centers[l] lists the level-l nodes (ascending) that form
// level l + 1. Depends only on coordinates, so it can be cached per scene.
struct GraphPyramid {
  int J = 0;
  std::vector<GraphLevel> levels;
  std::vector<std::vector<std::int32_t>> centers;
};

// Number of nodes kept by one pooling stage: ceil(rate * n).
std::size_t pooled_count(std::size_t n, double rate);

// Throws ConfigError when a pooled level would have fewer than J + 1 nodes.
GraphPyramid build_pyramid(const Eigen::MatrixXd& centered_coords, int J, double pool_rate, int stages);

}  // namespace gspr::net
