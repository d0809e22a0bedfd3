#include "gspr/net/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gspr/error.hpp"
#include "gspr/spatial.hpp"

namespace gspr::net {

Eigen::MatrixXd center_coords(const Eigen::MatrixXd& coords) {
  if (coords.rows() == 0) return coords;
  Eigen::MatrixXd d = coords.rowwise() - coords.row(0);
  const Eigen::RowVectorXd mean = d.colwise().mean();
  d.rowwise() -= mean;
  return d;
}

std::vector<std::int32_t> neighbor_table(const Eigen::MatrixXd& coords, int J) {
  std::vector<Vec3> pts(static_cast<std::size_t>(coords.rows()));
  for (Eigen::Index i = 0; i < coords.rows(); ++i) pts[i] = coords.row(i).transpose();
  return knn_table(pts, J, true);
}

GaussianGraph build_graph(const VoxelizedScene& vs, int J) {
  if (J < 1) throw ConfigError("graph neighbour count J must be >= 1");
  if (vs.size() <= J) {
    throw ConfigError("graph needs more than J = " + std::to_string(J) + " nodes, got " + std::to_string(vs.size()));
  }
  GaussianGraph g;
  g.J = J;
  g.coords = center_coords(vs.coords());
  g.feats = vs.encoded.rightCols(attr::kFeatureCount);
  g.neighbors = neighbor_table(g.coords, J);
  return g;
}

std::vector<std::int32_t> farthest_point_sample(const Eigen::MatrixXd& coords, std::size_t count) {
  const auto n = static_cast<std::size_t>(coords.rows());
  count = std::min(count, n);
  std::vector<std::int32_t> picked;
  if (count == 0) return picked;
  const Eigen::RowVector3d centroid = coords.colwise().mean();
  std::size_t seed = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (coords.row(i) - centroid).squaredNorm();
    if (d < best) {
      best = d;
      seed = i;
    }
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::size_t current = seed;
  picked.reserve(count);
  while (true) {
    picked.push_back(static_cast<std::int32_t>(current));
    taken[current] = 1;
    if (picked.size() == count) break;
    std::size_t next = n;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      dist[i] = std::min(dist[i], (coords.row(i) - coords.row(current)).squaredNorm());
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    }
    current = next;
  }
  return picked;
}

std::size_t pooled_count(std::size_t n, double rate) {
  // Guard against rate * n landing a hair above an integer.
  const double raw = rate * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

GraphPyramid build_pyramid(const Eigen::MatrixXd& centered_coords, int J, double pool_rate, int stages) {
  if (!(pool_rate > 0.0 && pool_rate <= 1.0)) throw ConfigError("pooling rate must lie in (0, 1]");
  GraphPyramid p;
  p.J = J;
  if (centered_coords.rows() <= J) {
    throw ConfigError("graph needs more than J = " + std::to_string(J) + " nodes, got " +
                      std::to_string(centered_coords.rows()));
  }
  p.levels.push_back({centered_coords, neighbor_table(centered_coords, J)});
  for (int s = 0; s < stages; ++s) {
    const GraphLevel& prev = p.levels.back();
    const std::size_t m = pooled_count(static_cast<std::size_t>(prev.coords.rows()), pool_rate);
    if (m < static_cast<std::size_t>(J) + 1) {
      throw ConfigError("pooling stage " + std::to_string(s + 1) + " would keep " + std::to_string(m) +
                        " nodes, fewer than J + 1 = " + std::to_string(J + 1));
    }
    auto centers = farthest_point_sample(prev.coords, m);
    std::sort(centers.begin(), centers.end());
    GraphLevel next;
    next.coords.resize(static_cast<Eigen::Index>(m), 3);
    for (std::size_t i = 0; i < m; ++i) next.coords.row(static_cast<Eigen::Index>(i)) = prev.coords.row(centers[i]);
    next.neighbors = neighbor_table(next.coords, J);
    p.centers.push_back(std::move(centers));
    p.levels.push_back(std::move(next));
  }
  return p;
}

}  // namespace gspr::net
