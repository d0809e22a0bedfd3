#include "gspr/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

#include "gspr/error.hpp"

namespace gspr {
namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667b19e3779f9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

constexpr std::int64_t kMaxRings = 24;

struct Candidate {
  double d2;
  std::int32_t index;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

}  // namespace

std::vector<std::int32_t> knn_table(std::span<const Vec3> points, int k, bool exclude_self) {
  const auto n = static_cast<std::int64_t>(points.size());
  if (k < 0 || (exclude_self ? k >= n : k > n)) {
    throw ConfigError("knn: k = " + std::to_string(k) + " is too large for " + std::to_string(n) + " points");
  }
  std::vector<std::int32_t> table(static_cast<std::size_t>(n) * k);
  if (k == 0) return table;

  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  const double max_extent = extent.maxCoeff();
  // Aim for about k points per occupied cell; thin axes count as one cell.
  double cell = max_extent;
  if (max_extent > 0.0) {
    double volume = 1.0;
    int dims = 0;
    for (int a = 0; a < 3; ++a) {
      if (extent[a] > 1e-9 * max_extent) {
        volume *= extent[a];
        ++dims;
      }
    }
    cell = std::pow(volume * (k + 1) / static_cast<double>(n), 1.0 / dims);
    cell = std::clamp(cell, max_extent / 256.0, max_extent);
  }
  const double inv = cell > 0.0 ? 1.0 / cell : 0.0;
  auto key_of = [&](const Vec3& p) {
    return CellKey{static_cast<std::int64_t>(std::floor((p.x() - lo.x()) * inv)),
                   static_cast<std::int64_t>(std::floor((p.y() - lo.y()) * inv)),
                   static_cast<std::int64_t>(std::floor((p.z() - lo.z()) * inv))};
  };
  std::unordered_map<CellKey, std::vector<std::int32_t>, CellHash> grid;
  std::vector<CellKey> keys(n);
  for (std::int64_t i = 0; i < n; ++i) {
    keys[i] = key_of(points[i]);
    grid[keys[i]].push_back(static_cast<std::int32_t>(i));
  }
  CellKey kmax = key_of(hi);
  const std::int64_t max_ring = std::max({kmax.x, kmax.y, kmax.z}) + 1;

  std::priority_queue<Candidate> heap;  // max-heap on (d2, index)
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec3& q = points[i];
    const CellKey c = keys[i];
    auto offer = [&](std::int32_t j) {
      if (exclude_self && j == i) return;
      const Candidate cand{(points[j] - q).squaredNorm(), j};
      if (static_cast<int>(heap.size()) < k) {
        heap.push(cand);
      } else if (cand < heap.top()) {
        heap.pop();
        heap.push(cand);
      }
    };
    for (std::int64_t r = 0; r <= max_ring; ++r) {
      if (r > kMaxRings) {
        // Sparse outlier: fall back to a full scan.
        while (!heap.empty()) heap.pop();
        for (std::int64_t j = 0; j < n; ++j) offer(static_cast<std::int32_t>(j));
        break;
      }
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        for (std::int64_t dy = -r; dy <= r; ++dy) {
          const bool edge = std::abs(dx) == r || std::abs(dy) == r;
          for (std::int64_t dz = -r; dz <= r; dz += (edge || r == 0) ? 1 : 2 * r) {
            const auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
            if (it == grid.end()) continue;
            for (const std::int32_t j : it->second) offer(j);
          }
        }
      }
      // Unvisited cells are at least r * cell away from q.
      if (static_cast<int>(heap.size()) == k && cell > 0.0) {
        const double bound = static_cast<double>(r) * cell;
        if (heap.top().d2 < bound * bound) break;
      }
    }
    for (int s = k - 1; s >= 0; --s) {
      table[static_cast<std::size_t>(i) * k + s] = heap.top().index;
      heap.pop();
    }
  }
  return table;
}

}  // namespace gspr
