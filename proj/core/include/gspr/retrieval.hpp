#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gspr/geometry.hpp"

namespace gspr {

// Greedy sweep: keep the first pose, then every pose whose planar distance
// to the last kept pose is at least `interval`.
std::vector<std::size_t> downsample_track(std::span<const RigidTransform> poses, double interval);

struct DbEntry {
  Eigen::VectorXd vector;  // unit norm
  RigidTransform pose;
  std::int64_t place_id = 0;
  std::int64_t key = -1;  // scene identity; equal keys are never matched
};

class DescriptorDB {
 public:
  // Throws InputError for a non-unit vector, a non-finite pose or a
  // dimension differing from earlier entries.
  void add(DbEntry entry);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const DbEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<DbEntry>& entries() const { return entries_; }

 private:
  std::vector<DbEntry> entries_;
};

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

// Exact K nearest by Euclidean distance, ties by insertion order. Entries
// whose key equals `exclude_key` (when >= 0) are skipped. Throws
// EmptyEvaluationError on an empty database and InputError when K exceeds
// the number of candidates.
std::vector<Neighbor> query_topk(const DescriptorDB& db, const Eigen::VectorXd& q, std::size_t k,
                                 std::int64_t exclude_key = -1);

struct RecallReport {
  std::vector<int> ks;
  std::vector<double> recall;           // percent, aligned with ks
  std::vector<std::vector<char>> hits;  // per query, aligned with ks
  std::size_t queries = 0;

  // Recall at k; throws InputError when k was not evaluated.
  double at(int k) const;
};

// A query is a hit at K when any of its top-K results lies within `radius`
// planar meters of its pose. K larger than the candidate count is clamped.
// Throws EmptyEvaluationError on empty inputs.
RecallReport recall_at_k(const DescriptorDB& db, std::span<const DbEntry> queries, std::span<const int> ks,
                         double radius = 9.0);

struct SweepRow {
  double max_range = 0.0;
  RecallReport report;
};

std::vector<SweepRow> range_sweep(std::span<const double> max_ranges,
                                  const std::function<RecallReport(double)>& evaluate);

// Column header "AR@k" per evaluated k.
void write_recall_csv(const RecallReport& r, const std::filesystem::path& path);
void write_hits_csv(const RecallReport& r, const std::filesystem::path& path);
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);
// Aligned plain-text table, one labelled row per report.
std::string format_recall_table(std::span<const std::pair<std::string, RecallReport>> rows);

}  // namespace gspr
