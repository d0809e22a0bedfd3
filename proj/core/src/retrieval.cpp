#include "gspr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "gspr/error.hpp"

namespace gspr {

std::vector<std::size_t> downsample_track(std::span<const RigidTransform> poses, double interval) {
  if (!(interval > 0.0)) throw InputError("downsampling interval must be positive");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (kept.empty() || planar_distance(poses[kept.back()], poses[i]) >= interval) kept.push_back(i);
  }
  return kept;
}

void DescriptorDB::add(DbEntry entry) {
  if (!entry.vector.allFinite() || std::abs(entry.vector.norm() - 1.0) > 1e-5) {
    throw InputError("database descriptors must be finite unit vectors");
  }
  if (!entry.pose.rotation.allFinite() || !entry.pose.translation.allFinite()) {
    throw InputError("database poses must be finite");
  }
  if (!entries_.empty() && entry.vector.size() != entries_.front().vector.size()) {
    throw InputError("descriptor dimension differs from the database");
  }
  entries_.push_back(std::move(entry));
}

std::vector<Neighbor> query_topk(const DescriptorDB& db, const Eigen::VectorXd& q, std::size_t k,
                                 std::int64_t exclude_key) {
  if (db.empty()) throw EmptyEvaluationError("query against an empty descriptor database");
  std::vector<Neighbor> all;
  all.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (exclude_key >= 0 && db[i].key == exclude_key) continue;
    if (db[i].vector.size() != q.size()) throw InputError("query dimension differs from the database");
    all.push_back({i, (db[i].vector - q).norm()});
  }
  if (k > all.size()) {
    throw InputError("K = " + std::to_string(k) + " exceeds the " + std::to_string(all.size()) + " candidates");
  }
  auto before = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
  all.resize(k);
  return all;
}

double RecallReport::at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw InputError("recall at " + std::to_string(k) + " was not evaluated");
}

RecallReport recall_at_k(const DescriptorDB& db, std::span<const DbEntry> queries, std::span<const int> ks,
                         double radius) {
  if (db.empty() || queries.empty()) throw EmptyEvaluationError("recall needs a non-empty database and query set");
  if (ks.empty()) throw InputError("no K values requested");
  for (int k : ks) {
    if (k < 1) throw InputError("K must be >= 1");
  }
  RecallReport r;
  r.ks.assign(ks.begin(), ks.end());
  r.queries = queries.size();
  std::vector<std::size_t> counts(ks.size(), 0);
  const int k_max = *std::max_element(ks.begin(), ks.end());
  for (const DbEntry& q : queries) {
    std::size_t candidates = 0;
    for (const auto& e : db.entries()) candidates += (q.key < 0 || e.key != q.key) ? 1 : 0;
    if (candidates == 0) throw EmptyEvaluationError("every database entry is excluded for a query");
    const auto top = query_topk(db, q.vector, std::min<std::size_t>(static_cast<std::size_t>(k_max), candidates), q.key);
    // first rank (1-based) that lands within the radius
    std::size_t first_hit = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < top.size(); ++i) {
      if (planar_distance(db[top[i].index].pose, q.pose) <= radius) {
        first_hit = i + 1;
        break;
      }
    }
    std::vector<char> row(ks.size(), 0);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      row[j] = first_hit <= static_cast<std::size_t>(ks[j]) ? 1 : 0;
      counts[j] += row[j];
    }
    r.hits.push_back(std::move(row));
  }
  for (std::size_t c : counts) r.recall.push_back(100.0 * static_cast<double>(c) / static_cast<double>(r.queries));
  return r;
}

std::vector<SweepRow> range_sweep(std::span<const double> max_ranges,
                                  const std::function<RecallReport(double)>& evaluate) {
  std::vector<SweepRow> rows;
  for (double r : max_ranges) {
    if (!(r > 0.0)) throw InputError("max ranges must be positive");
    rows.push_back({r, evaluate(r)});
  }
  return rows;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write report: " + path.string());
  return out;
}

std::string header(const RecallReport& r) {
  std::string h;
  for (std::size_t i = 0; i < r.ks.size(); ++i) h += fmt::format("{}AR@{}", i ? "," : "", r.ks[i]);
  return h;
}

std::string values(const RecallReport& r) {
  std::string v;
  for (std::size_t i = 0; i < r.recall.size(); ++i) v += fmt::format("{}{:.4f}", i ? "," : "", r.recall[i]);
  return v;
}

}  // namespace

void write_recall_csv(const RecallReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "queries," << header(r) << '\n' << r.queries << ',' << values(r) << '\n';
}

void write_hits_csv(const RecallReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "query";
  for (int k : r.ks) out << ",hit@" << k;
  out << '\n';
  for (std::size_t q = 0; q < r.hits.size(); ++q) {
    out << q;
    for (char h : r.hits[q]) out << ',' << static_cast<int>(h);
    out << '\n';
  }
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  if (rows.empty()) return;
  out << "max_range," << header(rows.front().report) << '\n';
  for (const auto& row : rows) out << fmt::format("{:g}", row.max_range) << ',' << values(row.report) << '\n';
}

std::string format_recall_table(std::span<const std::pair<std::string, RecallReport>> rows) {
  if (rows.empty()) return {};
  std::size_t label_w = 6;
  for (const auto& [label, r] : rows) label_w = std::max(label_w, label.size());
  const auto& ks = rows.front().second.ks;
  std::string out = fmt::format("{:<{}}", "config", label_w);
  for (int k : ks) out += fmt::format("  {:>7}", fmt::format("AR@{}", k));
  out += '\n';
  for (const auto& [label, r] : rows) {
    out += fmt::format("{:<{}}", label, label_w);
    for (double v : r.recall) out += fmt::format("  {:>7.2f}", v);
    out += '\n';
  }
  return out;
}

}  // namespace gspr
