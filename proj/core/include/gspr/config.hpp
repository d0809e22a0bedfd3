#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gspr/mgs_prep.hpp"
#include "gspr/net/network.hpp"
#include "gspr/trainer.hpp"
#include "gspr/voxelizer.hpp"

namespace gspr {

enum class Variant {
  kGspr,   // trains at 4096 voxels, infers at 8192
  kGsprL,  // infers at half the voxel budget
};

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);  // "gspr" | "gspr_l"

struct PathsConfig {
  std::filesystem::path frames;  // frame manifest consumed by prep
  std::filesystem::path scenes;  // scene manifest (PLY or voxel blobs)
  std::filesystem::path run_dir = "run";
  std::filesystem::path checkpoint;  // defaults to <run_dir>/checkpoint.bin
};

struct EvalConfig {
  double db_interval = 3.0;
  double query_interval = 9.0;
  double success_radius = 9.0;
  std::vector<int> ks{1, 5, 10};
  std::string db_split = "database";
  std::string query_split = "query";
};

struct PipelineConfig {
  PathsConfig paths;
  CylGridConfig grid;
  net::NetConfig net;
  TrainConfig train;
  EvalConfig eval;
  PrepOptions prep;
  std::vector<std::string> train_splits{"train"};
  Variant variant = Variant::kGspr;
  int n_train = 4096;
  int n_infer_full = 8192;
  std::uint64_t seed = 0;

  int n_infer() const { return variant == Variant::kGsprL ? n_infer_full / 2 : n_infer_full; }
  std::filesystem::path checkpoint_path() const;
  // Propagates `seed` into the training, initialization and sampling seeds.
  void set_seed(std::uint64_t s);
  void validate() const;
};

// YAML document with optional sections paths, grid, net, train, eval, prep
// and top-level keys variant, seed, n_train, n_infer, train_splits. Unknown
// keys raise ConfigError. Relative paths resolve against `base_dir`.
PipelineConfig parse_config(const std::string& yaml, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
std::string dump_config(const PipelineConfig& cfg);

}  // namespace gspr
