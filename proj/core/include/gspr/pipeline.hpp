#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gspr/config.hpp"
#include "gspr/retrieval.hpp"
#include "gspr/synthetic_frames.hpp"

namespace gspr {

// Input feature groups fed to the network. A disabled group is zeroed in
// the encoded voxels; shapes never change. Disabling position collapses all
// coordinates to the origin.
struct FeatureMask {
  bool sh = true;
  bool opacity = true;
  bool rotation = true;
  bool scale = true;
  bool position = true;

  std::string label() const;
};

void apply_feature_mask(VoxelizedScene& vs, const FeatureMask& mask);

// Cumulative rows: SH, +opacity, +rotation, +scale, +position.
std::vector<FeatureMask> feature_ablation_rows();

struct PrepVariant {
  std::string label;
  PrepOptions options;
};

// Cumulative rows: random init, +LiDAR init, +dome, +static mask,
// +dynamic mask.
std::vector<PrepVariant> prep_ablation_rows(const PrepOptions& base);

struct SceneEntry {
  std::optional<GaussianScene> gaussians;
  std::optional<VoxelizedScene> voxels;  // pre-voxelized input
  std::string split;
  std::int64_t place_id = 0;
  RigidTransform pose;
};

// Rows ending in .gsvx load as voxel blobs, everything else as Gaussian PLY.
std::vector<SceneEntry> load_scenes(const std::filesystem::path& manifest);

// Voxelize (unless pre-voxelized), pick exactly n voxels, apply the mask.
VoxelizedScene network_input(const SceneEntry& e, const CylGridConfig& grid, int n, std::uint64_t seed,
                             const FeatureMask& mask = {});

// Synthetic places spaced 100 m apart; traversal 0 is split "database",
// traversal 1 "query", later ones "traversal<t>". `seed` changes the
// landmark layout as well as the observation noise.
struct SyntheticDatasetSpec {
  int places = 32;
  int traversals = 2;
  std::size_t gaussians = 4000;
  std::uint64_t seed = 0;
};

std::string traversal_split(int traversal);
std::vector<SceneEntry> synthetic_scenes(const SyntheticDatasetSpec& spec);

struct SyntheticFrameRecord {
  std::string split;
  std::string sequence;
  CalibratedFrame frame;
};

// `frames_per_place` frames per place and traversal; every place is its own
// sequence.
std::vector<SyntheticFrameRecord> synthetic_frames(const SyntheticDatasetSpec& spec, int frames_per_place);

// Sliding 3-frame windows over runs of equal (split, sequence); each window
// becomes an initialization-grade scene in the center frame.
std::vector<SceneEntry> scenes_from_frames(std::span<const SyntheticFrameRecord> frames, const PrepOptions& opts);

TrainResult train_scenes(std::span<const SceneEntry> scenes, const PipelineConfig& cfg, const FeatureMask& mask = {},
                         const TrainProgress& progress = {});

// Database: db_split scenes thinned to db_interval; queries: query_split
// scenes thinned to query_interval. A scene is never matched with itself.
// Throws EmptyEvaluationError when either side is empty.
RecallReport evaluate_scenes(std::span<const SceneEntry> scenes, const net::NetParams<float>& params,
                             const PipelineConfig& cfg, const FeatureMask& mask = {});

std::uint64_t fnv1a64_file(const std::filesystem::path& path);
// manifest.tsv: "<fnv1a64 hex>\t<bytes>\t<relative path>" for every other
// regular file below run_dir, sorted by path.
void write_run_manifest(const std::filesystem::path& run_dir);

// --- subcommands --------------------------------------------------------
// Each writes under cfg.paths.run_dir and refreshes its manifest.

// Returns the number of windows written.
std::size_t cmd_prep(const PipelineConfig& cfg);
std::size_t cmd_voxelize(const PipelineConfig& cfg);
TrainResult cmd_train(const PipelineConfig& cfg);
RecallReport cmd_eval(const PipelineConfig& cfg);
std::vector<SweepRow> cmd_sweep(const PipelineConfig& cfg, std::span<const double> max_ranges);

enum class AblationMode { kFeatures, kPrep };
std::vector<std::pair<std::string, RecallReport>> cmd_ablate(const PipelineConfig& cfg, AblationMode mode);

struct SynthOptions {
  SyntheticDatasetSpec dataset;
  bool frames = false;
  int frames_per_place = 3;
  std::filesystem::path out_dir;
};

// Writes scenes/*.ply + scenes.tsv, and with `frames` also frames/ +
// frames.tsv.
void cmd_synth(const SynthOptions& opts);

}  // namespace gspr
