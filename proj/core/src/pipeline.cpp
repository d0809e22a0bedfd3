#include "gspr/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gspr/error.hpp"
#include "gspr/net/checkpoint.hpp"
#include "gspr/png_io.hpp"
#include "gspr/seed.hpp"

namespace gspr {

namespace fs = std::filesystem;

std::string FeatureMask::label() const {
  std::vector<std::string> parts;
  if (sh) parts.emplace_back("sh");
  if (opacity) parts.emplace_back("opacity");
  if (rotation) parts.emplace_back("rotation");
  if (scale) parts.emplace_back("scale");
  if (position) parts.emplace_back("position");
  if (parts.empty()) return "none";
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += "+" + parts[i];
  return out;
}

void apply_feature_mask(VoxelizedScene& vs, const FeatureMask& mask) {
  auto zero = [&](int first, int count) { vs.encoded.middleCols(first, count).setZero(); };
  if (!mask.position) zero(attr::kPosition, 3);
  if (!mask.scale) zero(attr::kScale, 3);
  if (!mask.rotation) zero(attr::kRotation, 4);
  if (!mask.sh) zero(attr::kSh, attr::kShCount);
  if (!mask.opacity) zero(attr::kOpacity, 1);
}

std::vector<FeatureMask> feature_ablation_rows() {
  std::vector<FeatureMask> rows;
  FeatureMask m{true, false, false, false, false};
  rows.push_back(m);
  m.opacity = true;
  rows.push_back(m);
  m.rotation = true;
  rows.push_back(m);
  m.scale = true;
  rows.push_back(m);
  m.position = true;
  rows.push_back(m);
  return rows;
}

std::vector<PrepVariant> prep_ablation_rows(const PrepOptions& base) {
  std::vector<PrepVariant> rows;
  PrepOptions o = base;
  o.lidar_init = false;
  o.dome = false;
  o.static_mask = false;
  o.dynamic_mask = false;
  rows.push_back({"random_init", o});
  o.lidar_init = true;
  rows.push_back({"lidar_init", o});
  o.dome = true;
  rows.push_back({"lidar_init+dome", o});
  o.static_mask = true;
  rows.push_back({"lidar_init+dome+static_mask", o});
  o.dynamic_mask = true;
  rows.push_back({"lidar_init+dome+static_mask+dynamic_mask", o});
  return rows;
}

std::vector<SceneEntry> load_scenes(const fs::path& manifest) {
  std::vector<SceneEntry> out;
  for (const SceneRecord& r : read_scene_manifest(manifest)) {
    SceneEntry e;
    e.split = r.split;
    e.place_id = r.place_id;
    e.pose = r.pose;
    if (r.path.extension() == ".gsvx") {
      e.voxels = read_voxel_blob(r.path);
      e.voxels->pose = r.pose;
      e.voxels->place_id = r.place_id;
    } else {
      e.gaussians = read_gaussian_ply(r.path);
      e.gaussians->ego_pose = r.pose;
      e.gaussians->place_id = r.place_id;
    }
    out.push_back(std::move(e));
  }
  return out;
}

VoxelizedScene network_input(const SceneEntry& e, const CylGridConfig& grid, int n, std::uint64_t seed,
                             const FeatureMask& mask) {
  VoxelizedScene full;
  if (e.gaussians) {
    full = voxelize(*e.gaussians, grid);
  } else if (e.voxels) {
    full = *e.voxels;
  } else {
    throw InputError("scene entry carries neither Gaussians nor voxels");
  }
  if (full.size() == 0) {
    throw InputError(fmt::format("scene of place {} has no voxel inside the {} m range", e.place_id, grid.max_range));
  }
  VoxelizedScene vs = select_voxels(full, n, seed);
  vs.pose = e.pose;
  vs.place_id = e.place_id;
  apply_feature_mask(vs, mask);
  return vs;
}

std::string traversal_split(int traversal) {
  if (traversal == 0) return "database";
  if (traversal == 1) return "query";
  return "traversal" + std::to_string(traversal);
}

namespace {

SyntheticSceneSpec scene_spec(const SyntheticDatasetSpec& spec, int place) {
  SyntheticSceneSpec s;
  s.count = spec.gaussians;
  s.place_id = place;
  s.template_seed = mix_seed(0x5eedULL, spec.seed);
  return s;
}

std::uint64_t observation_seed(const SyntheticDatasetSpec& spec, int traversal) {
  return mix_seed(spec.seed, 0x7a00ULL + static_cast<std::uint64_t>(traversal));
}

}  // namespace

std::vector<SceneEntry> synthetic_scenes(const SyntheticDatasetSpec& spec) {
  if (spec.places < 1 || spec.traversals < 1) throw InputError("synthetic dataset needs places and traversals");
  std::vector<SceneEntry> out;
  for (int t = 0; t < spec.traversals; ++t) {
    for (int p = 0; p < spec.places; ++p) {
      SceneEntry e;
      e.gaussians = generate_synthetic_scene(observation_seed(spec, t), scene_spec(spec, p));
      e.split = traversal_split(t);
      e.place_id = p;
      e.pose = e.gaussians->ego_pose;
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<SyntheticFrameRecord> synthetic_frames(const SyntheticDatasetSpec& spec, int frames_per_place) {
  if (frames_per_place < 3) throw InputError("a prep window needs at least 3 frames per place");
  std::vector<SyntheticFrameRecord> out;
  for (int t = 0; t < spec.traversals; ++t) {
    for (int p = 0; p < spec.places; ++p) {
      SyntheticFrameSpec fs_spec;
      fs_spec.scene = scene_spec(spec, p);
      fs_spec.frames = frames_per_place;
      for (auto& f : generate_synthetic_frames(observation_seed(spec, t), fs_spec)) {
        out.push_back({traversal_split(t), fmt::format("place{:04d}", p), std::move(f)});
      }
    }
  }
  return out;
}

namespace {

// Start/end (exclusive) of runs with equal split and sequence.
template <typename Rec>
std::vector<std::pair<std::size_t, std::size_t>> drives(std::span<const Rec> recs) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= recs.size(); ++i) {
    if (i == recs.size() || recs[i].split != recs[start].split || recs[i].sequence != recs[start].sequence) {
      out.emplace_back(start, i);
      start = i;
    }
  }
  return out;
}

}  // namespace

std::vector<SceneEntry> scenes_from_frames(std::span<const SyntheticFrameRecord> frames, const PrepOptions& opts) {
  std::vector<SceneEntry> out;
  std::int64_t window = 0;
  for (const auto& [start, stop] : drives(frames)) {
    for (std::size_t c = start + 1; c + 1 < stop; ++c) {
      const std::array<CalibratedFrame, 3> win{frames[c - 1].frame, frames[c].frame, frames[c + 1].frame};
      const std::array<RigidTransform, 3> poses{win[0].pose, win[1].pose, win[2].pose};
      const InitPrior prior = assemble_sequence(win, poses, opts);
      SceneEntry e;
      e.gaussians = prior_to_scene(prior, window, win[1].pose);
      e.split = frames[c].split;
      e.place_id = window++;
      e.pose = win[1].pose;
      out.push_back(std::move(e));
    }
  }
  return out;
}

TrainResult train_scenes(std::span<const SceneEntry> scenes, const PipelineConfig& cfg, const FeatureMask& mask,
                         const TrainProgress& progress) {
  std::vector<VoxelizedScene> data;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& e = scenes[i];
    if (std::find(cfg.train_splits.begin(), cfg.train_splits.end(), e.split) == cfg.train_splits.end()) continue;
    data.push_back(network_input(e, cfg.grid, cfg.n_train, mix_seed(cfg.seed, i), mask));
  }
  if (data.empty()) throw InputError("no scene belongs to the training splits");
  spdlog::info("training on {} scenes ({} voxels each)", data.size(), cfg.n_train);
  return train(data, cfg.net, cfg.train, net::init_params<float>(cfg.net), progress);
}

RecallReport evaluate_scenes(std::span<const SceneEntry> scenes, const net::NetParams<float>& params,
                             const PipelineConfig& cfg, const FeatureMask& mask) {
  std::vector<std::size_t> db_idx, q_idx;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].split == cfg.eval.db_split) db_idx.push_back(i);
    if (scenes[i].split == cfg.eval.query_split) q_idx.push_back(i);
  }
  auto thin = [&](const std::vector<std::size_t>& idx, double interval) {
    std::vector<RigidTransform> poses;
    for (auto i : idx) poses.push_back(scenes[i].pose);
    std::vector<std::size_t> kept;
    for (auto k : downsample_track(poses, interval)) kept.push_back(idx[k]);
    return kept;
  };
  db_idx = thin(db_idx, cfg.eval.db_interval);
  q_idx = thin(q_idx, cfg.eval.query_interval);
  if (db_idx.empty() || q_idx.empty()) {
    throw EmptyEvaluationError(fmt::format("evaluation needs scenes in splits '{}' and '{}'", cfg.eval.db_split,
                                           cfg.eval.query_split));
  }
  std::map<std::size_t, Eigen::VectorXd> cache;
  auto descriptor = [&](std::size_t i) -> const Eigen::VectorXd& {
    auto it = cache.find(i);
    if (it == cache.end()) {
      const auto vs = network_input(scenes[i], cfg.grid, cfg.n_infer(), mix_seed(cfg.seed ^ 0xe7a1ULL, i), mask);
      it = cache.emplace(i, net::describe(params, cfg.net, vs).vector).first;
    }
    return it->second;
  };
  DescriptorDB db;
  for (auto i : db_idx) {
    db.add({descriptor(i), scenes[i].pose, scenes[i].place_id, static_cast<std::int64_t>(i)});
  }
  std::vector<DbEntry> queries;
  for (auto i : q_idx) {
    queries.push_back({descriptor(i), scenes[i].pose, scenes[i].place_id, static_cast<std::int64_t>(i)});
  }
  return recall_at_k(db, queries, cfg.eval.ks, cfg.eval.success_radius);
}

std::uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing file: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_run_manifest(const fs::path& run_dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), run_dir);
    if (rel == "manifest.tsv") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::ofstream out(run_dir / "manifest.tsv", std::ios::trunc);
  if (!out) throw InputError("cannot write run manifest in " + run_dir.string());
  for (const auto& rel : files) {
    out << fmt::format("{:016x}\t{}\t{}\n", fnv1a64_file(run_dir / rel), fs::file_size(run_dir / rel),
                       rel.generic_string());
  }
}

namespace {

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InputError("cannot create directory " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
}

std::vector<SceneEntry> require_scenes(const PipelineConfig& cfg) {
  if (cfg.paths.scenes.empty()) throw InputError("paths.scenes is not set");
  return load_scenes(cfg.paths.scenes);
}

fs::path eval_dir(const PipelineConfig& cfg) { return cfg.paths.run_dir / fmt::format("eval_{}", to_string(cfg.variant)); }

void write_report(const RecallReport& r, const fs::path& dir, const std::string& label) {
  ensure_dir(dir);
  write_recall_csv(r, dir / "recall.csv");
  write_hits_csv(r, dir / "hits.csv");
  const std::vector<std::pair<std::string, RecallReport>> rows{{label, r}};
  write_text(dir / "table.txt", format_recall_table(rows));
}

void write_ablation_csv(const std::vector<std::pair<std::string, RecallReport>>& rows, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  if (rows.empty()) return;
  out << "config";
  for (int k : rows.front().second.ks) out << ",AR@" << k;
  out << '\n';
  for (const auto& [label, r] : rows) {
    out << label;
    for (double v : r.recall) out << fmt::format(",{:.4f}", v);
    out << '\n';
  }
}

std::vector<SyntheticFrameRecord> load_frame_records(const fs::path& manifest) {
  std::vector<SyntheticFrameRecord> out;
  for (const auto& r : read_frame_manifest(manifest)) out.push_back({r.split, r.sequence, load_frame(r)});
  return out;
}

}  // namespace

std::size_t cmd_prep(const PipelineConfig& cfg) {
  if (cfg.paths.frames.empty()) throw InputError("paths.frames is not set");
  const auto records = read_frame_manifest(cfg.paths.frames);
  const fs::path dir = cfg.paths.run_dir / "prep";
  ensure_dir(dir);
  std::vector<SceneRecord> scenes;
  std::size_t window = 0;
  for (const auto& [start, stop] : drives<FrameRecord>(records)) {
    std::vector<CalibratedFrame> loaded;
    for (std::size_t i = start; i < stop; ++i) loaded.push_back(load_frame(records[i]));
    for (std::size_t c = 1; c + 1 < loaded.size(); ++c) {
      const std::array<CalibratedFrame, 3> win{loaded[c - 1], loaded[c], loaded[c + 1]};
      const std::array<RigidTransform, 3> poses{win[0].pose, win[1].pose, win[2].pose};
      const InitPrior prior = assemble_sequence(win, poses, cfg.prep);
      const fs::path wdir = dir / fmt::format("window_{:04d}", window);
      ensure_dir(wdir);
      write_prior_ply(prior, wdir / "prior.ply");
      for (std::size_t v = 0; v < win[1].views.size(); ++v) {
        const MaskBundle m = make_masks(win[1].views[v], win[1].boxes3d, cfg.prep.static_classes);
        write_png_mask(m.static_mask, wdir / fmt::format("static_mask_{}.png", v));
        write_png_mask(m.dynamic_mask, wdir / fmt::format("dynamic_mask_{}.png", v));
      }
      const auto id = static_cast<std::int64_t>(window);
      write_gaussian_ply(prior_to_scene(prior, id, win[1].pose), wdir / "scene.ply");
      scenes.push_back({wdir.filename() / "scene.ply", records[start + c].split, id, win[1].pose});
      ++window;
    }
  }
  write_scene_manifest(scenes, dir / "scenes.tsv");
  write_run_manifest(cfg.paths.run_dir);
  spdlog::info("prep wrote {} windows to {}", window, dir.string());
  return window;
}

std::size_t cmd_voxelize(const PipelineConfig& cfg) {
  if (cfg.paths.scenes.empty()) throw InputError("paths.scenes is not set");
  const fs::path dir = cfg.paths.run_dir / "voxels";
  ensure_dir(dir);
  std::vector<SceneRecord> out;
  std::size_t i = 0;
  for (const SceneRecord& r : read_scene_manifest(cfg.paths.scenes)) {
    GaussianScene scene = read_gaussian_ply(r.path);
    VoxelizedScene vs = voxelize(scene, cfg.grid);
    const fs::path blob = dir / fmt::format("scene_{:05d}.gsvx", i++);
    write_voxel_blob(vs, blob);
    out.push_back({blob.filename(), r.split, r.place_id, r.pose});
  }
  write_scene_manifest(out, dir / "voxels.tsv");
  write_run_manifest(cfg.paths.run_dir);
  return out.size();
}

TrainResult cmd_train(const PipelineConfig& cfg) {
  const auto scenes = require_scenes(cfg);
  ensure_dir(cfg.paths.run_dir);
  TrainResult res = train_scenes(scenes, cfg, {}, [](const LossRecord& r) {
    spdlog::debug("epoch {} step {} loss {:.6f} lr {:g}", r.epoch, r.step, r.loss, r.lr);
  });
  const fs::path ckpt = cfg.checkpoint_path();
  if (ckpt.has_parent_path()) ensure_dir(ckpt.parent_path());
  net::save_checkpoint(res.params, cfg.net, ckpt);
  write_loss_csv(res.trace, cfg.paths.run_dir / "loss.csv");
  write_text(cfg.paths.run_dir / "config.yaml", dump_config(cfg));
  write_run_manifest(cfg.paths.run_dir);
  spdlog::info("trained {} steps; checkpoint {}", res.steps, ckpt.string());
  return res;
}

RecallReport cmd_eval(const PipelineConfig& cfg) {
  const auto scenes = require_scenes(cfg);
  const auto params = net::load_checkpoint(cfg.net, cfg.checkpoint_path());
  const RecallReport r = evaluate_scenes(scenes, params, cfg);
  write_report(r, eval_dir(cfg), to_string(cfg.variant));
  write_run_manifest(cfg.paths.run_dir);
  return r;
}

std::vector<SweepRow> cmd_sweep(const PipelineConfig& cfg, std::span<const double> max_ranges) {
  const auto scenes = require_scenes(cfg);
  for (const auto& e : scenes) {
    if (!e.gaussians) throw InputError("range sweeps need Gaussian scenes, not voxel blobs");
  }
  const auto params = net::load_checkpoint(cfg.net, cfg.checkpoint_path());
  const auto rows = range_sweep(max_ranges, [&](double r) {
    PipelineConfig c = cfg;
    c.grid.max_range = r;
    return evaluate_scenes(scenes, params, c);
  });
  ensure_dir(cfg.paths.run_dir);
  write_sweep_csv(rows, cfg.paths.run_dir / "sweep.csv");
  write_run_manifest(cfg.paths.run_dir);
  return rows;
}

std::vector<std::pair<std::string, RecallReport>> cmd_ablate(const PipelineConfig& cfg, AblationMode mode) {
  std::vector<std::pair<std::string, RecallReport>> rows;
  const fs::path dir = cfg.paths.run_dir / (mode == AblationMode::kFeatures ? "ablate_features" : "ablate_prep");
  ensure_dir(dir);
  if (mode == AblationMode::kFeatures) {
    const auto scenes = require_scenes(cfg);
    for (const FeatureMask& m : feature_ablation_rows()) {
      const TrainResult res = train_scenes(scenes, cfg, m);
      write_loss_csv(res.trace, dir / fmt::format("loss_{}.csv", m.label()));
      rows.emplace_back(m.label(), evaluate_scenes(scenes, res.params, cfg, m));
    }
  } else {
    if (cfg.paths.frames.empty()) throw InputError("paths.frames is not set");
    const auto frames = load_frame_records(cfg.paths.frames);
    for (const PrepVariant& v : prep_ablation_rows(cfg.prep)) {
      const auto scenes = scenes_from_frames(frames, v.options);
      const TrainResult res = train_scenes(scenes, cfg);
      write_loss_csv(res.trace, dir / fmt::format("loss_{}.csv", v.label));
      rows.emplace_back(v.label, evaluate_scenes(scenes, res.params, cfg));
    }
  }
  write_ablation_csv(rows, dir / "ablation.csv");
  write_text(dir / "table.txt", format_recall_table(rows));
  write_run_manifest(cfg.paths.run_dir);
  return rows;
}

void cmd_synth(const SynthOptions& opts) {
  if (opts.out_dir.empty()) throw InputError("synth needs an output directory");
  const fs::path scene_dir = opts.out_dir / "scenes";
  ensure_dir(scene_dir);
  std::vector<SceneRecord> records;
  std::size_t i = 0;
  for (const SceneEntry& e : synthetic_scenes(opts.dataset)) {
    const fs::path p = scene_dir / fmt::format("{}_{:04d}.ply", e.split, e.place_id);
    write_gaussian_ply(*e.gaussians, p);
    records.push_back({fs::path("scenes") / p.filename(), e.split, e.place_id, e.pose});
    ++i;
  }
  write_scene_manifest(records, opts.out_dir / "scenes.tsv");
  if (!opts.frames) return;

  const fs::path frame_dir = opts.out_dir / "frames";
  ensure_dir(frame_dir);
  std::vector<FrameRecord> frames;
  std::size_t f = 0;
  for (const auto& rec : synthetic_frames(opts.dataset, opts.frames_per_place)) {
    const std::string stem = fmt::format("{}_{}_{:03d}", rec.split, rec.sequence, f++);
    FrameRecord fr;
    fr.split = rec.split;
    fr.sequence = rec.sequence;
    fr.pose = rec.frame.pose;
    fr.lidar = fs::path("frames") / (stem + ".bin");
    fr.boxes = fs::path("frames") / (stem + "_boxes.txt");
    write_lidar_bin(rec.frame.lidar, opts.out_dir / fr.lidar);
    write_boxes(rec.frame.boxes3d, opts.out_dir / fr.boxes);
    for (std::size_t v = 0; v < rec.frame.views.size(); ++v) {
      FrameRecord::CameraFiles cf;
      cf.image = fs::path("frames") / fmt::format("{}_cam{}.png", stem, v);
      cf.semantic = fs::path("frames") / fmt::format("{}_cam{}_sem.png", stem, v);
      cf.calib = fs::path("frames") / fmt::format("{}_cam{}.calib", stem, v);
      write_png_rgb(rec.frame.views[v].image, opts.out_dir / cf.image);
      write_png_labels(rec.frame.views[v].semantic_map, opts.out_dir / cf.semantic);
      write_calib(rec.frame.views[v].camera, opts.out_dir / cf.calib);
      fr.cameras.push_back(cf);
    }
    frames.push_back(std::move(fr));
  }
  write_frame_manifest(frames, opts.out_dir / "frames.tsv");
}

}  // namespace gspr
