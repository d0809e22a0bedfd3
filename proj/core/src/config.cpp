#include "gspr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gspr/error.hpp"
#include "gspr/seed.hpp"

namespace gspr {

const char* to_string(Variant v) { return v == Variant::kGsprL ? "gspr_l" : "gspr"; }

Variant variant_from_string(const std::string& s) {
  if (s == "gspr") return Variant::kGspr;
  if (s == "gspr_l") return Variant::kGsprL;
  throw ConfigError("unknown variant '" + s + "' (expected gspr or gspr_l)");
}

std::filesystem::path PipelineConfig::checkpoint_path() const {
  return paths.checkpoint.empty() ? paths.run_dir / "checkpoint.bin" : paths.checkpoint;
}

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  net.init_seed = mix_seed(s, 0x1417ULL);
  prep.ground.seed = s;
  prep.random_init_seed = s;
}

void PipelineConfig::validate() const {
  grid.validate();
  net.validate();
  train.validate();
  if (n_train < 1 || n_infer_full < 2) throw ConfigError("voxel budgets must be positive");
  const auto need = net.min_nodes();
  if (static_cast<std::size_t>(n_train) < need || static_cast<std::size_t>(n_infer()) < need) {
    throw ConfigError("voxel budget below the " + std::to_string(need) + " nodes the pooling stages require");
  }
  if (eval.ks.empty()) throw ConfigError("eval.ks must not be empty");
  for (int k : eval.ks) {
    if (k < 1) throw ConfigError("eval.ks entries must be >= 1");
  }
  if (!(eval.db_interval > 0.0 && eval.query_interval > 0.0 && eval.success_radius > 0.0)) {
    throw ConfigError("evaluation intervals and radius must be positive");
  }
}

namespace {

class Section {
 public:
  Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError("config section '" + name_ + "' must be a map");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("invalid value for " + qualified(key));
    }
  }

  void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    const std::filesystem::path p(s);
    out = p.is_absolute() || base.empty() ? p : base / p;
  }

  void vec3(const std::string& key, Eigen::Vector3d& out) {
    std::vector<double> v{out[0], out[1], out[2]};
    get(key, v);
    if (v.size() != 3) throw ConfigError(qualified(key) + " needs 3 values");
    out = {v[0], v[1], v[2]};
  }

  void known(std::initializer_list<const char*> keys) {
    for (const char* k : keys) seen_.insert(k);
  }

  void finish() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown config key " + qualified(key));
    }
  }

 private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  YAML::Node node_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

PipelineConfig parse_config(const std::string& yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  PipelineConfig cfg;
  Section top(root, "");

  std::uint64_t seed = 0;
  top.get("seed", seed);
  cfg.set_seed(seed);
  std::string variant = to_string(cfg.variant);
  top.get("variant", variant);
  cfg.variant = variant_from_string(variant);
  top.get("n_train", cfg.n_train);
  top.get("n_infer", cfg.n_infer_full);
  top.get("train_splits", cfg.train_splits);

  Section paths(root["paths"], "paths");
  paths.path("frames", cfg.paths.frames, base_dir);
  paths.path("scenes", cfg.paths.scenes, base_dir);
  paths.path("run_dir", cfg.paths.run_dir, base_dir);
  paths.path("checkpoint", cfg.paths.checkpoint, base_dir);
  paths.finish();

  Section grid(root["grid"], "grid");
  grid.get("max_range", cfg.grid.max_range);
  grid.get("n_rho", cfg.grid.n_rho);
  grid.get("n_theta", cfg.grid.n_theta);
  grid.get("n_z", cfg.grid.n_z);
  grid.get("z_min", cfg.grid.z_min);
  grid.get("z_max", cfg.grid.z_max);
  grid.get("max_per_voxel", cfg.grid.max_per_voxel);
  grid.finish();

  Section net(root["net"], "net");
  net.get("J", cfg.net.J);
  net.get("supports", cfg.net.supports);
  net.get("pool_rate", cfg.net.pool_rate);
  net.get("widths", cfg.net.widths);
  net.get("d_model", cfg.net.d_model);
  net.get("d_pe", cfg.net.d_pe);
  net.get("d_ffn", cfg.net.d_ffn);
  net.get("heads", cfg.net.heads);
  net.get("fusion_layers", cfg.net.fusion_layers);
  net.get("clusters", cfg.net.clusters);
  net.get("d_out", cfg.net.d_out);
  net.finish();

  Section train(root["train"], "train");
  train.get("lr", cfg.train.lr);
  train.get("decay", cfg.train.decay);
  train.get("decay_every", cfg.train.decay_every);
  train.get("margin", cfg.train.margin);
  train.get("k_pos", cfg.train.k_pos);
  train.get("k_neg", cfg.train.k_neg);
  train.get("positive_radius", cfg.train.positive_radius);
  train.get("triplets_per_step", cfg.train.triplets_per_step);
  train.get("epochs", cfg.train.epochs);
  train.get("max_steps", cfg.train.max_steps);
  train.get("hard_mining", cfg.train.hard_mining);
  train.finish();

  Section eval(root["eval"], "eval");
  eval.get("db_interval", cfg.eval.db_interval);
  eval.get("query_interval", cfg.eval.query_interval);
  eval.get("success_radius", cfg.eval.success_radius);
  eval.get("ks", cfg.eval.ks);
  eval.get("db_split", cfg.eval.db_split);
  eval.get("query_split", cfg.eval.query_split);
  eval.finish();

  Section prep(root["prep"], "prep");
  prep.get("filter_ground", cfg.prep.filter_ground);
  prep.get("ground_threshold", cfg.prep.ground.distance_threshold);
  prep.get("ground_iterations", cfg.prep.ground.iterations);
  prep.get("ground_max_tilt_deg", cfg.prep.ground.max_tilt_deg);
  prep.get("erase_boxes", cfg.prep.erase_boxes);
  prep.get("lidar_init", cfg.prep.lidar_init);
  prep.get("dome", cfg.prep.dome);
  prep.get("n_dome", cfg.prep.n_dome);
  prep.get("radius_factor", cfg.prep.radius_factor);
  prep.get("static_mask", cfg.prep.static_mask);
  prep.get("dynamic_mask", cfg.prep.dynamic_mask);
  prep.get("static_classes", cfg.prep.static_classes);
  prep.vec3("background", cfg.prep.background);
  prep.vec3("unobserved", cfg.prep.unobserved);
  prep.finish();

  top.known({"paths", "grid", "net", "train", "eval", "prep"});
  top.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string dump_config(const PipelineConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "variant" << YAML::Value << to_string(cfg.variant);
  out << YAML::Key << "n_train" << YAML::Value << cfg.n_train;
  out << YAML::Key << "n_infer" << YAML::Value << cfg.n_infer_full;
  out << YAML::Key << "train_splits" << YAML::Value << YAML::Flow << cfg.train_splits;

  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "frames" << YAML::Value << cfg.paths.frames.string();
  out << YAML::Key << "scenes" << YAML::Value << cfg.paths.scenes.string();
  out << YAML::Key << "run_dir" << YAML::Value << cfg.paths.run_dir.string();
  out << YAML::Key << "checkpoint" << YAML::Value << cfg.paths.checkpoint.string();
  out << YAML::EndMap;

  const auto& g = cfg.grid;
  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "max_range" << YAML::Value << g.max_range;
  out << YAML::Key << "n_rho" << YAML::Value << g.n_rho;
  out << YAML::Key << "n_theta" << YAML::Value << g.n_theta;
  out << YAML::Key << "n_z" << YAML::Value << g.n_z;
  out << YAML::Key << "z_min" << YAML::Value << g.z_min;
  out << YAML::Key << "z_max" << YAML::Value << g.z_max;
  out << YAML::Key << "max_per_voxel" << YAML::Value << g.max_per_voxel;
  out << YAML::EndMap;

  const auto& n = cfg.net;
  out << YAML::Key << "net" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "J" << YAML::Value << n.J;
  out << YAML::Key << "supports" << YAML::Value << n.supports;
  out << YAML::Key << "pool_rate" << YAML::Value << n.pool_rate;
  out << YAML::Key << "widths" << YAML::Value << YAML::Flow << n.widths;
  out << YAML::Key << "d_model" << YAML::Value << n.d_model;
  out << YAML::Key << "d_pe" << YAML::Value << n.d_pe;
  out << YAML::Key << "d_ffn" << YAML::Value << n.d_ffn;
  out << YAML::Key << "heads" << YAML::Value << n.heads;
  out << YAML::Key << "fusion_layers" << YAML::Value << n.fusion_layers;
  out << YAML::Key << "clusters" << YAML::Value << n.clusters;
  out << YAML::Key << "d_out" << YAML::Value << n.d_out;
  out << YAML::EndMap;

  const auto& t = cfg.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lr" << YAML::Value << t.lr;
  out << YAML::Key << "decay" << YAML::Value << t.decay;
  out << YAML::Key << "decay_every" << YAML::Value << t.decay_every;
  out << YAML::Key << "margin" << YAML::Value << t.margin;
  out << YAML::Key << "k_pos" << YAML::Value << t.k_pos;
  out << YAML::Key << "k_neg" << YAML::Value << t.k_neg;
  out << YAML::Key << "positive_radius" << YAML::Value << t.positive_radius;
  out << YAML::Key << "triplets_per_step" << YAML::Value << t.triplets_per_step;
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "max_steps" << YAML::Value << t.max_steps;
  out << YAML::Key << "hard_mining" << YAML::Value << t.hard_mining;
  out << YAML::EndMap;

  const auto& e = cfg.eval;
  out << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "db_interval" << YAML::Value << e.db_interval;
  out << YAML::Key << "query_interval" << YAML::Value << e.query_interval;
  out << YAML::Key << "success_radius" << YAML::Value << e.success_radius;
  out << YAML::Key << "ks" << YAML::Value << YAML::Flow << e.ks;
  out << YAML::Key << "db_split" << YAML::Value << e.db_split;
  out << YAML::Key << "query_split" << YAML::Value << e.query_split;
  out << YAML::EndMap;

  const auto& p = cfg.prep;
  out << YAML::Key << "prep" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "filter_ground" << YAML::Value << p.filter_ground;
  out << YAML::Key << "ground_threshold" << YAML::Value << p.ground.distance_threshold;
  out << YAML::Key << "ground_iterations" << YAML::Value << p.ground.iterations;
  out << YAML::Key << "ground_max_tilt_deg" << YAML::Value << p.ground.max_tilt_deg;
  out << YAML::Key << "erase_boxes" << YAML::Value << p.erase_boxes;
  out << YAML::Key << "lidar_init" << YAML::Value << p.lidar_init;
  out << YAML::Key << "dome" << YAML::Value << p.dome;
  out << YAML::Key << "n_dome" << YAML::Value << p.n_dome;
  out << YAML::Key << "radius_factor" << YAML::Value << p.radius_factor;
  out << YAML::Key << "static_mask" << YAML::Value << p.static_mask;
  out << YAML::Key << "dynamic_mask" << YAML::Value << p.dynamic_mask;
  out << YAML::Key << "static_classes" << YAML::Value << YAML::Flow << p.static_classes;
  out << YAML::Key << "background" << YAML::Value << YAML::Flow
      << std::vector<double>{p.background[0], p.background[1], p.background[2]};
  out << YAML::Key << "unobserved" << YAML::Value << YAML::Flow
      << std::vector<double>{p.unobserved[0], p.unobserved[1], p.unobserved[2]};
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace gspr
