// gspr command-line entry point. Every subcommand reads one YAML config;
// flags override individual fields.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gspr/error.hpp"
#include "gspr/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<double> max_range;
  bool hard_mining = false;
  bool verbose = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "YAML pipeline config")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "Seed for training, initialization and sampling");
  app->add_option("--variant", o.variant, "gspr or gspr_l")->check(CLI::IsMember({"gspr", "gspr_l"}));
  app->add_option("--max-range", o.max_range, "Cylindrical grid range in meters");
  app->add_flag("--hard-mining", o.hard_mining, "Hardest positive / hardest negative in the triplet loss");
  app->add_flag("-v,--verbose", o.verbose, "Debug logging");
}

gspr::PipelineConfig resolve(const Overrides& o) {
  gspr::PipelineConfig cfg = o.config.empty() ? gspr::PipelineConfig{} : gspr::load_config(o.config);
  if (o.seed) cfg.set_seed(*o.seed);
  if (o.variant) cfg.variant = gspr::variant_from_string(*o.variant);
  if (o.max_range) cfg.grid.max_range = *o.max_range;
  if (o.hard_mining) cfg.train.hard_mining = true;
  cfg.validate();
  return cfg;
}

void print_report(const std::string& label, const gspr::RecallReport& r) {
  const std::vector<std::pair<std::string, gspr::RecallReport>> rows{{label, r}};
  std::fputs(gspr::format_recall_table(rows).c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-scene place recognition pipeline"};
  app.require_subcommand(1);
  Overrides o;

  auto* prep = app.add_subcommand("prep", "Build LiDAR priors and masks over 3-frame windows");
  auto* voxelize = app.add_subcommand("voxelize", "Voxelize every scene of the scene manifest");
  auto* train = app.add_subcommand("train", "Train the descriptor network");
  auto* eval = app.add_subcommand("eval", "Score AR@K with a trained checkpoint");
  auto* ablate = app.add_subcommand("ablate", "Train and score each ablation row");
  auto* sweep = app.add_subcommand("sweep", "Score a checkpoint over several grid ranges");
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  for (auto* sub : {prep, voxelize, train, eval, ablate, sweep}) add_common(sub, o);

  std::string mode = "features";
  ablate->add_option("--mode", mode, "features or prep")->check(CLI::IsMember({"features", "prep"}));
  std::vector<double> ranges{10, 20, 30, 40, 50, 60};
  sweep->add_option("--ranges", ranges, "Maximum ranges in meters, comma separated")->delimiter(',');

  gspr::SynthOptions so;
  synth->add_option("--out", so.out_dir, "Output directory")->required();
  synth->add_option("--places", so.dataset.places, "Number of places");
  synth->add_option("--traversals", so.dataset.traversals, "Traversals per place");
  synth->add_option("--gaussians", so.dataset.gaussians, "Gaussians per scene");
  synth->add_option("--seed", so.dataset.seed, "Dataset seed");
  synth->add_flag("--frames", so.frames, "Also write calibrated frames for prep");
  synth->add_option("--frames-per-place", so.frames_per_place, "Frames per place and traversal");
  synth->add_flag("-v,--verbose", o.verbose, "Debug logging");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors share the input-error code
  }
  spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*synth) {
      gspr::cmd_synth(so);
      return 0;
    }
    const gspr::PipelineConfig cfg = resolve(o);
    if (*prep) {
      fmt::print("{} windows\n", gspr::cmd_prep(cfg));
    } else if (*voxelize) {
      fmt::print("{} scenes\n", gspr::cmd_voxelize(cfg));
    } else if (*train) {
      const auto res = gspr::cmd_train(cfg);
      if (!res.epoch_loss.empty()) fmt::print("final epoch loss {:.6f}\n", res.epoch_loss.back());
    } else if (*eval) {
      print_report(gspr::to_string(cfg.variant), gspr::cmd_eval(cfg));
    } else if (*ablate) {
      const auto rows = gspr::cmd_ablate(cfg, mode == "prep" ? gspr::AblationMode::kPrep : gspr::AblationMode::kFeatures);
      std::fputs(gspr::format_recall_table(rows).c_str(), stdout);
    } else if (*sweep) {
      std::vector<std::pair<std::string, gspr::RecallReport>> rows;
      for (const auto& row : gspr::cmd_sweep(cfg, ranges)) rows.emplace_back(fmt::format("{:g} m", row.max_range), row.report);
      std::fputs(gspr::format_recall_table(rows).c_str(), stdout);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return gspr::exit_code_for(e);
  }
  return 0;
}
