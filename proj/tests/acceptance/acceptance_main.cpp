// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every tolerance is fixed here.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gspr/losses.hpp"
#include "gspr/net/grad_check.hpp"
#include "gspr/net/graph.hpp"
#include "gspr/net/layers.hpp"
#include "gspr/net/network.hpp"
#include "gspr/pipeline.hpp"
#include "gspr/spatial.hpp"
#include "gspr/trainer.hpp"
#include "oracles.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using gspr::net::Mat;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void report(const std::string& name, const Outcome& o, double seconds) {
  std::printf("%s  %-34s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds);
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

void run(const std::string& name, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(name, o, std::chrono::duration<double>(Clock::now() - t0).count());
}

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// --- gradient soundness ---------------------------------------------------

constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 120.0;
constexpr int kGradSeeds = 20;

Outcome gradient_soundness() {
  const auto t0 = Clock::now();
  const gspr::net::GradStage stages[] = {gspr::net::GradStage::kGConv,     gspr::net::GradStage::kPool,
                                         gspr::net::GradStage::kPosFfn,    gspr::net::GradStage::kAttention,
                                         gspr::net::GradStage::kNetVlad,   gspr::net::GradStage::kMlp,
                                         gspr::net::GradStage::kLinear,    gspr::net::GradStage::kFull};
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (const auto stage : stages) {
    for (int seed = 0; seed < kGradSeeds; ++seed) {
      gspr::net::GradCheckOptions opts;
      opts.seed = static_cast<std::uint64_t>(seed);
      opts.nodes = 32;
      opts.epsilon = 1e-5;
      const auto r = gspr::net::grad_check(stage, opts);
      checked += r.checked;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = fmt::format("{} seed {} {}", gspr::net::to_string(stage), seed, r.worst);
      }
    }
  }
  const double secs = elapsed(t0);
  return {worst <= kGradTolerance && secs < kGradBudgetSeconds,
          fmt::format("max rel err {:.2e} <= {:.0e} at [{}], {} entries, {:.1f} s < {:.0f} s", worst, kGradTolerance,
                      where, checked, secs, kGradBudgetSeconds)};
}

// --- exact oracles --------------------------------------------------------

constexpr int kOracleInstances = 100;

gspr::DescriptorDB make_db(const std::vector<gspr::DbEntry>& entries) {
  gspr::DescriptorDB db;
  for (const auto& e : entries) db.add(e);
  return db;
}

Outcome recall_oracle() {
  oracle::Rng rng(101);
  const std::vector<int> ks{1, 5, 10};
  for (int t = 0; t < kOracleInstances; ++t) {
    const auto inst = oracle::random_retrieval(rng, 16);
    const auto got = gspr::recall_at_k(make_db(inst.db), inst.queries, ks, 9.0);
    const auto want = oracle::recall(inst.db, inst.queries, ks, 9.0);
    if (got.hits != want.hits || got.recall != want.recall) return {false, fmt::format("instance {} differs", t)};
  }
  return {true, fmt::format("{} instances identical", kOracleInstances)};
}

Outcome topk_oracle() {
  oracle::Rng rng(102);
  for (int t = 0; t < kOracleInstances; ++t) {
    const int n = oracle::uniform_int(rng, 1, 80);
    std::vector<gspr::DbEntry> entries;
    std::vector<Eigen::VectorXd> vecs;
    for (int i = 0; i < n; ++i) {
      const bool repeat = i > 0 && oracle::uniform(rng, 0, 1) < 0.2;
      Eigen::VectorXd v = repeat ? vecs[static_cast<std::size_t>(oracle::uniform_int(rng, 0, i - 1))]
                                 : oracle::random_unit(rng, 16);
      vecs.push_back(v);
      entries.push_back({v, oracle::planar_pose(0, 0), i, i});
    }
    const auto db = make_db(entries);
    const Eigen::VectorXd q = oracle::random_unit(rng, 16);
    const std::size_t k = static_cast<std::size_t>(oracle::uniform_int(rng, 1, n));
    const auto got = gspr::query_topk(db, q, k);
    const auto want = oracle::topk(vecs, q, k);
    for (std::size_t i = 0; i < k; ++i) {
      if (got[i].index != want[i]) return {false, fmt::format("instance {} rank {} differs", t, i)};
    }
  }
  return {true, fmt::format("{} instances identical", kOracleInstances)};
}

Outcome partition_oracle() {
  oracle::Rng rng(103);
  for (int t = 0; t < kOracleInstances; ++t) {
    gspr::CylGridConfig cfg;
    cfg.max_range = oracle::uniform(rng, 5, 60);
    cfg.n_rho = oracle::uniform_int(rng, 1, 40);
    cfg.n_theta = oracle::uniform_int(rng, 1, 120);
    cfg.n_z = oracle::uniform_int(rng, 1, 10);
    cfg.max_per_voxel = oracle::uniform_int(rng, 1, 16);
    const auto scene = oracle::random_scene(rng, static_cast<std::size_t>(oracle::uniform_int(rng, 1, 2000)), 60, -5, 9);
    const auto map = gspr::partition(scene, cfg);
    const auto ref = oracle::partition(scene, cfg);
    bool same = map.dropped == ref.dropped && map.voxels.size() == ref.voxels.size();
    std::size_t i = 0;
    for (auto it = ref.voxels.begin(); same && it != ref.voxels.end(); ++it, ++i) {
      same = map.voxels[i].index == it->first && map.voxels[i].members == it->second &&
             map.voxels[i].occupancy == ref.occupancy.at(it->first);
    }
    if (!same) return {false, fmt::format("instance {} differs", t)};
  }
  return {true, fmt::format("{} instances identical", kOracleInstances)};
}

Outcome knn_oracle() {
  oracle::Rng rng(104);
  for (int t = 0; t < kOracleInstances; ++t) {
    const int n = oracle::uniform_int(rng, 2, 400);
    auto pts = oracle::random_points(rng, static_cast<std::size_t>(n), oracle::uniform(rng, 1, 50));
    // duplicated points exercise the index tie-break
    for (int d = 0; d < n / 10; ++d)
      pts[static_cast<std::size_t>(oracle::uniform_int(rng, 0, n - 1))] = pts[static_cast<std::size_t>(oracle::uniform_int(rng, 0, n - 1))];
    const bool exclude = t % 2 == 0;
    const int k = oracle::uniform_int(rng, 1, std::min(25, exclude ? n - 1 : n));
    if (gspr::knn_table(pts, k, exclude) != oracle::knn(pts, k, exclude))
      return {false, fmt::format("instance {} differs", t)};
  }
  return {true, fmt::format("{} instances identical", kOracleInstances)};
}

Outcome mining_oracle() {
  oracle::Rng rng(105);
  for (int t = 0; t < kOracleInstances; ++t) {
    const auto poses = oracle::random_track(rng, oracle::uniform_int(rng, 4, 120));
    gspr::TrainConfig cfg;
    cfg.k_pos = oracle::uniform_int(rng, 1, 3);
    cfg.k_neg = oracle::uniform_int(rng, 1, 8);
    const std::uint64_t seed = rng();
    const auto got = gspr::mine_triplets(poses, cfg, seed);
    const auto want = oracle::mine(poses, cfg, seed);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].query == want[i].query && got[i].positives == want[i].positives &&
             got[i].negatives == want[i].negatives;
    }
    if (!same) return {false, fmt::format("instance {} differs", t)};
  }
  return {true, fmt::format("{} instances identical", kOracleInstances)};
}

// --- equation identities --------------------------------------------------

gspr::Image random_image(oracle::Rng& rng, int w, int h) {
  auto img = gspr::make_image(w, h);
  for (double& v : img.data) v = oracle::uniform(rng, 0, 1);
  return img;
}

Outcome loss_identities() {
  oracle::Rng rng(106);
  double worst_self = 0.0, worst_linear = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto a = random_image(rng, 24, 20), b = random_image(rng, 24, 20);
    const gspr::Mask none;
    const double lambda = oracle::uniform(rng, 0, 1);
    worst_self = std::max(worst_self, std::abs(gspr::mgs_loss(a, a, lambda, none)));
    gspr::Mask mask(24, 20);
    for (auto& m : mask.data) m = oracle::uniform(rng, 0, 1) < 0.2;
    const double l0 = gspr::mgs_loss(a, b, 0.0, mask), l1 = gspr::mgs_loss(a, b, 1.0, mask);
    worst_linear =
        std::max(worst_linear, std::abs(gspr::mgs_loss(a, b, lambda, mask) - ((1 - lambda) * l0 + lambda * l1)));
  }
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  auto at = [](double d) { return Eigen::Vector2d(d, 0.0).eval(); };
  const std::vector<Eigen::VectorXd> pos_a{at(0.2)}, neg_a{at(1.0)}, pos_b{at(0.9)}, neg_b{at(0.6)};
  const double zero = gspr::lazy_triplet_loss(q, pos_a, neg_a, 0.5, false).value;
  const double eight = gspr::lazy_triplet_loss(q, pos_b, neg_b, 0.5, false).value;
  const bool pass = worst_self == 0.0 && worst_linear <= 1e-12 && std::abs(zero) <= 1e-15 &&
                    std::abs(eight - 0.8) <= 1e-15;
  return {pass, fmt::format("mgs(I,I)={:.1e}, linearity {:.1e} <= 1e-12, lazy {:.3f} / {:.3f}", worst_self,
                            worst_linear, zero, eight)};
}

// --- invariances ----------------------------------------------------------

Mat<double> random_mat(oracle::Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

gspr::VoxelizedScene random_voxels(oracle::Rng& rng, int n) {
  gspr::VoxelizedScene vs;
  vs.encoded.resize(n, gspr::attr::kCount);
  for (int i = 0; i < n; ++i) {
    const auto v = oracle::random_gaussian(rng, 40, -2, 5).to_vector();
    for (int k = 0; k < gspr::attr::kCount; ++k) vs.encoded(i, k) = v[static_cast<std::size_t>(k)];
  }
  return vs;
}

Outcome invariances() {
  oracle::Rng rng(107);
  double scale_err = 0.0, perm_err = 0.0, row_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    gspr::net::GConvParams<double> p{random_mat(rng, 16, 8), random_mat(rng, 2, 3), random_mat(rng, 32, 8)};
    for (int s = 0; s < 2; ++s) p.supports.row(s).normalize();
    const Mat<double> x = random_mat(rng, 64, 16), coords = random_mat(rng, 64, 3) * 10.0;
    const auto nb = gspr::net::neighbor_table(coords, 25);
    const double s = std::exp(oracle::uniform(rng, -4, 4));
    const Mat<double> scaled = coords * s;
    scale_err = std::max(scale_err, (gspr::net::gconv_forward<double>(p, x, coords, nb, 25) -
                                     gspr::net::gconv_forward<double>(p, x, scaled, nb, 25))
                                        .cwiseAbs()
                                        .maxCoeff());

    gspr::net::NetVladParams<double> v{random_mat(rng, 8, 16), {random_mat(rng, 16, 8), random_mat(rng, 1, 8)},
                                       {random_mat(rng, 128, 12), random_mat(rng, 1, 12)}};
    std::vector<int> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat<double> xp(64, 16);
    for (int i = 0; i < 64; ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    perm_err = std::max(perm_err, (gspr::net::netvlad_forward<double>(v, x, nullptr) -
                                   gspr::net::netvlad_forward<double>(v, xp, nullptr))
                                      .cwiseAbs()
                                      .maxCoeff());

    std::vector<Mat<double>> probs;
    const Mat<double> q = random_mat(rng, 64, 32) * 4.0, k = random_mat(rng, 64, 32) * 4.0;
    gspr::net::self_attention<double>(q, k, random_mat(rng, 64, 32), 8, &probs);
    for (const auto& pr : probs) row_err = std::max(row_err, (pr.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }

  // descriptor translation invariance on the default network
  const gspr::net::NetConfig cfg;
  const auto params = gspr::net::init_params<float>(cfg);
  bool bit_equal = true;
  for (int t = 0; t < 3; ++t) {
    auto vs = random_voxels(rng, 2048);
    for (Eigen::Index i = 0; i < vs.encoded.rows(); ++i)
      for (int c = 0; c < 3; ++c) vs.encoded(i, c) = std::round(vs.encoded(i, c) * 8) / 8;
    auto shifted = vs;
    for (int c = 0; c < 3; ++c) shifted.encoded.col(c).array() += oracle::uniform_int(rng, -1000, 1000);
    bit_equal = bit_equal && gspr::net::describe(params, cfg, vs).vector == gspr::net::describe(params, cfg, shifted).vector;
  }
  const bool pass = scale_err <= 1e-10 && bit_equal && perm_err <= 1e-10 && row_err <= 1e-6;
  return {pass, fmt::format("gconv scale {:.1e} <= 1e-10, translation {}, netvlad perm {:.1e} <= 1e-10, "
                            "attention rows {:.1e} <= 1e-6",
                            scale_err, bit_equal ? "bit-identical" : "DIFFERS", perm_err, row_err)};
}

// --- hyperparameters ------------------------------------------------------

Outcome hyperparameters() {
  gspr::PipelineConfig cfg;
  const auto& n = cfg.net;
  const auto& t = cfg.train;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) bad.emplace_back(what);
  };
  expect(n.J == 25, "J");
  expect(n.supports == 1, "S");
  expect(n.pool_rate == 0.25, "pool rate");
  expect(n.d_pe == 512 && n.d_model == 512, "d_pe/d_model");
  expect(n.d_ffn == 1024, "d_ffn");
  expect(n.heads == 8, "heads");
  expect(n.fusion_layers == 2, "fusion layers");
  expect(n.widths == std::vector<int>{64, 128, 256}, "pyramid widths");
  expect(n.clusters == 64, "clusters");
  expect(n.d_out == 256, "d_out");
  expect(t.lr == 1e-5 && t.decay == 0.5 && t.decay_every == 5, "lr schedule");
  expect(gspr::lr_at_epoch(5, t) == 5e-6, "lr at epoch 5");
  expect(t.k_pos == 2 && t.k_neg == 6, "k_pos/k_neg");
  expect(t.margin == 0.5, "beta");
  expect(cfg.n_train == 4096 && cfg.n_infer() == 8192, "N");
  cfg.variant = gspr::Variant::kGsprL;
  expect(cfg.n_infer() == 4096, "light variant N");
  std::string detail = "all defaults match";
  if (!bad.empty()) {
    detail = "mismatch:";
    for (const auto& b : bad) detail += " " + b;
  }
  return {bad.empty(), detail};
}

// --- end-to-end overfit ---------------------------------------------------

constexpr double kOverfitLoss = 0.01;
constexpr std::int64_t kOverfitMaxSteps = 200;
constexpr double kOverfitBudgetSeconds = 600.0;

gspr::PipelineConfig overfit_config(std::uint64_t seed) {
  gspr::PipelineConfig cfg;
  cfg.set_seed(seed);
  cfg.train_splits = {"database", "query"};
  cfg.train.hard_mining = true;
  cfg.train.k_pos = 1;
  cfg.train.triplets_per_step = 2;
  cfg.train.epochs = 6;
  cfg.train.max_steps = static_cast<int>(kOverfitMaxSteps);
  return cfg;
}

Outcome overfit() {
  const auto t0 = Clock::now();
  gspr::SyntheticDatasetSpec spec;
  spec.places = 32;
  spec.traversals = 2;
  const auto scenes = gspr::synthetic_scenes(spec);
  const auto cfg = overfit_config(0);
  const auto res = gspr::train_scenes(scenes, cfg);
  const auto recall = gspr::evaluate_scenes(scenes, res.params, cfg);
  const double secs = elapsed(t0);

  // a second, shorter run must reproduce the prefix of the loss trace bit for bit
  auto short_cfg = cfg;
  short_cfg.train.max_steps = 16;
  const auto again = gspr::train_scenes(scenes, short_cfg);
  bool deterministic = again.trace.size() == 16;
  for (std::size_t i = 0; deterministic && i < again.trace.size(); ++i)
    deterministic = again.trace[i].loss == res.trace[i].loss;

  const double last = res.epoch_loss.empty() ? 1e9 : res.epoch_loss.back();
  const bool pass = res.steps <= kOverfitMaxSteps && last <= kOverfitLoss && recall.at(1) == 100.0 &&
                    deterministic && secs < kOverfitBudgetSeconds;
  return {pass, fmt::format("{} steps <= {}, last epoch loss {:.4f} <= {}, AR@1 {:.2f} = 100 over {} queries, "
                            "deterministic {}, {:.0f} s < {:.0f} s",
                            res.steps, kOverfitMaxSteps, last, kOverfitLoss, recall.at(1), recall.queries,
                            deterministic ? "yes" : "NO", secs, kOverfitBudgetSeconds)};
}

// --- trend checks ---------------------------------------------------------

constexpr int kTrendSeeds = 5;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

struct TrendRun {
  std::vector<gspr::SceneEntry> scenes;
  gspr::PipelineConfig cfg;
};

TrendRun trend_setup(int seed) {
  gspr::SyntheticDatasetSpec spec;
  spec.places = 16;
  spec.traversals = 2;
  spec.seed = static_cast<std::uint64_t>(seed);
  TrendRun r{gspr::synthetic_scenes(spec), overfit_config(static_cast<std::uint64_t>(seed))};
  r.cfg.train.epochs = 4;
  return r;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += fmt::format("{}{:.1f}", s.empty() ? "" : ",", x);
  return s;
}

void trends() {
  std::vector<double> full, sh_only, range10, range40;
  const auto t0 = Clock::now();
  for (int seed = 0; seed < kTrendSeeds; ++seed) {
    auto run = trend_setup(seed);
    const auto trained = gspr::train_scenes(run.scenes, run.cfg);
    full.push_back(gspr::evaluate_scenes(run.scenes, trained.params, run.cfg).at(1));
    const gspr::FeatureMask sh = gspr::feature_ablation_rows().front();
    const auto sh_trained = gspr::train_scenes(run.scenes, run.cfg, sh);
    sh_only.push_back(gspr::evaluate_scenes(run.scenes, sh_trained.params, run.cfg, sh).at(1));
    for (double range : {10.0, 40.0}) {
      auto c = run.cfg;
      c.grid.max_range = range;
      (range == 10.0 ? range10 : range40).push_back(gspr::evaluate_scenes(run.scenes, trained.params, c).at(1));
    }
  }
  const double secs = elapsed(t0);
  report("trend: full features >= SH only",
         {median(full) >= median(sh_only), fmt::format("median AR@1 {:.1f} vs {:.1f} (full [{}], SH [{}])",
                                                        median(full), median(sh_only), list(full), list(sh_only))},
         secs);
  report("trend: range 40 m >= range 10 m",
         {median(range40) >= median(range10), fmt::format("median AR@1 {:.1f} vs {:.1f} (40 m [{}], 10 m [{}])",
                                                          median(range40), median(range10), list(range40),
                                                          list(range10))},
         0.0);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";  // skips the training criteria

  run("gradient soundness", gradient_soundness);
  run("oracle: recall_at_k", recall_oracle);
  run("oracle: query_topk", topk_oracle);
  run("oracle: partition", partition_oracle);
  run("oracle: kNN", knn_oracle);
  run("oracle: mine_triplets", mining_oracle);
  run("equation identities", loss_identities);
  run("invariance suite", invariances);
  run("hyperparameter conformance", hyperparameters);
  if (!quick) {
    run("end-to-end overfit", overfit);
    trends();
  }
  std::printf(
      "NOTE  published benchmark recalls (nuScenes / KITTI scale, externally optimized Gaussian scenes) are not "
      "reproducible at desk scale; the property suites above stand in for them.\n");
  std::printf("%s  %d criteria failed\n", g_failures == 0 ? "PASS" : "FAIL", g_failures);
  return g_failures == 0 ? 0 : 1;
}
