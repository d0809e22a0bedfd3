#include <cmath>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "gspr/error.hpp"
#include "gspr/trainer.hpp"
#include "oracles.hpp"

namespace {

using gspr::RigidTransform;
using gspr::TrainConfig;

TEST(Eligibility, FiveMetersApartArePositives) {
  const std::vector<RigidTransform> poses{oracle::planar_pose(0, 0), oracle::planar_pose(3, 4)};
  EXPECT_EQ(gspr::eligible(poses, 0, 9.0).positives, std::vector<std::size_t>{1});
  EXPECT_EQ(gspr::eligible(poses, 1, 9.0).positives, std::vector<std::size_t>{0});
}

TEST(Eligibility, TwentyMetersApartAreNegatives) {
  const std::vector<RigidTransform> poses{oracle::planar_pose(0, 0), oracle::planar_pose(0, 20)};
  EXPECT_TRUE(gspr::eligible(poses, 0, 9.0).positives.empty());
  EXPECT_EQ(gspr::eligible(poses, 0, 9.0).negatives, std::vector<std::size_t>{1});
}

TEST(Eligibility, HeightIsIgnored) {
  auto far_up = oracle::planar_pose(1, 0);
  far_up.translation.z() = 50;
  const std::vector<RigidTransform> poses{oracle::planar_pose(0, 0), far_up};
  EXPECT_EQ(gspr::eligible(poses, 0, 9.0).positives.size(), 1u);
}

TEST(Eligibility, MatchesPairwiseOracle) {
  oracle::Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto poses = oracle::random_track(rng, oracle::uniform_int(rng, 2, 60));
    for (std::size_t q = 0; q < poses.size(); ++q) {
      const auto got = gspr::eligible(poses, q, 9.0), want = oracle::eligibility(poses, q, 9.0);
      EXPECT_EQ(got.positives, want.positives);
      EXPECT_EQ(got.negatives, want.negatives);
    }
  }
}

TEST(MineTriplets, MatchesSamplingOracle) {
  oracle::Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto poses = oracle::random_track(rng, oracle::uniform_int(rng, 4, 60));
    TrainConfig cfg;
    cfg.k_pos = oracle::uniform_int(rng, 1, 3);
    cfg.k_neg = oracle::uniform_int(rng, 1, 8);
    const std::uint64_t seed = rng();
    const auto got = gspr::mine_triplets(poses, cfg, seed);
    const auto want = oracle::mine(poses, cfg, seed);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].query, want[i].query);
      EXPECT_EQ(got[i].positives, want[i].positives);
      EXPECT_EQ(got[i].negatives, want[i].negatives);
    }
  }
}

// Property: every mined triplet respects the radius and has no repeats.
TEST(MineTriplets, TripletsAreWellFormed) {
  oracle::Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const auto poses = oracle::random_track(rng, 40);
    TrainConfig cfg;
    for (const auto& tr : gspr::mine_triplets(poses, cfg, rng())) {
      ASSERT_EQ(tr.positives.size(), 2u);
      ASSERT_EQ(tr.negatives.size(), 6u);
      for (auto p : tr.positives) {
        EXPECT_NE(p, tr.query);
        EXPECT_LE(oracle::planar(poses[p], poses[tr.query]), 9.0);
      }
      for (auto n : tr.negatives) EXPECT_GT(oracle::planar(poses[n], poses[tr.query]), 9.0);
      auto all = tr.positives;
      all.insert(all.end(), tr.negatives.begin(), tr.negatives.end());
      std::sort(all.begin(), all.end());
      EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
    }
  }
}

TEST(MineTriplets, DeterministicAndSeedSensitive) {
  oracle::Rng rng(4);
  const auto poses = oracle::random_track(rng, 60);
  const TrainConfig cfg;
  const auto a = gspr::mine_triplets(poses, cfg, 11), b = gspr::mine_triplets(poses, cfg, 11);
  const auto c = gspr::mine_triplets(poses, cfg, 12);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].positives, b[i].positives);
    EXPECT_EQ(a[i].negatives, b[i].negatives);
    differs = differs || a[i].negatives != c[i].negatives;
  }
  EXPECT_TRUE(differs);
}

TEST(MineTriplets, QueriesWithoutEnoughCandidatesAreSkipped) {
  const std::vector<RigidTransform> poses{oracle::planar_pose(0, 0), oracle::planar_pose(1, 0),
                                          oracle::planar_pose(50, 0)};
  TrainConfig cfg;
  cfg.k_pos = 1;
  cfg.k_neg = 1;
  const auto t = gspr::mine_triplets(poses, cfg, 0);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].query, 0u);
  EXPECT_EQ(t[1].query, 1u);
}

Eigen::VectorXd at_distance(double d) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
  v(0) = d;
  return v;
}

TEST(LazyTriplet, HandComputedValues) {
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  const std::vector<Eigen::VectorXd> pos_a{at_distance(0.2), at_distance(0.7)}, neg_a{at_distance(0.3), at_distance(1.0)};
  EXPECT_NEAR(gspr::lazy_triplet_loss(q, pos_a, neg_a, 0.5, false).value, 0.0, 1e-15);
  const std::vector<Eigen::VectorXd> pos_b{at_distance(0.9), at_distance(1.4)}, neg_b{at_distance(0.6), at_distance(0.1)};
  const auto l = gspr::lazy_triplet_loss(q, pos_b, neg_b, 0.5, false);
  EXPECT_NEAR(l.value, 0.8, 1e-15);
  EXPECT_EQ(l.positive, 0u);
  EXPECT_EQ(l.negative, 0u);
}

TEST(LazyTriplet, HardMiningSwapsSelection) {
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  const std::vector<Eigen::VectorXd> pos{at_distance(0.2), at_distance(0.7)}, neg{at_distance(0.3), at_distance(1.0)};
  const auto l = gspr::lazy_triplet_loss(q, pos, neg, 0.5, true);
  EXPECT_NEAR(l.value, 0.9, 1e-15);
  EXPECT_EQ(l.positive, 1u);
  EXPECT_EQ(l.negative, 0u);
}

TEST(LazyTriplet, MatchesLoopOracle) {
  oracle::Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd q = oracle::random_unit(rng, 16);
    std::vector<Eigen::VectorXd> pos, neg;
    for (int i = 0; i < 2; ++i) pos.push_back(oracle::random_unit(rng, 16));
    for (int i = 0; i < 6; ++i) neg.push_back(oracle::random_unit(rng, 16));
    const double beta = oracle::uniform(rng, 0, 2);
    for (bool hard : {false, true})
      EXPECT_NEAR(gspr::lazy_triplet_loss(q, pos, neg, beta, hard).value, oracle::lazy_triplet(q, pos, neg, beta, hard),
                  1e-12);
  }
}

TEST(LazyTriplet, NonFiniteDescriptorPropagates) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  q(0) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<Eigen::VectorXd> pos{at_distance(0.1)}, neg{at_distance(3.0)};
  EXPECT_TRUE(std::isnan(gspr::lazy_triplet_loss(q, pos, neg, 0.5, false).value));
}

TEST(LazyTriplet, EmptySetIsInputError) {
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  const std::vector<Eigen::VectorXd> one{at_distance(1)}, none;
  EXPECT_THROW(gspr::lazy_triplet_loss(q, none, one, 0.5, false), gspr::InputError);
  EXPECT_THROW(gspr::lazy_triplet_loss(q, one, none, 0.5, false), gspr::InputError);
}

// Properties: nonnegative, nondecreasing in beta, selections unchanged when
// every descriptor offset is scaled by a common factor.
TEST(LazyTriplet, Properties) {
  oracle::Rng rng(6);
  for (int t = 0; t < 300; ++t) {
    const Eigen::VectorXd q = oracle::random_unit(rng, 8);
    std::vector<Eigen::VectorXd> pos, neg;
    for (int i = 0; i < oracle::uniform_int(rng, 1, 4); ++i) pos.push_back(oracle::random_unit(rng, 8));
    for (int i = 0; i < oracle::uniform_int(rng, 1, 8); ++i) neg.push_back(oracle::random_unit(rng, 8));
    const bool hard = t % 2 == 1;
    const double b1 = oracle::uniform(rng, 0, 1), b2 = b1 + oracle::uniform(rng, 0, 1);
    const auto l1 = gspr::lazy_triplet_loss(q, pos, neg, b1, hard);
    const auto l2 = gspr::lazy_triplet_loss(q, pos, neg, b2, hard);
    EXPECT_GE(l1.value, 0.0);
    EXPECT_GE(l2.value, l1.value);

    const double s = std::exp(oracle::uniform(rng, -3, 3));
    auto scaled = [&](const std::vector<Eigen::VectorXd>& xs) {
      std::vector<Eigen::VectorXd> out;
      for (const auto& x : xs) out.push_back(q + s * (x - q));
      return out;
    };
    const auto ls = gspr::lazy_triplet_loss(q, scaled(pos), scaled(neg), b1, hard);
    EXPECT_EQ(ls.positive, l1.positive);
    EXPECT_EQ(ls.negative, l1.negative);
    EXPECT_NEAR(ls.positive_distance, s * l1.positive_distance, 1e-12 * (1 + s));
  }
}

TEST(LazyTriplet, GradientsMatchFiniteDifferences) {
  oracle::Rng rng(7);
  const Eigen::VectorXd q = oracle::random_unit(rng, 5), p = oracle::random_unit(rng, 5),
                        n = oracle::random_unit(rng, 5);
  auto value = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    return std::max(0.0, 2.0 + (a - b).norm() - (a - c).norm());
  };
  const std::vector<Eigen::VectorXd> ps{p}, ns{n};
  const auto loss = gspr::lazy_triplet_loss(q, ps, ns, 2.0, false);
  const auto g = gspr::lazy_triplet_gradients(q, p, n, loss);
  const double eps = 1e-6;
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
    e(k) = eps;
    EXPECT_NEAR(g.query(k), (value(q + e, p, n) - value(q - e, p, n)) / (2 * eps), 1e-7);
    EXPECT_NEAR(g.positive(k), (value(q, p + e, n) - value(q, p - e, n)) / (2 * eps), 1e-7);
    EXPECT_NEAR(g.negative(k), (value(q, p, n + e) - value(q, p, n - e)) / (2 * eps), 1e-7);
  }
}

TEST(LazyTriplet, InactiveHingeHasZeroGradient) {
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  const std::vector<Eigen::VectorXd> pos{at_distance(0.1)}, neg{at_distance(3.0)};
  const auto l = gspr::lazy_triplet_loss(q, pos, neg, 0.5, false);
  const auto g = gspr::lazy_triplet_gradients(q, pos[0], neg[0], l);
  EXPECT_EQ(g.query.norm() + g.positive.norm() + g.negative.norm(), 0.0);
}

TEST(Adam, ZeroGradientKeepsParamsAndDecaysMoments) {
  std::vector<double> x{1.0, -2.0};
  gspr::AdamMoments st;
  st.m = {0.5, 0.5};
  st.v = {0.25, 0.25};
  ASSERT_TRUE(gspr::adam_step(x, std::vector<double>{0, 0}, st, 1e-3));
  EXPECT_DOUBLE_EQ(st.m[0], 0.45);
  EXPECT_DOUBLE_EQ(st.v[0], 0.25 * 0.999);
  // moments from an earlier state still move the parameters
  st = {};
  std::vector<double> y{1.0, -2.0};
  ASSERT_TRUE(gspr::adam_step(y, std::vector<double>{0, 0}, st, 1e-3));
  EXPECT_EQ(y, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> x{3.0};
  gspr::AdamMoments st;
  ASSERT_TRUE(gspr::adam_step(x, std::vector<double>{1.0}, st, 1e-5));
  EXPECT_NEAR(x[0] - 3.0, -1e-5, 1e-12);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, QuadraticMatchesReferenceSequence) {
  const double a = 3.0, lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> x{2.0};
  gspr::AdamMoments st;
  double rx = 2.0, m = 0, v = 0;
  for (int t = 1; t <= 10; ++t) {
    ASSERT_TRUE(gspr::adam_step(x, std::vector<double>{a * x[0]}, st, lr));
    const double g = a * rx;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    rx -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    EXPECT_NEAR(x[0], rx, 1e-10) << "step " << t;
  }
}

TEST(Adam, NonFiniteGradientAbortsUntouched) {
  std::vector<double> x{1.0, 2.0};
  gspr::AdamMoments st;
  ASSERT_TRUE(gspr::adam_step(x, std::vector<double>{0.5, 0.5}, st, 1e-3));
  const auto before_x = x;
  const auto before = st;
  EXPECT_FALSE(gspr::adam_step(x, std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 1.0}, st, 1e-3));
  EXPECT_FALSE(gspr::adam_step(x, std::vector<double>{1.0, std::numeric_limits<double>::infinity()}, st, 1e-3));
  EXPECT_EQ(x, before_x);
  EXPECT_EQ(st.m, before.m);
  EXPECT_EQ(st.v, before.v);
  EXPECT_EQ(st.t, before.t);
}

TEST(LearningRate, HalvesEveryFiveEpochs) {
  const TrainConfig cfg;
  EXPECT_DOUBLE_EQ(gspr::lr_at_epoch(0, cfg), 1e-5);
  EXPECT_DOUBLE_EQ(gspr::lr_at_epoch(4, cfg), 1e-5);
  EXPECT_DOUBLE_EQ(gspr::lr_at_epoch(5, cfg), 5e-6);
  EXPECT_DOUBLE_EQ(gspr::lr_at_epoch(12, cfg), 2.5e-6);
}

TEST(TrainConfigCheck, RejectsInvalidValues) {
  TrainConfig c;
  c.lr = 0;
  EXPECT_THROW(c.validate(), gspr::ConfigError);
  c = {};
  c.decay = 1.5;
  EXPECT_THROW(c.validate(), gspr::ConfigError);
  c = {};
  c.margin = -0.1;
  EXPECT_THROW(c.validate(), gspr::ConfigError);
}

gspr::net::NetConfig tiny_net() {
  gspr::net::NetConfig cfg;
  cfg.J = 6;
  cfg.widths = {8, 8, 8};
  cfg.d_model = 16;
  cfg.d_pe = 16;
  cfg.d_ffn = 16;
  cfg.heads = 2;
  cfg.clusters = 4;
  cfg.d_out = 8;
  return cfg;
}

gspr::VoxelizedScene voxels_from(const gspr::GaussianScene& s) {
  gspr::VoxelizedScene vs;
  vs.encoded.resize(static_cast<Eigen::Index>(s.gaussians.size()), gspr::attr::kCount);
  for (std::size_t i = 0; i < s.gaussians.size(); ++i) {
    const auto v = s.gaussians[i].to_vector();
    for (int k = 0; k < gspr::attr::kCount; ++k) vs.encoded(static_cast<Eigen::Index>(i), k) = v[static_cast<std::size_t>(k)];
  }
  return vs;
}

// 4 places x 3 visits, places 30 m apart.
std::vector<gspr::VoxelizedScene> small_dataset(bool identical_content) {
  oracle::Rng rng(8);
  const auto shared = voxels_from(oracle::random_scene(rng, 500, 20, -2, 5));
  std::vector<gspr::VoxelizedScene> out;
  for (int place = 0; place < 4; ++place)
    for (int visit = 0; visit < 3; ++visit) {
      auto vs = identical_content ? shared : voxels_from(oracle::random_scene(rng, 500, 20, -2, 5));
      vs.place_id = place;
      vs.pose = oracle::planar_pose(30.0 * place + visit, 0);
      out.push_back(std::move(vs));
    }
  return out;
}

TEST(Train, DeterministicPerSeed) {
  const auto data = small_dataset(false);
  TrainConfig cfg;
  cfg.k_neg = 4;
  cfg.epochs = 1;
  cfg.max_steps = 4;
  cfg.lr = 1e-3;
  cfg.seed = 5;
  const auto net = tiny_net();
  const auto a = gspr::train(data, net, cfg, gspr::net::init_params<float>(net));
  const auto b = gspr::train(data, net, cfg, gspr::net::init_params<float>(net));
  ASSERT_EQ(a.trace.size(), 4u);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].loss, b.trace[i].loss);
  const auto ta = a.params.tensors(), tb = b.params.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(*ta[i].second, *tb[i].second) << ta[i].first;
}

TEST(Train, EqualDescriptorsWithZeroMarginGiveZeroLoss) {
  const auto data = small_dataset(true);
  TrainConfig cfg;
  cfg.k_neg = 4;
  cfg.margin = 0.0;
  cfg.epochs = 1;
  cfg.max_steps = 3;
  const auto net = tiny_net();
  const auto r = gspr::train(data, net, cfg, gspr::net::init_params<float>(net));
  ASSERT_EQ(r.trace.size(), 3u);
  for (const auto& rec : r.trace) EXPECT_EQ(rec.loss, 0.0);
}

TEST(Train, NoMineableTripletIsInputError) {
  auto data = small_dataset(false);
  data.resize(3);  // one place only: no negatives
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto net = tiny_net();
  EXPECT_THROW(gspr::train(data, net, cfg, gspr::net::init_params<float>(net)), gspr::InputError);
}

TEST(Train, LossCsvHasOneRowPerStep) {
  oracle::TempDir dir("train");
  const std::vector<gspr::LossRecord> trace{{0, 0, 0.5, 1e-5}, {0, 1, 0.25, 1e-5}};
  gspr::write_loss_csv(trace, dir / "loss.csv");
  std::ifstream in(dir / "loss.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 3);
}

}  // namespace
