#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gspr/geometry.hpp"
#include "gspr/net/network.hpp"
#include "gspr/voxelizer.hpp"

namespace gspr {

struct TrainConfig {
  double lr = 1e-5;
  double decay = 0.5;     // multiplier applied every decay_every epochs
  int decay_every = 5;
  double margin = 0.5;    // beta of the lazy triplet hinge
  int k_pos = 2;
  int k_neg = 6;
  double positive_radius = 9.0;  // planar meters
  int triplets_per_step = 1;
  int epochs = 10;
  int max_steps = 0;  // 0: no cap
  bool hard_mining = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Triplet {
  std::size_t query = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

struct Eligibility {
  std::vector<std::size_t> positives;  // j != i within the radius, ascending
  std::vector<std::size_t> negatives;  // beyond the radius, ascending
};

Eligibility eligible(std::span<const RigidTransform> poses, std::size_t query, double radius);

// One triplet per query that has at least k_pos positives and k_neg
// negatives, chosen uniformly without replacement; other queries are skipped
// with a warning. Deterministic per seed.
std::vector<Triplet> mine_triplets(std::span<const RigidTransform> poses, const TrainConfig& cfg, std::uint64_t seed);

struct TripletLoss {
  double value = 0.0;
  std::size_t positive = 0;  // position within the positive list that was selected
  std::size_t negative = 0;
  double positive_distance = 0.0;
  double negative_distance = 0.0;
};

// [beta + min_pos d(q, p) - max_neg d(q, n)]_+ with Euclidean d. With
// hard_mining the positive term takes the max and the negative term the min.
// Throws InputError on an empty set.
TripletLoss lazy_triplet_loss(const Eigen::VectorXd& q, std::span<const Eigen::VectorXd> positives,
                              std::span<const Eigen::VectorXd> negatives, double beta, bool hard_mining);

struct TripletGradients {
  Eigen::VectorXd query, positive, negative;  // for the selected entries only
};

TripletGradients lazy_triplet_gradients(const Eigen::VectorXd& q, const Eigen::VectorXd& positive,
                                        const Eigen::VectorXd& negative, const TripletLoss& loss);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

// In-place bias-corrected Adam update. Returns false and leaves everything
// untouched when a gradient is not finite.
bool adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, double lr,
               const AdamConfig& cfg = {});

template <typename T>
struct NetAdamState {
  net::NetParams<T> m, v;
  std::int64_t t = 0;
  explicit NetAdamState(const net::NetParams<T>& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

// Network flavor; renormalizes support directions after the update.
template <typename T>
bool adam_step(net::NetParams<T>& params, const net::NetParams<T>& grads, NetAdamState<T>& state, double lr,
               const AdamConfig& cfg = {});

double lr_at_epoch(int epoch, const TrainConfig& cfg);

struct LossRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  net::NetParams<float> params;
  std::vector<LossRecord> trace;    // one row per optimizer step
  std::vector<double> epoch_loss;   // mean step loss per epoch
  std::int64_t steps = 0;
  std::int64_t aborted_steps = 0;   // non-finite gradients
};

using TrainProgress = std::function<void(const LossRecord&)>;

// Throws NumericError on a non-finite loss and InputError when no triplet
// can be mined.
TrainResult train(std::span<const VoxelizedScene> scenes, const net::NetConfig& net_cfg, const TrainConfig& cfg,
                  net::NetParams<float> init, const TrainProgress& progress = {});

void write_loss_csv(std::span<const LossRecord> trace, const std::filesystem::path& path);

}  // namespace gspr
