#include "gspr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include <spdlog/spdlog.h>

#include "gspr/error.hpp"
#include "gspr/seed.hpp"

namespace gspr {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
  if (k_pos < 1 || k_neg < 1) throw ConfigError("k_pos and k_neg must be >= 1");
  if (!(positive_radius > 0.0)) throw ConfigError("positive radius must be positive");
  if (triplets_per_step < 1) throw ConfigError("triplets_per_step must be >= 1");
  if (epochs < 0 || max_steps < 0) throw ConfigError("epochs and max_steps must be >= 0");
}

Eligibility eligible(std::span<const RigidTransform> poses, std::size_t query, double radius) {
  Eligibility e;
  for (std::size_t j = 0; j < poses.size(); ++j) {
    if (j == query) continue;
    if (planar_distance(poses[query], poses[j]) <= radius) {
      e.positives.push_back(j);
    } else {
      e.negatives.push_back(j);
    }
  }
  return e;
}

namespace {

std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t k,
                                                    std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

std::vector<Triplet> mine_triplets(std::span<const RigidTransform> poses, const TrainConfig& cfg, std::uint64_t seed) {
  std::vector<Triplet> out;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Eligibility e = eligible(poses, i, cfg.positive_radius);
    if (e.positives.size() < static_cast<std::size_t>(cfg.k_pos) ||
        e.negatives.size() < static_cast<std::size_t>(cfg.k_neg)) {
      ++skipped;
      spdlog::warn("query {} skipped: {} positives / {} negatives available, need {} / {}", i, e.positives.size(),
                   e.negatives.size(), cfg.k_pos, cfg.k_neg);
      continue;
    }
    std::mt19937_64 rng(mix_seed(seed, i));
    Triplet t;
    t.query = i;
    t.positives = sample_without_replacement(e.positives, cfg.k_pos, rng);
    t.negatives = sample_without_replacement(e.negatives, cfg.k_neg, rng);
    out.push_back(std::move(t));
  }
  if (skipped > 0) spdlog::warn("{} of {} queries had too few triplet candidates", skipped, poses.size());
  return out;
}

TripletLoss lazy_triplet_loss(const Eigen::VectorXd& q, std::span<const Eigen::VectorXd> positives,
                              std::span<const Eigen::VectorXd> negatives, double beta, bool hard_mining) {
  if (positives.empty() || negatives.empty()) throw InputError("lazy triplet loss needs positives and negatives");
  TripletLoss l;
  l.positive_distance = (q - positives[0]).norm();
  for (std::size_t i = 1; i < positives.size(); ++i) {
    const double d = (q - positives[i]).norm();
    if (hard_mining ? d > l.positive_distance : d < l.positive_distance) {
      l.positive_distance = d;
      l.positive = i;
    }
  }
  l.negative_distance = (q - negatives[0]).norm();
  for (std::size_t i = 1; i < negatives.size(); ++i) {
    const double d = (q - negatives[i]).norm();
    if (hard_mining ? d < l.negative_distance : d > l.negative_distance) {
      l.negative_distance = d;
      l.negative = i;
    }
  }
  const double pre = beta + l.positive_distance - l.negative_distance;
  l.value = std::isnan(pre) ? pre : std::max(0.0, pre);  // NaN must reach the caller's finiteness check
  return l;
}

TripletGradients lazy_triplet_gradients(const Eigen::VectorXd& q, const Eigen::VectorXd& positive,
                                        const Eigen::VectorXd& negative, const TripletLoss& loss) {
  TripletGradients g{Eigen::VectorXd::Zero(q.size()), Eigen::VectorXd::Zero(q.size()),
                     Eigen::VectorXd::Zero(q.size())};
  if (!(loss.value > 0.0)) return g;
  if (loss.positive_distance > 0.0) {
    const Eigen::VectorXd u = (q - positive) / loss.positive_distance;
    g.query += u;
    g.positive -= u;
  }
  if (loss.negative_distance > 0.0) {
    const Eigen::VectorXd u = (q - negative) / loss.negative_distance;
    g.query -= u;
    g.negative += u;
  }
  return g;
}

bool adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, double lr,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw InputError("parameter and gradient sizes differ");
  for (double g : grads) {
    if (!std::isfinite(g)) return false;
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + cfg.eps);
  }
  return true;
}

template <typename T>
bool adam_step(net::NetParams<T>& params, const net::NetParams<T>& grads, NetAdamState<T>& state, double lr,
               const AdamConfig& cfg) {
  if (!grads.all_finite()) return false;
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  if (p.size() != g.size() || p.size() != m.size()) throw InputError("optimizer state does not match the network");
  ++state.t;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.t)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.t)));
  const T step = static_cast<T>(lr);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto pa = p[i].second->array();
    const auto ga = g[i].second->array();
    auto ma = m[i].second->array();
    auto va = v[i].second->array();
    ma = b1 * ma + (T(1) - b1) * ga;
    va = b2 * va + (T(1) - b2) * ga.square();
    pa -= step * (ma / c1) / ((va / c2).sqrt() + eps);
  }
  net::renormalize_supports(params);
  return true;
}

template bool adam_step<float>(net::NetParams<float>&, const net::NetParams<float>&, NetAdamState<float>&, double,
                               const AdamConfig&);
template bool adam_step<double>(net::NetParams<double>&, const net::NetParams<double>&, NetAdamState<double>&,
                                double, const AdamConfig&);

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw InputError("epoch must be >= 0");
  return cfg.lr * std::pow(cfg.decay, static_cast<double>(epoch / cfg.decay_every));
}

TrainResult train(std::span<const VoxelizedScene> scenes, const net::NetConfig& net_cfg, const TrainConfig& cfg,
                  net::NetParams<float> init, const TrainProgress& progress) {
  cfg.validate();
  net_cfg.validate();
  std::vector<RigidTransform> poses;
  poses.reserve(scenes.size());
  for (const auto& s : scenes) poses.push_back(s.pose);

  // Graph structure depends on coordinates only: build it once per scene.
  std::vector<net::GraphPyramid> pyramids(scenes.size());
  std::vector<net::Mat<float>> feats(scenes.size());
  std::vector<char> prepared(scenes.size(), 0);
  auto prepare = [&](std::size_t i) {
    if (prepared[i]) return;
    pyramids[i] = net::prepare_pyramid(scenes[i], net_cfg);
    feats[i] = net::input_features<float>(scenes[i]);
    prepared[i] = 1;
  };

  TrainResult res;
  res.params = std::move(init);
  NetAdamState<float> state(res.params);
  const auto d_out = static_cast<Eigen::Index>(net_cfg.d_out);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) break;
    const double lr = lr_at_epoch(epoch, cfg);
    std::vector<Triplet> triplets = mine_triplets(poses, cfg, mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    if (triplets.empty()) throw InputError("no triplet could be mined from the training scenes");
    std::mt19937_64 order_rng(mix_seed(cfg.seed ^ 0x5eedULL, static_cast<std::uint64_t>(epoch)));
    std::shuffle(triplets.begin(), triplets.end(), order_rng);

    double epoch_sum = 0.0;
    int epoch_steps = 0;
    const std::size_t batch = static_cast<std::size_t>(cfg.triplets_per_step);
    for (std::size_t start = 0; start < triplets.size(); start += batch) {
      if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) break;
      const std::size_t stop = std::min(triplets.size(), start + batch);

      // Each distinct scene of the step is forwarded once; its descriptor
      // gradient sums the contributions of every triplet that uses it.
      std::map<std::size_t, net::ForwardCache<float>> caches;
      std::map<std::size_t, Eigen::VectorXd> desc, ddesc;
      for (std::size_t t = start; t < stop; ++t) {
        std::vector<std::size_t> ids{triplets[t].query};
        ids.insert(ids.end(), triplets[t].positives.begin(), triplets[t].positives.end());
        ids.insert(ids.end(), triplets[t].negatives.begin(), triplets[t].negatives.end());
        for (std::size_t id : ids) {
          if (caches.count(id)) continue;
          prepare(id);
          const net::Mat<float> out = net::forward(res.params, net_cfg, pyramids[id], feats[id], &caches[id]);
          desc[id] = out.row(0).transpose().cast<double>();
          ddesc[id] = Eigen::VectorXd::Zero(d_out);
        }
      }
      double loss_sum = 0.0;
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t t = start; t < stop; ++t) {
        const Triplet& tr = triplets[t];
        std::vector<Eigen::VectorXd> pos, neg;
        for (std::size_t id : tr.positives) pos.push_back(desc[id]);
        for (std::size_t id : tr.negatives) neg.push_back(desc[id]);
        const TripletLoss l = lazy_triplet_loss(desc[tr.query], pos, neg, cfg.margin, cfg.hard_mining);
        loss_sum += l.value;
        const std::size_t p_id = tr.positives[l.positive];
        const std::size_t n_id = tr.negatives[l.negative];
        const TripletGradients g = lazy_triplet_gradients(desc[tr.query], desc[p_id], desc[n_id], l);
        ddesc[tr.query] += inv * g.query;
        ddesc[p_id] += inv * g.positive;
        ddesc[n_id] += inv * g.negative;
      }
      const double loss = loss_sum * inv;
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(res.steps));
      }

      net::NetParams<float> grads = res.params.zeros_like();
      for (const auto& [id, dd] : ddesc) {
        if (dd.isZero(0.0)) continue;
        const net::Mat<float> dout = dd.transpose().cast<float>();
        net::backward(res.params, net_cfg, pyramids[id], caches[id], dout, grads);
      }
      if (!adam_step(res.params, grads, state, lr)) {
        ++res.aborted_steps;
        spdlog::warn("step {} aborted: non-finite gradient", res.steps);
      }
      const LossRecord rec{epoch, res.steps, loss, lr};
      res.trace.push_back(rec);
      if (progress) progress(rec);
      ++res.steps;
      epoch_sum += loss;
      ++epoch_steps;
    }
    if (epoch_steps > 0) res.epoch_loss.push_back(epoch_sum / epoch_steps);
  }
  return res;
}

void write_loss_csv(std::span<const LossRecord> trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write loss trace: " + path.string());
  out.precision(17);
  out << "epoch,step,loss,lr\n";
  for (const auto& r : trace) out << r.epoch << ',' << r.step << ',' << r.loss << ',' << r.lr << '\n';
}

}  // namespace gspr
