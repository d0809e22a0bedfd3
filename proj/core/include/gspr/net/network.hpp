#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gspr/net/graph.hpp"
#include "gspr/net/layers.hpp"
#include "gspr/voxelizer.hpp"

namespace gspr::net {

struct NetConfig {
  int in_channels = 56;
  int J = 25;
  int supports = 1;
  double pool_rate = 0.25;
  std::vector<int> widths{64, 128, 256};  // one conv/pool/ReLU block per entry
  int d_model = 512;
  int d_pe = 512;
  int d_ffn = 1024;
  int heads = 8;
  int fusion_layers = 2;
  int clusters = 64;
  int d_out = 256;
  std::uint64_t init_seed = 1;

  void validate() const;
  // FNV-1a over the canonical text form; the init seed is not part of it.
  std::uint64_t hash() const;
  std::string to_string() const;
  // Smallest input size that survives every pooling stage.
  std::size_t min_nodes() const;
};

template <typename T>
struct NetParams {
  std::vector<GConvParams<T>> backbone;
  LinearParams<T> lift;  // last backbone width -> d_model
  LinearParams<T> pe1;   // 3 -> d_pe
  LinearParams<T> pe2;   // d_pe -> d_model
  std::vector<GConvParams<T>> fusion;
  AttentionParams<T> attention;
  NetVladParams<T> head;

  // Every tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Mat<T>*>> tensors();
  std::vector<std::pair<std::string, const Mat<T>*>> tensors() const;
  std::size_t scalar_count() const;
  NetParams zeros_like() const;
  bool all_finite() const;

  template <typename U>
  NetParams<U> cast() const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, random unit
// supports, unit layer-norm gains. Deterministic in cfg.init_seed.
template <typename T>
NetParams<T> init_params(const NetConfig& cfg);

template <typename T>
void renormalize_supports(NetParams<T>& p);

template <typename T>
struct ForwardCache {
  std::vector<Mat<T>> coords;  // per pyramid level
  std::vector<Mat<T>> inputs;  // backbone block inputs; inputs.back() feeds the lift
  std::vector<GConvCache<T>> conv;
  std::vector<std::vector<std::int32_t>> pool_arg;
  Mat<T> lifted, pe_hidden, fused_in;
  std::vector<GConvCache<T>> fusion;
  std::vector<Mat<T>> fusion_act;  // ReLU outputs between fusion layers
  Mat<T> fused;
  AttentionCache<T> attention;
  Mat<T> attended;
  NetVladCache<T> head;
};

// Graph structure for a scene: centered coordinates, neighbour tables and
// pooling centers.
GraphPyramid prepare_pyramid(const VoxelizedScene& vs, const NetConfig& cfg);
GraphPyramid prepare_pyramid(const Eigen::MatrixXd& coords, const NetConfig& cfg);

template <typename T>
Mat<T> input_features(const VoxelizedScene& vs);

// Returns the 1 x d_out unit descriptor.
template <typename T>
Mat<T> forward(const NetParams<T>& p, const NetConfig& cfg, const GraphPyramid& pyr, const Mat<T>& feats,
               ForwardCache<T>* cache = nullptr);

template <typename T>
struct InputGrads {
  Mat<T> feats;   // n x in_channels
  Mat<T> coords;  // n x 3, w.r.t. the centered level-0 coordinates
};

// Accumulates parameter gradients into `grads` (shaped like p). Input
// gradients are written when `inputs` is non-null.
template <typename T>
void backward(const NetParams<T>& p, const NetConfig& cfg, const GraphPyramid& pyr, const ForwardCache<T>& cache,
              const Mat<T>& dout, NetParams<T>& grads, InputGrads<T>* inputs = nullptr);

// Gradient w.r.t. raw coordinates given the gradient w.r.t. centered ones.
template <typename T>
Mat<T> uncenter_gradient(const Mat<T>& dcentered);

struct Descriptor {
  Eigen::VectorXd vector;
  std::int64_t place_id = 0;
  RigidTransform pose;
};

Descriptor describe(const NetParams<float>& p, const NetConfig& cfg, const VoxelizedScene& vs);

}  // namespace gspr::net
