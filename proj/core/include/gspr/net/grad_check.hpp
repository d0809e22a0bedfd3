#pragma once

#include <cstdint>
#include <limits>
#include <string>

namespace gspr::net {

enum class GradStage { kLinear, kGConv, kPool, kPosFfn, kAttention, kNetVlad, kMlp, kFull };

const char* to_string(GradStage s);
// Throws InputError on an unknown name.
GradStage grad_stage_from_string(const std::string& s);

struct GradCheckOptions {
  int nodes = 32;  // at most 64
  double epsilon = 1e-5;
  std::uint64_t seed = 0;
  // Per tensor the error is max|a - n| / max(max|a|, max|n|, floor * G),
  // G being the largest analytic entry over the whole stage. The floor keeps
  // tensors with identically zero gradients (e.g. key biases) meaningful.
  double floor = 1e-3;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Entries whose +-epsilon probes flip a max/ReLU/neighbourhood decision.
  std::size_t skipped = 0;
  std::string worst;  // tensor[index] attaining max_rel_error
};

// Compares analytic gradients of L = sum(R * stage_output) (R random) with
// central differences for every parameter tensor and input of the stage,
// in double precision, on a random instance.
GradCheckResult grad_check(GradStage stage, const GradCheckOptions& opts);

}  // namespace gspr::net
