#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gspr/net/graph.hpp"
#include "gspr/net/layers.hpp"
#include "gspr/net/network.hpp"
#include "gspr/scene_io.hpp"
#include "gspr/spatial.hpp"
#include "gspr/voxelizer.hpp"

namespace {

std::vector<gspr::Vec3> random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-40.0, 40.0), h(-3.0, 7.0);
  std::vector<gspr::Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), h(rng)};
  return pts;
}

gspr::VoxelizedScene scene_voxels(int n) {
  gspr::SyntheticSceneSpec spec;
  spec.count = 4000;
  return gspr::select_voxels(gspr::voxelize(gspr::generate_synthetic_scene(3, spec), {}), n, 11);
}

void BM_KnnTable(benchmark::State& state) {
  const auto pts = random_cloud(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(gspr::knn_table(pts, 25, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KnnTable)->Arg(1024)->Arg(4096)->Arg(8192)->Unit(benchmark::kMillisecond);

void BM_Voxelize(benchmark::State& state) {
  gspr::SyntheticSceneSpec spec;
  spec.count = static_cast<std::size_t>(state.range(0));
  const auto scene = gspr::generate_synthetic_scene(5, spec);
  const gspr::CylGridConfig grid;
  for (auto _ : state) benchmark::DoNotOptimize(gspr::voxelize(scene, grid));
}
BENCHMARK(BM_Voxelize)->Arg(4000)->Arg(40000)->Unit(benchmark::kMillisecond);

void BM_GConvForward(benchmark::State& state) {
  using namespace gspr::net;
  const int n = static_cast<int>(state.range(0));
  const int J = 25;
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g;
  Mat<float> coords(n, 3), x(n, 64);
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const auto nb = neighbor_table(coords.cast<double>(), J);
  GConvParams<float> p;
  p.w_center = Mat<float>::Random(64, 128);
  p.supports = Mat<float>::Random(1, 3).rowwise().normalized();
  p.w_support = Mat<float>::Random(64, 128);
  for (auto _ : state) benchmark::DoNotOptimize(gconv_forward(p, x, coords, nb, J));
}
BENCHMARK(BM_GConvForward)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_DescriptorForward(benchmark::State& state) {
  using namespace gspr::net;
  const NetConfig cfg;
  const auto params = init_params<float>(cfg);
  const auto vs = scene_voxels(static_cast<int>(state.range(0)));
  const auto pyr = prepare_pyramid(vs, cfg);
  const auto feats = input_features<float>(vs);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, cfg, pyr, feats));
}
BENCHMARK(BM_DescriptorForward)->Arg(4096)->Arg(8192)->Unit(benchmark::kMillisecond);

void BM_Describe(benchmark::State& state) {
  using namespace gspr::net;
  const NetConfig cfg;
  const auto params = init_params<float>(cfg);
  const auto vs = scene_voxels(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(describe(params, cfg, vs));
}
BENCHMARK(BM_Describe)->Arg(4096)->Arg(8192)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
