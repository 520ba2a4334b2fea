#include <benchmark/benchmark.h>

#include <vector>

#include "lungforge/dce_losses.hpp"
#include "lungforge/domain_gap.hpp"
#include "lungforge/image_ops.hpp"
#include "lungforge/ntxent.hpp"
#include "lungforge/phantom.hpp"
#include "lungforge/rng.hpp"
#include "lungforge/unet.hpp"

namespace lf = lungforge;

namespace {

lf::GrayImage phantom(int side) {
  auto img = lf::generate_phantom(0, lf::DomainConfig::preset("A"), 1).image;
  return side == lf::kPhantomSize ? img : lf::GrayImage(lf::resize_bilinear(img.view(), side, side));
}

void BM_UNetForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto model = lf::init_dce_model({}, 0);
  const auto img = phantom(side);
  for (auto _ : state) benchmark::DoNotOptimize(lf::forward(model, img.view()));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_UNetForward)->Arg(64)->Arg(128)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_UNetForwardBackward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto model = lf::init_dce_model({}, 0);
  const auto img = phantom(side);
  const lf::Plane upstream(side, side, 1.0);
  for (auto _ : state) {
    lf::UNetCache cache;
    benchmark::DoNotOptimize(lf::forward(model, img.view(), &cache));
    benchmark::DoNotOptimize(lf::backward(model, cache, upstream.view()));
  }
}
BENCHMARK(BM_UNetForwardBackward)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_RegionConflictGrad(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto x = phantom(side);
  lf::Plane y = x.plane();
  for (double& v : y.values()) v *= 0.9;
  const std::vector<lf::PlaneView> xs{x.view()};
  const std::vector<lf::PlaneView> ys{y.view()};
  for (auto _ : state) benchmark::DoNotOptimize(lf::region_conflict_loss_grad(xs, ys, 4));
}
BENCHMARK(BM_RegionConflictGrad)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_LocalConflictSmoothGrad(benchmark::State& state) {
  const auto x = phantom(224);
  lf::Plane y = x.plane();
  for (double& v : y.values()) v = 0.5 * v + 0.1;
  const std::vector<lf::PlaneView> xs{x.view()};
  const std::vector<lf::PlaneView> ys{y.view()};
  for (auto _ : state) benchmark::DoNotOptimize(lf::local_conflict_loss_smooth_grad(ys, xs, 0.1));
}
BENCHMARK(BM_LocalConflictSmoothGrad)->Unit(benchmark::kMillisecond);

void BM_GlcmFeatureVector(benchmark::State& state) {
  const auto img = phantom(224);
  const int levels = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lf::feature_vector(img.view(), levels));
}
BENCHMARK(BM_GlcmFeatureVector)->Arg(8)->Arg(32)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Mmd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  lf::Rng rng(1);
  lf::FeatureSet a(n, std::vector<double>(lf::kDomainFeatureCount));
  lf::FeatureSet b = a;
  for (auto& row : a) {
    for (double& v : row) v = rng.normal();
  }
  for (auto& row : b) {
    for (double& v : row) v = rng.normal() + 0.5;
  }
  for (auto _ : state) benchmark::DoNotOptimize(lf::mmd(a, b, 1.0));
}
BENCHMARK(BM_Mmd)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

void BM_NtXentGrad(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  lf::Rng rng(2);
  std::vector<double> data(rows * 64);
  for (double& v : data) v = rng.normal();
  const lf::EmbeddingBatch z(rows, 64, data);
  for (auto _ : state) benchmark::DoNotOptimize(lf::ntxent_batch_loss_grad(z, 0.5));
}
BENCHMARK(BM_NtXentGrad)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
