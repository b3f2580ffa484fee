// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <vector>

#include "nsnet/kernels.hpp"
#include "nsnet/patchsel.hpp"
#include "nsnet/random.hpp"

namespace {

using namespace nsnet;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Projecting a batch of 768-dim embeddings: (rows x 768) * (768 x 768).
template <auto Kernel>
void BM_Projection(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t d = 768;
  const auto u = random_values(rows * d, 1);
  const auto p = random_values(d * d, 2);
  std::vector<double> out(rows * d);
  for (auto _ : state) {
    Kernel(u, p, out, rows, d, d);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

// Adapter forward pass, z = x A^T with h = 256.
template <auto Kernel>
void BM_Adapter(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t d = 768, h = 256;
  const auto x = random_values(rows * d, 3);
  const auto a = random_values(h * d, 4);
  std::vector<double> out(rows * h);
  for (auto _ : state) {
    Kernel(x, a, out, rows, d, h);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

std::vector<Patch> image_patches() {
  Rng rng(5);
  RasterImage img{448, 448, std::vector<std::uint8_t>(448 * 448 * 3)};
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return tile(img, 32);
}

template <auto Scorer>
void BM_PatchScores(benchmark::State& state) {
  const auto patches = image_patches();
  for (auto _ : state) {
    auto scores = Scorer(patches, 32);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(patches.size()));
}

BENCHMARK(BM_Projection<kernels::serial::matmul>)->Name("projection/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_Projection<kernels::parallel::matmul>)->Name("projection/parallel")->Arg(64)->Arg(512)->UseRealTime();
BENCHMARK(BM_Adapter<kernels::serial::matmul_bt>)->Name("adapter/serial")->Arg(32)->Arg(512);
BENCHMARK(BM_Adapter<kernels::parallel::matmul_bt>)->Name("adapter/parallel")->Arg(32)->Arg(512)->UseRealTime();
BENCHMARK(BM_PatchScores<score_patches_serial>)->Name("patch_scores/serial");
BENCHMARK(BM_PatchScores<score_patches>)->Name("patch_scores/parallel")->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
