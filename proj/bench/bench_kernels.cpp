#include <benchmark/benchmark.h>

#include "sketchlidar/estimate.hpp"
#include "sketchlidar/kernels.hpp"

using namespace sketchlidar;

namespace {

const ImpulseResponse& irf1000() {
  static const ImpulseResponse h = gaussian_irf(10, 1000);
  return h;
}

const PhotonStream& stream() {
  static const PhotonStream s = sample_photons(ModelParams({0.5, 0.5}, {400}), irf1000(), 2'000'000, 1);
  return s;
}

void BM_SketchSerial(benchmark::State& state) {
  const auto f = truncated_frequencies(1000, static_cast<std::uint32_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sketch_stamps_serial(stream().stamps, f).count());
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(stream().size()));
}

void BM_SketchParallel(benchmark::State& state) {
  const auto f = truncated_frequencies(1000, static_cast<std::uint32_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sketch_stamps(stream().stamps, f).count());
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(stream().size()));
}

const Scene& scene() {
  static const Scene s = Scene::uniform(32, 32, ModelParams::from_sbr(2, {1}, {120}));
  return s;
}

void BM_SimulateCubeSerial(benchmark::State& state) {
  const auto h = gaussian_irf(5, 250);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_cube_serial(scene(), h, 500, 3).mean_photons());
}

void BM_SimulateCubeParallel(benchmark::State& state) {
  const auto h = gaussian_irf(5, 250);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_cube(scene(), h, 500, 3).mean_photons());
}

void BM_SketchCubeSerial(benchmark::State& state) {
  const auto h = gaussian_irf(5, 250);
  const auto cube = simulate_cube(scene(), h, 500, 3);
  const auto f = truncated_frequencies(250, 10);
  for (auto _ : state) benchmark::DoNotOptimize(sketch_cube_serial(cube, f).size());
}

void BM_SketchCubeParallel(benchmark::State& state) {
  const auto h = gaussian_irf(5, 250);
  const auto cube = simulate_cube(scene(), h, 500, 3);
  const auto f = truncated_frequencies(250, 10);
  for (auto _ : state) benchmark::DoNotOptimize(sketch_cube(cube, f).size());
}

void BM_SmleFit(benchmark::State& state) {
  const auto h = gaussian_irf(5, 250);
  const auto K = static_cast<std::size_t>(state.range(0));
  const auto truth = K == 1 ? ModelParams::from_sbr(1, {1}, {87}) : ModelParams::from_sbr(5, {0.6, 0.4}, {60, 170});
  SketchState st(truncated_frequencies(250, 8));
  st.add(sample_photons(truth, h, 1000, 5).stamps);
  const auto s = st.finalize();
  for (auto _ : state) benchmark::DoNotOptimize(smle_fit(s, h, K).loss);
}

void BM_MatchedFilter(benchmark::State& state) {
  const auto h = gaussian_irf(5, 250);
  const auto hist = histogram(sample_photons(ModelParams::from_sbr(1, {1}, {87}), h, 1000, 5));
  for (auto _ : state) benchmark::DoNotOptimize(matched_filter(hist, h));
}

}  // namespace

BENCHMARK(BM_SketchSerial)->Arg(1)->Arg(10)->Arg(25);
BENCHMARK(BM_SketchParallel)->Arg(1)->Arg(10)->Arg(25);
BENCHMARK(BM_SimulateCubeSerial);
BENCHMARK(BM_SimulateCubeParallel);
BENCHMARK(BM_SketchCubeSerial);
BENCHMARK(BM_SketchCubeParallel);
BENCHMARK(BM_SmleFit)->Arg(1)->Arg(2);
BENCHMARK(BM_MatchedFilter);

BENCHMARK_MAIN();
