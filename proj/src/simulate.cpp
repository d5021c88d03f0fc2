#include "sketchlidar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sketchlidar/errors.hpp"
#include "sketchlidar/parallel.hpp"

namespace sketchlidar {

LidarCube::LidarCube(std::uint32_t rows, std::uint32_t cols, std::uint32_t T)
    : rows_(rows), cols_(cols), T_(T), counts_(std::size_t(rows) * cols * T, 0u) {
  if (rows == 0 || cols == 0 || T == 0) throw InvalidArgument("cube dimensions must be positive");
}

std::span<std::uint32_t> LidarCube::pixel(std::uint32_t i, std::uint32_t j) {
  return std::span<std::uint32_t>(counts_).subspan((std::size_t(i) * cols_ + j) * T_, T_);
}

std::span<const std::uint32_t> LidarCube::pixel(std::uint32_t i, std::uint32_t j) const {
  return std::span<const std::uint32_t>(counts_).subspan((std::size_t(i) * cols_ + j) * T_, T_);
}

std::uint64_t LidarCube::pixel_total(std::uint32_t i, std::uint32_t j) const {
  std::uint64_t total = 0;
  for (auto c : pixel(i, j)) total += c;
  return total;
}

double LidarCube::mean_photons() const {
  if (counts_.empty()) return 0.0;
  long double total = 0;
  for (auto c : counts_) total += c;
  return static_cast<double>(total / (static_cast<long double>(rows_) * cols_));
}

PhotonSampler::PhotonSampler(const ModelParams& params, const ImpulseResponse& irf)
    : PhotonSampler(model_pmf(params, irf)) {}

PhotonSampler::PhotonSampler(std::span<const double> pmf) : cdf_(pmf.size()) {
  if (pmf.empty()) throw InvalidArgument("empty pmf");
  double acc = 0.0;
  for (std::size_t x = 0; x < pmf.size(); ++x) {
    acc += std::max(pmf[x], 0.0);
    cdf_[x] = acc;
  }
  if (!(acc > 0.0)) throw InvalidArgument("pmf has no mass");
  for (double& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

std::uint32_t PhotonSampler::draw(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), std::ptrdiff_t(cdf_.size()) - 1));
}

void PhotonSampler::sample_into(std::size_t n, Rng& rng, std::vector<std::uint32_t>& out) const {
  out.resize(n);
  for (auto& x : out) x = draw(rng);
}

PhotonStream PhotonSampler::sample(std::size_t n, std::uint64_t seed) const {
  Rng rng(seed);
  PhotonStream s;
  s.T = bins();
  sample_into(n, rng, s.stamps);
  return s;
}

PhotonStream sample_photons(const ModelParams& params, const ImpulseResponse& irf, std::size_t n, std::uint64_t seed) {
  return PhotonSampler(params, irf).sample(n, seed);
}

Scene Scene::uniform(std::uint32_t rows, std::uint32_t cols, const ModelParams& params) {
  Scene s;
  s.rows = rows;
  s.cols = cols;
  s.pixels.assign(std::size_t(rows) * cols, params);
  return s;
}

namespace {

void simulate_pixel(const Scene& scene, const ImpulseResponse& irf, double n_bar, std::uint64_t seed, CountMode mode,
                    std::uint32_t i, std::uint32_t j, LidarCube& cube) {
  Rng rng(derive_seed(seed, i, j));
  std::uint64_t n;
  if (mode == CountMode::Poisson) {
    std::poisson_distribution<std::uint64_t> poisson(n_bar);
    n = poisson(rng.engine());
  } else {
    n = static_cast<std::uint64_t>(std::llround(n_bar));
  }
  const PhotonSampler sampler(scene.at(i, j), irf);
  auto counts = cube.pixel(i, j);
  for (std::uint64_t p = 0; p < n; ++p) ++counts[sampler.draw(rng)];
}

void check_scene(const Scene& scene, double n_bar) {
  if (scene.rows == 0 || scene.cols == 0 || scene.pixels.size() != std::size_t(scene.rows) * scene.cols)
    throw InvalidArgument("scene dimensions do not match its pixel list");
  if (!(n_bar > 0.0)) throw InvalidArgument("mean photon count must be positive");
}

}  // namespace

LidarCube simulate_cube(const Scene& scene, const ImpulseResponse& irf, double n_bar, std::uint64_t seed, CountMode mode) {
  check_scene(scene, n_bar);
  LidarCube cube(scene.rows, scene.cols, static_cast<std::uint32_t>(irf.size()));
  const long long pixels = static_cast<long long>(scene.rows) * scene.cols;
  ParallelError error;
#pragma omp parallel for schedule(dynamic, 4)
  for (long long p = 0; p < pixels; ++p) {
    const auto i = static_cast<std::uint32_t>(p / scene.cols);
    const auto j = static_cast<std::uint32_t>(p % scene.cols);
    error.run([&] { simulate_pixel(scene, irf, n_bar, seed, mode, i, j, cube); });
  }
  error.rethrow();
  return cube;
}

LidarCube simulate_cube_serial(const Scene& scene, const ImpulseResponse& irf, double n_bar, std::uint64_t seed,
                               CountMode mode) {
  check_scene(scene, n_bar);
  LidarCube cube(scene.rows, scene.cols, static_cast<std::uint32_t>(irf.size()));
  for (std::uint32_t i = 0; i < scene.rows; ++i)
    for (std::uint32_t j = 0; j < scene.cols; ++j) simulate_pixel(scene, irf, n_bar, seed, mode, i, j, cube);
  return cube;
}

std::vector<double> histogram(const PhotonStream& stream) {
  std::vector<double> h(stream.T, 0.0);
  for (auto x : stream.stamps) {
    if (x >= stream.T) throw InvalidArgument("time-stamp outside [0, T)");
    h[x] += 1.0;
  }
  return h;
}

std::vector<double> histogram(std::span<const std::uint32_t> counts) {
  return std::vector<double>(counts.begin(), counts.end());
}

}  // namespace sketchlidar
