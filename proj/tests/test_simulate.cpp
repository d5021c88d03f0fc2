#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sketchlidar/simulate.hpp"

using namespace sketchlidar;

TEST_CASE("sample_photons basics") {
  const auto h = gaussian_irf(5, 250);
  const ModelParams p({0.3, 0.7}, {100});
  CHECK(sample_photons(p, h, 0, 1).size() == 0);
  CHECK(sample_photons(p, h, 1000, 9).stamps == sample_photons(p, h, 1000, 9).stamps);
  CHECK(sample_photons(p, h, 1000, 9).stamps != sample_photons(p, h, 1000, 10).stamps);

  std::vector<double> delta(250, 0.0);
  delta[0] = 1;
  for (auto x : sample_photons(ModelParams({0, 1}, {42}), irf_from_samples(delta), 100, 3).stamps) CHECK(x == 42);
}

TEST_CASE("uniform background fills bins within 5 sigma of n/T") {
  const std::size_t n = 1'000'000, T = 100;
  const auto s = sample_photons(ModelParams({1.0}, {}), gaussian_irf(2, T), n, 5);
  const auto hist = histogram(s);
  const double mean = double(n) / T, sd = std::sqrt(n * (1.0 / T) * (1 - 1.0 / T));
  for (double c : hist) CHECK(std::abs(c - mean) < 5 * sd);
}

TEST_CASE("empirical pmf of 10^6 draws is within total variation 0.005 of the model") {
  // Sampling noise alone gives E[TV] ~ sum_x sqrt(p_x / (2 pi n)); at n = 10^6 that stays below
  // 0.005 only for supports of a few dozen bins, so the fixed bound uses T = 50 and the wider pmf
  // is compared with its own noise level.
  auto tv_of = [](const ModelParams& p, const ImpulseResponse& h, std::uint64_t seed, double& expected) {
    const auto hist = histogram(sample_photons(p, h, 1'000'000, seed));
    const auto pmf = model_pmf(p, h);
    double tv = 0;
    expected = 0;
    for (std::size_t x = 0; x < pmf.size(); ++x) {
      tv += std::abs(hist[x] / 1e6 - pmf[x]) / 2;
      expected += std::sqrt(pmf[x] * (1 - pmf[x]) / (2 * std::numbers::pi * 1e6));
    }
    return tv;
  };
  double expected = 0;
  CHECK(tv_of(ModelParams({0.2, 0.5, 0.3}, {10.5, 35.25}), exp_modified_gaussian_irf(2, 4, 50), 77, expected) < 0.005);
  const double wide = tv_of(ModelParams({0.2, 0.5, 0.3}, {60.5, 210.25}), exp_modified_gaussian_irf(4, 25, 300), 78, expected);
  CHECK(wide < 1.1 * expected);
  CHECK(wide > 0.9 * expected);
}

TEST_CASE("cube simulation: determinism, Poisson mean, distinct pixels, serial equality") {
  const auto h = gaussian_irf(5, 153);
  const auto one = Scene::uniform(1, 1, ModelParams({0.3, 0.7}, {50}));
  CHECK(simulate_cube(one, h, 10, 4) == simulate_cube(one, h, 10, 4));

  const auto bg = Scene::uniform(20, 20, ModelParams({1.0}, {}));
  const auto cube = simulate_cube(bg, h, 50, 8);
  // Mean of 400 Poisson(50) counts has standard error sqrt(50/400).
  CHECK(std::abs(cube.mean_photons() - 50) < 5 * std::sqrt(50.0 / 400));

  const auto four = Scene::uniform(2, 2, ModelParams({0.3, 0.7}, {50}));
  const auto c4 = simulate_cube(four, h, 200, 8);
  CHECK(!std::equal(c4.pixel(0, 0).begin(), c4.pixel(0, 0).end(), c4.pixel(0, 1).begin()));
  CHECK(!std::equal(c4.pixel(0, 0).begin(), c4.pixel(0, 0).end(), c4.pixel(1, 0).begin()));

  const auto big = Scene::uniform(9, 7, ModelParams({0.4, 0.6}, {80}));
  CHECK(simulate_cube(big, h, 120, 21) == simulate_cube_serial(big, h, 120, 21));

  const auto fixed = simulate_cube(big, h, 120, 21, CountMode::Fixed);
  for (std::uint32_t i = 0; i < 9; ++i)
    for (std::uint32_t j = 0; j < 7; ++j) CHECK(fixed.pixel_total(i, j) == 120);
}
