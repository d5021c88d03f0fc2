#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sketchlidar/errors.hpp"
#include "sketchlidar/model.hpp"
#include "sketchlidar/rng.hpp"
#include "sketchlidar/simulate.hpp"

using namespace sketchlidar;

TEST_CASE("gaussian IRF is normalized, peaked at zero and circularly symmetric") {
  const auto h = gaussian_irf(5, 250);
  double sum = 0;
  for (double v : h.values()) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.peak() == 0);

  CHECK(gaussian_irf(0.01, 16)[0] > 0.999);

  const auto g = gaussian_irf(15, 1000);
  for (std::size_t t = 1; t < 1000; ++t) CHECK(g[t] == doctest::Approx(g[1000 - t]).epsilon(1e-14));
  // Direct evaluation of exp(-d^2 / 2 sigma^2) with circular distance d.
  double z = 0;
  for (int t = 0; t < 1000; ++t) z += std::exp(-std::pow(std::min(t, 1000 - t), 2) / (2 * 225.0));
  CHECK(g[37] == doctest::Approx(std::exp(-37.0 * 37.0 / 450.0) / z).epsilon(1e-12));

  CHECK_THROWS_AS(gaussian_irf(0, 10), InvalidArgument);
  CHECK_THROWS_AS(gaussian_irf(1, 1), InvalidArgument);
}

TEST_CASE("irf_from_samples normalizes and rejects invalid input") {
  const std::vector<double> v{2, 2, 0, 0};
  const auto h = irf_from_samples(v);
  CHECK(h[0] == 0.5);
  CHECK(h[1] == 0.5);
  CHECK(h[2] == 0.0);
  const std::vector<double> zeros(4, 0.0), negative{1, -1, 1};
  CHECK_THROWS_AS(irf_from_samples(zeros), InvalidArgument);
  CHECK_THROWS_AS(irf_from_samples(negative), InvalidArgument);

  const auto g = gaussian_irf(3, 40);
  const auto again = irf_from_samples(g.values());
  for (std::size_t t = 0; t < 40; ++t) CHECK(again[t] == doctest::Approx(g[t]).epsilon(1e-15));
}

TEST_CASE("IRF spectrum matches a brute-force DFT and has Hermitian symmetry") {
  const auto h = gaussian_irf(5, 250);
  const auto bf = oracle::dft(h.values(), 5);
  CHECK(std::abs(irf_cf(h, 5) - bf) < 1e-12);
  CHECK(std::abs(irf_cf(h, 0) - Complex(1, 0)) < 1e-12);
  const auto e = exp_modified_gaussian_irf(4, 30, 200);
  for (std::size_t j = 1; j < 200; ++j) CHECK(std::abs(irf_cf(e, j) - std::conj(irf_cf(e, 200 - j))) < 1e-12);
  CHECK_THROWS_AS(irf_cf(h, 250), InvalidArgument);

  std::vector<double> delta(64, 0.0);
  delta[0] = 1;
  const auto d = irf_from_samples(delta);
  for (std::size_t j = 0; j < 64; ++j) CHECK(std::abs(irf_cf(d, j) - Complex(1, 0)) < 1e-15);
}

TEST_CASE("model CF examples") {
  const auto h = gaussian_irf(15, 1000);
  CHECK(std::abs(model_cf(ModelParams({1.0}, {}), h, 7)) == 0.0);

  std::vector<double> delta(100, 0.0);
  delta[0] = 1;
  const auto d = irf_from_samples(delta);
  for (std::size_t j : {0u, 3u, 50u, 99u}) CHECK(std::abs(model_cf(ModelParams({0, 1}, {0}), d, j) - 1.0) < 1e-15);

  const ModelParams p({0.5, 0.5}, {320});
  const Complex expect = 0.5 * irf_cf(h, 1) * std::polar(1.0, 2 * std::numbers::pi * 320 / 1000);
  CHECK(std::abs(model_cf(p, h, 1) - expect) < 1e-15);

  // Monte-Carlo oracle: empirical CF of 10^6 photons within 3 standard errors.
  const auto s = sample_photons(p, h, 1'000'000, 11);
  Complex acc = 0;
  for (auto x : s.stamps) acc += std::polar(1.0, 2 * std::numbers::pi * x / 1000.0);
  acc /= double(s.size());
  const double se = std::sqrt(0.5 / s.size());
  CHECK(std::abs(acc.real() - expect.real()) < 3 * se);
  CHECK(std::abs(acc.imag() - expect.imag()) < 3 * se);
}

TEST_CASE("model pmf examples") {
  const auto h = gaussian_irf(5, 250);
  for (double v : model_pmf(ModelParams({1.0}, {}), h)) CHECK(v == doctest::Approx(1.0 / 250).epsilon(1e-12));

  std::vector<double> delta(250, 0.0);
  delta[0] = 1;
  const auto p = model_pmf(ModelParams({0, 1}, {100}), irf_from_samples(delta));
  for (std::size_t x = 0; x < 250; ++x) CHECK(p[x] == doctest::Approx(x == 100 ? 1.0 : 0.0).epsilon(1e-12));

  // Integer shifts are plain circular shifts of h.
  const auto q = model_pmf(ModelParams({0.2, 0.8}, {17}), h);
  for (std::size_t x = 0; x < 250; ++x) CHECK(q[x] == doctest::Approx(0.8 * h[(x + 250 - 17) % 250] + 0.2 / 250).epsilon(1e-12));
}

TEST_CASE("property: CF/pmf consistency, normalization, background blindness over random parameters") {
  Rng rng(2024);
  const auto h = gaussian_irf(7, 128);
  const auto e = exp_modified_gaussian_irf(3, 20, 128);
  for (int draw = 0; draw < 50; ++draw) {
    const auto p = oracle::random_params(rng, 1 + draw % 3, 128);
    const auto& irf = draw % 2 ? h : e;
    const auto pmf = model_pmf(p, irf);
    double sum = 0;
    for (double v : pmf) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (std::size_t j = 0; j < 128; ++j) CHECK(std::abs(oracle::dft(pmf, j) - model_cf(p, irf, j)) < 1e-12);

    // The background term contributes nothing at j >= 1: compare with the signal-only model.
    std::vector<double> signal(p.alphas().begin() + 1, p.alphas().end());
    for (double& a : signal) a /= p.signal_mass();
    std::vector<double> alphas{0.0};
    alphas.insert(alphas.end(), signal.begin(), signal.end());
    const ModelParams pure(alphas, {p.depths().begin(), p.depths().end()});
    for (std::size_t j = 1; j < 128; j += 7)
      CHECK(std::abs(model_cf(p, irf, j) - p.signal_mass() * model_cf(pure, irf, j)) < 1e-13);
  }
}

TEST_CASE("model params: canonical order, SBR helpers, validation") {
  const ModelParams p({0.1, 0.2, 0.7}, {570, 320});
  CHECK(p.depth(1) == 320);
  CHECK(p.depth(2) == 570);
  CHECK(p.alpha(1) == 0.7);
  CHECK(p.sbr() == doctest::Approx(9.0));
  const auto q = ModelParams::from_sbr(3.0, {0.75, 0.25}, {320, 570});
  CHECK(q.background() == doctest::Approx(0.25));
  CHECK(q.alpha(1) == doctest::Approx(0.5625));
  CHECK_THROWS_AS(ModelParams({0.5, 0.6}, {1}), InvalidArgument);
  CHECK_THROWS_AS(ModelParams({0.5, 0.5}, {}), InvalidArgument);
  CHECK_THROWS_AS(ModelParams({-0.1, 1.1}, {1}), InvalidArgument);
}

TEST_CASE("circular helpers") {
  CHECK(circular_distance(0, 249, 250) == 1);
  CHECK(circular_distance(10, 20, 250) == 10);
  CHECK(circular_difference(1, 249, 250) == 2);
  CHECK(wrap_depth(-1, 250) == 249);
  CHECK(wrap_depth(430, 250) == 180);
}

TEST_CASE("fractional shifts interpolate in the Fourier domain") {
  const auto h = gaussian_irf(6, 200);
  const auto s = shifted_irf(h, 40.5);
  double sum = 0, mean = 0;
  for (std::size_t x = 0; x < 200; ++x) {
    sum += s[x];
    mean += s[x] * double(x);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean == doctest::Approx(40.5).epsilon(1e-9));
  // Derivative against central differences.
  const auto ds = shifted_irf_derivative(h, 40.5);
  const auto a = shifted_irf(h, 40.5 + 1e-5), b = shifted_irf(h, 40.5 - 1e-5);
  for (std::size_t x = 30; x < 52; ++x) CHECK(ds[x] == doctest::Approx((a[x] - b[x]) / 2e-5).epsilon(1e-5));
}
