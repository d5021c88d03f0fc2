#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "sketchlidar/analysis.hpp"
#include "sketchlidar/config.hpp"
#include "sketchlidar/errors.hpp"

using namespace sketchlidar;

namespace {

bool symmetric_psd(const Eigen::MatrixXd& F) {
  const double scale = F.cwiseAbs().maxCoeff();
  if ((F - F.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0)) return false;
  const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (F + F.transpose())).eigenvalues();
  return ev.minCoeff() >= -1e-8 * ev.maxCoeff();
}

ModelParams with_free(const std::vector<double>& v, std::size_t K) {
  std::vector<double> a{1.0};
  for (std::size_t k = 0; k < K; ++k) a[0] -= v[k], a.push_back(v[k]);
  return ModelParams(a, {v.begin() + K, v.end()});
}

std::vector<double> free_of(const ModelParams& p) {
  std::vector<double> x(p.alphas().begin() + 1, p.alphas().end());
  x.insert(x.end(), p.depths().begin(), p.depths().end());
  return x;
}

}  // namespace

TEST_CASE("property: both FIMs are symmetric PSD and linear in n") {
  Rng rng(4);
  const auto h = gaussian_irf(5, 250);
  for (int d = 0; d < 50; ++d) {
    const std::size_t K = 1 + d % 2;
    const auto p = oracle::random_params(rng, K, 250);
    const auto f = d % 2 ? truncated_frequencies(250, 3 + d % 10) : random_frequencies(250, 3 + d % 10, h, d);
    const auto F = fim_full(p, h, 100), S = fim_sketch(p, h, f, 100), C = fim_coarse(p, h, 20, 100);
    CHECK(F.rows() == Eigen::Index(2 * K));
    CHECK(symmetric_psd(F));
    CHECK(symmetric_psd(S));
    CHECK(symmetric_psd(C));
    CHECK((fim_full(p, h, 200) - 2 * F).cwiseAbs().maxCoeff() < 1e-9 * F.cwiseAbs().maxCoeff());
    CHECK((fim_sketch(p, h, f, 200) - 2 * S).cwiseAbs().maxCoeff() < 1e-9 * S.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("full-data FIM agrees with the empirical Fisher information of 10^6 samples") {
  const auto h = gaussian_irf(5, 250);
  const ModelParams p({0.1, 0.9}, {wrap_depth(430, 250)});
  const auto F = fim_full(p, h, 1);
  // Score of each bin by central differences of log p, then the sample mean of score outer products.
  const auto x0 = free_of(p);
  std::vector<std::vector<double>> score(2, std::vector<double>(250));
  for (std::size_t i = 0; i < 2; ++i) {
    auto up = x0, dn = x0;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    const auto pu = model_pmf(with_free(up, 1), h), pd = model_pmf(with_free(dn, 1), h);
    for (std::size_t x = 0; x < 250; ++x) score[i][x] = (std::log(pu[x]) - std::log(pd[x])) / 2e-6;
  }
  const auto s = sample_photons(p, h, 1'000'000, 8);
  Eigen::Matrix2d E = Eigen::Matrix2d::Zero();
  for (auto x : s.stamps)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) E(i, j) += score[i][x] * score[j][x];
  E /= double(s.size());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(E(i, j) - F(i, j)) < 0.05 * std::sqrt(F(i, i) * F(j, j)));
}

TEST_CASE("sketched FIM: Jacobian by finite differences and information completeness") {
  const auto h = gaussian_irf(5, 250);
  Rng rng(10);
  for (int d = 0; d < 10; ++d) {
    const std::size_t K = 1 + d % 2;
    const auto p = oracle::random_params(rng, K, 250);
    const auto f = random_frequencies(250, 9, h, d);
    const auto J = sketch_jacobian(p, h, f);
    const auto x = free_of(p);
    for (std::size_t i = 0; i < 2 * K; ++i) {
      auto up = x, dn = x;
      up[i] += 1e-6;
      dn[i] -= 1e-6;
      const auto zu = expected_sketch(with_free(up, K), h, f, 1).real_view();
      const auto zd = expected_sketch(with_free(dn, K), h, f, 1).real_view();
      CHECK(((zu - zd) / 2e-6 - J.col(Eigen::Index(i))).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  const ModelParams q({0.5, 0.5}, {wrap_depth(430, 250)});
  const double full = crb_rmse(fim_full(q, h, 1000));
  const double sketched = crb_rmse(fim_sketch(q, h, truncated_frequencies(250, 249), 1000));
  CHECK(std::abs(sketched - full) / full < 0.01);
  CHECK(rep(q, h, truncated_frequencies(250, 249)).rep < 1.0);
}

TEST_CASE("CRB RMSE examples") {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
  D(0, 0) = 4;
  D(1, 1) = 25;
  CHECK(crb_rmse(D) == doctest::Approx(std::sqrt(0.29)));
  const auto h = gaussian_irf(5, 250);
  const ModelParams p({0.2, 0.8}, {60});
  CHECK(crb_rmse(fim_full(p, h, 400)) == doctest::Approx(crb_rmse(fim_full(p, h, 100)) / 2).epsilon(1e-10));
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(2, 2);
  CHECK_THROWS_AS(crb_rmse(singular), NonIdentifiableError);
}

TEST_CASE("property: nested truncated sets never increase the sketched CRB") {
  Rng rng(31);
  const auto h = gaussian_irf(5, 250);
  for (int d = 0; d < 20; ++d) {
    const auto p = oracle::random_params(rng, 1, 250);
    double prev = crb_rmse(fim_sketch(p, h, truncated_frequencies(250, 1), 1));
    for (std::uint32_t m = 2; m <= 20; ++m) {
      const double cur = crb_rmse(fim_sketch(p, h, truncated_frequencies(250, m), 1));
      CHECK(cur <= prev * (1 + 1e-9));
      prev = cur;
    }
  }
}

TEST_CASE("REP: n-invariance, lower bound and the single-peak trend") {
  Rng rng(12);
  const auto h = gaussian_irf(5, 250);
  for (int d = 0; d < 20; ++d) {
    const auto p = oracle::random_params(rng, 1 + d % 2, 250);
    const auto f = truncated_frequencies(250, 4 + d);
    auto rep_at = [&](double n) {
      const double a = crb_rmse(fim_full(p, h, n)), b = crb_rmse(fim_sketch(p, h, f, n));
      return 100 * (b - a) / a;
    };
    CHECK(std::abs(rep_at(100) - rep_at(1e5)) <= 1e-8 * std::max(1.0, std::abs(rep_at(100))));
    const auto r = rep(p, h, f);
    CHECK(r.rep >= -0.01);
    CHECK(r.rep == doctest::Approx(100 * (r.rmse_sketch - r.rmse_full) / r.rmse_full));
  }
  // Short pulse (sigma = 0.011 T), t = 430, T = 1000, SBR 10: REP below 1% with 20 real values.
  const auto s = make_irf("short", 1000);
  CHECK(rep(ModelParams::from_sbr(10, {1}, {430}), s, truncated_frequencies(1000, 10)).rep < 1.0);
}

TEST_CASE("metrics") {
  const std::vector<double> a{0}, b{999};
  CHECK(rmse(a, b, 1000, true) == doctest::Approx(1));
  const std::vector<double> e{1, 3}, t{2, 4};
  CHECK(rmse(e, t, 0, false) == doctest::Approx(1));
  CHECK(rmse(e, e, 10, true) == 0);
  CHECK_THROWS_AS(rmse(a, e, 10, true), InvalidArgument);

  const std::vector<double> zeros(5, 0.0), errs{1, 5, 20};
  CHECK(detection_rate(zeros, 0) == 1.0);
  CHECK(detection_rate(errs, 10) == doctest::Approx(2.0 / 3));
  Rng rng(2);
  for (int d = 0; d < 100; ++d) {
    std::vector<double> v(50);
    for (double& x : v) x = 30 * rng.uniform();
    const double tol = 15 * rng.uniform();
    int count = 0;
    for (double x : v) count += x <= tol;
    CHECK(detection_rate(v, tol) == doctest::Approx(count / 50.0));
  }

  CHECK(rmse_ratio(3, 3) == 1);
  CHECK(rmse_ratio(2, 4) == 0.5);
  CHECK_THROWS_AS(rmse_ratio(1, 0), InvalidArgument);
}

TEST_CASE("circular-mean delta-method std matches simulation") {
  const auto h = gaussian_irf(15, 1000);
  const auto p = ModelParams::from_sbr(1, {1}, {320});
  const double predicted = circular_mean_std(p, h, 2000);
  std::vector<double> err;
  for (int r = 0; r < 2000; ++r) {
    const auto s = sample_photons(p, h, 2000, 300 + r);
    SketchState st(truncated_frequencies(1000, 1));
    st.add(s.stamps);
    err.push_back(circular_difference(circular_mean(st.finalize()), 320, 1000));
  }
  CHECK(sample_std(err) == doctest::Approx(predicted).epsilon(0.06));
}
