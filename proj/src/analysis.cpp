#include "sketchlidar/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "sketchlidar/errors.hpp"

namespace sketchlidar {

namespace {

// dp(x)/d(alpha_1..alpha_K, t_1..t_K) for every bin, as a T x 2K matrix.
Eigen::MatrixXd pmf_jacobian(const ModelParams& params, const ImpulseResponse& irf) {
  const std::size_t T = irf.size(), K = params.surfaces();
  Eigen::MatrixXd G(T, 2 * K);
  for (std::size_t k = 1; k <= K; ++k) {
    const auto s = shifted_irf(irf, params.depth(k));
    const auto ds = shifted_irf_derivative(irf, params.depth(k));
    for (std::size_t x = 0; x < T; ++x) {
      G(x, k - 1) = s[x] - 1.0 / static_cast<double>(T);
      G(x, K + k - 1) = params.alpha(k) * ds[x];
    }
  }
  return G;
}

Eigen::MatrixXd multinomial_fim(const Eigen::MatrixXd& G, std::span<const double> p, double n) {
  const Eigen::Index P = G.cols();
  Eigen::MatrixXd I = Eigen::MatrixXd::Zero(P, P);
  for (Eigen::Index x = 0; x < G.rows(); ++x) {
    const Eigen::VectorXd g = G.row(x).transpose();
    if (p[x] < 1e-15) {
      if (g.cwiseAbs().maxCoeff() < 1e-12) continue;
      throw SingularModelError("zero probability cell with nonzero derivative");
    }
    I.noalias() += g * g.transpose() / p[x];
  }
  I *= n;
  return 0.5 * (I + I.transpose());
}

}  // namespace

Eigen::MatrixXd fim_full(const ModelParams& params, const ImpulseResponse& irf, double n) {
  if (params.surfaces() == 0) throw InvalidArgument("Fisher information needs K >= 1");
  return multinomial_fim(pmf_jacobian(params, irf), model_pmf(params, irf), n);
}

Eigen::MatrixXd fim_coarse(const ModelParams& params, const ImpulseResponse& irf, std::uint32_t m_tilde, double n) {
  if (params.surfaces() == 0) throw InvalidArgument("Fisher information needs K >= 1");
  const std::vector<double> zeros(irf.size(), 0.0);
  const CoarseHistogram cells = coarse_bin(zeros, m_tilde);
  const Eigen::MatrixXd G = pmf_jacobian(params, irf);
  Eigen::MatrixXd Gc = Eigen::MatrixXd::Zero(m_tilde, G.cols());
  for (std::uint32_t x = 0; x < irf.size(); ++x) Gc.row(cells.cell(x)) += G.row(x);
  const auto P = coarse_probabilities(model_pmf(params, irf), cells);
  return multinomial_fim(Gc, P, n);
}

Eigen::MatrixXd fim_sketch(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs,
                           double n) {
  if (params.surfaces() == 0) throw InvalidArgument("Fisher information needs K >= 1");
  const Eigen::MatrixXd J = sketch_jacobian(params, irf, freqs);
  const Eigen::MatrixXd S = regularized_covariance(params, irf, freqs);
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw SingularModelError("sketch covariance is not positive definite");
  Eigen::MatrixXd I = n * (J.transpose() * llt.solve(J));
  return 0.5 * (I + I.transpose());
}

double crb_rmse(const Eigen::MatrixXd& fim) {
  if (fim.rows() == 0 || fim.rows() != fim.cols()) throw InvalidArgument("Fisher information must be square");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fim);
  const auto& ev = es.eigenvalues();
  if (!(ev.maxCoeff() > 0.0) || ev.minCoeff() <= 1e-12 * ev.maxCoeff())
    throw NonIdentifiableError("Fisher information is singular");
  return std::sqrt((es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose()).trace());
}

EfficiencyReport rep(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs) {
  EfficiencyReport r;
  r.rmse_full = crb_rmse(fim_full(params, irf, 1.0));
  r.rmse_sketch = crb_rmse(fim_sketch(params, irf, freqs, 1.0));
  r.rep = 100.0 * (r.rmse_sketch - r.rmse_full) / r.rmse_full;
  r.m = freqs.size();
  r.scheme = freqs.scheme == FrequencyScheme::Truncated ? "truncated" : "random";
  return r;
}

EfficiencyReport rep_coarse(const ModelParams& params, const ImpulseResponse& irf, std::uint32_t m_tilde) {
  EfficiencyReport r;
  r.rmse_full = crb_rmse(fim_full(params, irf, 1.0));
  r.rmse_sketch = crb_rmse(fim_coarse(params, irf, m_tilde, 1.0));
  r.rep = 100.0 * (r.rmse_sketch - r.rmse_full) / r.rmse_full;
  r.m = m_tilde;
  r.scheme = "coarse";
  return r;
}

double rmse(std::span<const double> estimates, std::span<const double> truths, double T, bool circular) {
  if (estimates.size() != truths.size()) throw InvalidArgument("rmse: length mismatch");
  if (estimates.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = circular ? circular_distance(estimates[i], truths[i], T) : estimates[i] - truths[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

double detection_rate(std::span<const double> errors, double tol) {
  if (tol < 0.0) throw InvalidArgument("tolerance must be nonnegative");
  if (errors.empty()) return 0.0;
  const auto hits = std::count_if(errors.begin(), errors.end(), [&](double e) { return e <= tol; });
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

double rmse_ratio(double rmse_a, double rmse_b) {
  if (!(rmse_b > 0.0)) throw InvalidArgument("rmse_ratio: denominator must be positive");
  return rmse_a / rmse_b;
}

double circular_mean_std(const ModelParams& params, const ImpulseResponse& irf, double n) {
  const FrequencySet f = truncated_frequencies(static_cast<std::uint32_t>(irf.size()), 1);
  const Eigen::MatrixXd S = covariance(params, irf, f);
  const Complex z = signal_cf(params, irf, 1);
  const double r2 = std::norm(z);
  if (r2 <= 0.0) throw UndefinedPhaseError("fundamental CF vanishes");
  Eigen::Vector2d g(-z.imag() / r2, z.real() / r2);
  const double var_phase = g.dot(S * g) / n;
  return static_cast<double>(irf.size()) / (2.0 * std::numbers::pi) * std::sqrt(var_phase);
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace sketchlidar
