#pragma once

// Fisher information, Cramer-Rao bounds, relative error percentage and Monte-Carlo metrics.
// Free parameters throughout are (alpha_1..alpha_K, t_1..t_K); alpha_0 = 1 - sum alpha_k.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sketchlidar/estimate.hpp"
#include "sketchlidar/model.hpp"
#include "sketchlidar/sketch.hpp"

namespace sketchlidar {

/// n * sum_x g(x) g(x)' / p(x) with g = dp/dtheta, summed over the T bins.
Eigen::MatrixXd fim_full(const ModelParams& params, const ImpulseResponse& irf, double n);

/// n * J' S^-1 J with J the stacked-real Jacobian of z_theta and S the ridge-regularized covariance.
Eigen::MatrixXd fim_sketch(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs,
                           double n);

/// Multinomial Fisher information of the coarse histogram with m_tilde cells.
Eigen::MatrixXd fim_coarse(const ModelParams& params, const ImpulseResponse& irf, std::uint32_t m_tilde, double n);

/// sqrt(trace(fim^-1)). Throws NonIdentifiableError when the smallest eigenvalue is at most
/// 1e-12 times the largest.
double crb_rmse(const Eigen::MatrixXd& fim);

struct EfficiencyReport {
  double rmse_full = 0.0;
  double rmse_sketch = 0.0;
  double rep = 0.0;
  std::size_t m = 0;
  std::string scheme;
};

/// 100 (RMSE_m - RMSE_n) / RMSE_n with both bounds evaluated at n = 1.
EfficiencyReport rep(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs);
/// Same for the coarse histogram with m_tilde cells (2m real measurements correspond to m_tilde = 2m).
EfficiencyReport rep_coarse(const ModelParams& params, const ImpulseResponse& irf, std::uint32_t m_tilde);

/// Root mean squared error; `circular` uses d(a,b) = min(|a-b|, T-|a-b|).
double rmse(std::span<const double> estimates, std::span<const double> truths, double T, bool circular);

/// Fraction of errors at most `tol`.
double detection_rate(std::span<const double> errors, double tol);

/// rmse_a / rmse_b.
double rmse_ratio(double rmse_a, double rmse_b);

/// Asymptotic standard deviation (bins) of the circular-mean estimate from n photons: delta method
/// on the Gaussian limit of (Re z_1, Im z_1).
double circular_mean_std(const ModelParams& params, const ImpulseResponse& irf, double n);

/// Sample standard deviation.
double sample_std(std::span<const double> values);

}  // namespace sketchlidar
