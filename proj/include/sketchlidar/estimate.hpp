#pragma once

// Depth/intensity estimators: sketch-based (circular mean, SMLE, iFFT) and histogram baselines
// (matched filter, EM, coarse binning, max peak).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sketchlidar/model.hpp"
#include "sketchlidar/simulate.hpp"
#include "sketchlidar/sketch.hpp"

namespace sketchlidar {

struct FitResult {
  ModelParams params;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
  ModelParams init;
  std::string init_method;
  /// Norm of the loss gradient in optimizer coordinates (logits, angles), divided by n.
  double gradient_norm = 0.0;
  /// Set when the circular-mean start was undefined and the grid was used instead.
  bool degenerate_init = false;
  /// Observed-data log-likelihood after each EM iteration (EM only).
  std::vector<double> loglik_history;
};

// ---- sketch estimators ------------------------------------------------------------------------

/// t = (T / 2 pi) arg z_1 in [0, T). Throws MissingFrequencyError without index 1 and
/// UndefinedPhaseError when |z_1| < 1e-12.
double circular_mean(const Sketch& sketch);

/// Low-pass reconstruction from a truncated sketch: f(x) = sum_k Re(Z_k exp(-i 2 pi k x / T)) with
/// Z_0 = 1, Z_j = z_j, Z_{T-j} = conj(z_j); returns the integer argmax. With `offset_irf`, the
/// argmax of the same reconstruction of the IRF is subtracted (circularly).
double ifft_estimate(const Sketch& sketch, const ImpulseResponse* offset_irf = nullptr);

enum class Weighting { CUE, Identity, Fixed, TwoStep };

struct SmleOptions {
  Weighting weighting = Weighting::CUE;
  /// Covariance ridge: Sigma + eps * max(tr(Sigma)/2m, trace_floor) * I.
  double reg_eps = 1e-8;
  double trace_floor = 1e-12;
  int max_iter = 500;
  double loss_tol = 1e-10;
  double step_tol = 1e-8;
  double grad_tol = 1e-6;
  /// Minimum grid points per depth for the grid start; the grid also keeps four points per period
  /// of the highest sketched frequency.
  int grid = 16;
  /// Number of local descents; the best final loss wins.
  int n_starts = 3;
  std::optional<ModelParams> init;
  /// Parameters at which Sigma is frozen for Weighting::Fixed (defaults to the start point).
  std::optional<ModelParams> fixed_theta;
};

/// Real 2m x 2m covariance of [cos omega_j x; sin omega_j x] under the model pmf.
Eigen::MatrixXd covariance(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs);

/// Covariance plus the ridge used by SMLE and the sketched Fisher information.
Eigen::MatrixXd regularized_covariance(const ModelParams& params, const ImpulseResponse& irf,
                                       const FrequencySet& freqs, const SmleOptions& options = {});

/// Stacked-real Jacobian of z_theta (2m x 2K) with respect to (alpha_1..alpha_K, t_1..t_K);
/// alpha_0 = 1 - sum alpha_k.
Eigen::MatrixXd sketch_jacobian(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs);

/// (m/2) log det S + n d' S^-1 d with d = z_n - z_theta (CUE); other weightings drop or freeze S.
/// Throws NonFiniteLossError when S is not positive definite or a term is not finite.
double smle_loss(const ModelParams& theta, const Sketch& sketch, const ImpulseResponse& irf,
                 const SmleOptions& options = {});

/// Analytic gradient of smle_loss with respect to (alpha_1..alpha_K, t_1..t_K).
Eigen::VectorXd smle_gradient(const ModelParams& theta, const Sketch& sketch, const ImpulseResponse& irf,
                              const SmleOptions& options = {});

/// Local minimization of smle_loss over the simplex and the circle via softmax logits and angles
/// (BFGS with backtracking). K == 1 starts from the circular mean, K >= 2 from the best points of
/// a uniform depth grid. Requires m >= K + 1.
FitResult smle_fit(const Sketch& sketch, const ImpulseResponse& irf, std::size_t K, const SmleOptions& options = {});

// ---- histogram baselines ----------------------------------------------------------------------

struct CoarseHistogram {
  std::uint32_t T = 0;
  std::uint32_t m_tilde = 0;
  std::uint32_t delta = 0;
  std::vector<double> counts;

  /// Cell of bin x: min(x / delta, m_tilde - 1).
  std::uint32_t cell(std::uint32_t x) const { return std::min(x / delta, m_tilde - 1); }
  std::uint32_t cell_begin(std::uint32_t c) const { return c * delta; }
  std::uint32_t cell_end(std::uint32_t c) const { return c + 1 == m_tilde ? T : std::min(T, (c + 1) * delta); }
  double total() const;
};

CoarseHistogram coarse_bin(const PhotonStream& stream, std::uint32_t m_tilde);
CoarseHistogram coarse_bin(std::span<const double> hist, std::uint32_t m_tilde);

/// Coarse cell probabilities of a pmf over T bins.
std::vector<double> coarse_probabilities(std::span<const double> pmf, const CoarseHistogram& layout);

/// argmax over integer t of sum_s hist[s] log max(h[(s - t) mod T], 1e-12); smallest t on ties.
double matched_filter(std::span<const double> hist, const ImpulseResponse& irf);

enum class CoarseReadout {
  /// Depths restricted to cell centres (the IRF peak placed mid-cell).
  Quantized,
  /// Every integer shift; a pulse wider than a cell then resolves sub-cell depths.
  SubBin
};

/// Matched filter on coarse cells: the shifted IRF is aggregated into the cells and scored by the
/// multinomial log-likelihood.
double coarse_matched_filter(const CoarseHistogram& hist, const ImpulseResponse& irf,
                             CoarseReadout readout = CoarseReadout::Quantized);

struct EmOptions {
  int max_iter = 200;
  double tol = 1e-9;
  double background_init = 0.1;
};

/// Generalized EM for K shifted IRFs plus uniform background on a (possibly coarse) histogram.
/// E-step responsibilities; M-step weights by responsibility mass and depths by the matched filter
/// of the responsibility-weighted counts.
FitResult em_fit(const CoarseHistogram& hist, const ImpulseResponse& irf, std::size_t K, const EmOptions& options = {});
FitResult em_fit(std::span<const double> hist, const ImpulseResponse& irf, std::size_t K, const EmOptions& options = {});

/// Histogram argmax (smallest index on ties).
double max_peak(std::span<const double> hist);

/// Observed-data log-likelihood of a coarse histogram under params (cells with zero counts skipped).
double coarse_loglik(const CoarseHistogram& hist, const ModelParams& params, const ImpulseResponse& irf);

}  // namespace sketchlidar
