#pragma once

// Time-of-flight observation model: impulse responses, mixture parameters and
// their characteristic functions on the circular grid {0, ..., T-1}.

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sketchlidar {

using Complex = std::complex<double>;

/// Normalized impulse response h over T bins with its cached spectrum
/// h_hat[j] = sum_t h[t] exp(+i 2 pi j t / T).
class ImpulseResponse {
 public:
  /// Normalizes `values` to unit mass. Throws InvalidArgument on negative or all-zero input.
  static ImpulseResponse from_samples(std::vector<double> values, double bin_width = 1.0);

  std::size_t size() const noexcept { return h_.size(); }
  std::span<const double> values() const noexcept { return h_; }
  std::span<const Complex> spectrum() const noexcept { return h_hat_; }
  double operator[](std::size_t t) const noexcept { return h_[t]; }

  /// Physical seconds per bin; metadata only.
  double bin_width() const noexcept { return bin_width_; }

  /// Index of the largest sample (smallest index on ties).
  std::size_t peak() const noexcept;

 private:
  ImpulseResponse() = default;
  std::vector<double> h_;
  std::vector<Complex> h_hat_;
  double bin_width_ = 1.0;
};

/// Mixture weights (alpha_0 = background, alpha_1..alpha_K) and surface depths t_1..t_K.
/// Depths are continuous bin positions, kept sorted ascending together with their weights.
class ModelParams {
 public:
  ModelParams() : alphas_{1.0} {}
  ModelParams(std::vector<double> alphas, std::vector<double> depths);

  /// Signal mass split by `signal_fractions` (renormalized), background set from SBR.
  static ModelParams from_sbr(double sbr, std::vector<double> signal_fractions,
                              std::vector<double> depths);

  std::size_t surfaces() const noexcept { return depths_.size(); }
  double background() const noexcept { return alphas_[0]; }
  /// alpha_k for k = 0..K (0 is the background weight).
  double alpha(std::size_t k) const noexcept { return alphas_[k]; }
  /// t_k for k = 1..K.
  double depth(std::size_t k) const noexcept { return depths_[k - 1]; }
  std::span<const double> alphas() const noexcept { return alphas_; }
  std::span<const double> depths() const noexcept { return depths_; }

  double signal_mass() const noexcept { return 1.0 - alphas_[0]; }
  /// Detection-point signal-to-background ratio; +inf when alpha_0 == 0.
  double sbr() const noexcept;

  /// Copy with every depth reduced into [0, T).
  ModelParams wrapped(std::size_t T) const;

 private:
  std::vector<double> alphas_;
  std::vector<double> depths_;
};

/// Circular Gaussian centred at bin 0: h[t] ~ exp(-d(t,0)^2 / (2 sigma^2)), d the circular distance.
ImpulseResponse gaussian_irf(double sigma, std::size_t T);

ImpulseResponse irf_from_samples(std::span<const double> values);

/// Circular Gaussian convolved with a one-sided exponential tail exp(-t/tau).
ImpulseResponse exp_modified_gaussian_irf(double sigma, double tau, std::size_t T);

/// One nonnegative real per line; blank lines and '#' comments are skipped.
ImpulseResponse load_irf(const std::string& path);

Complex irf_cf(const ImpulseResponse& irf, std::size_t j);

/// exp(i w_j t) for frequency index j with the signed-frequency convention: indices above T/2
/// act as negative frequencies and the Nyquist index (even T) contributes cos(pi t). This keeps
/// the model a real pmf for fractional t; for integer t it equals exp(i 2 pi j t / T).
Complex shift_phase(std::size_t j, double t, std::size_t T);
/// d/dt of shift_phase.
Complex shift_phase_derivative(std::size_t j, double t, std::size_t T);

/// Characteristic function of the mixture at omega_j = 2 pi j / T, j in [0, T).
/// The uniform background contributes alpha_0 at j == 0 and nothing elsewhere.
Complex model_cf(const ModelParams& params, const ImpulseResponse& irf, std::size_t j);

/// Signal part only (background dropped): sum_k alpha_k h_hat(j) exp(i w_j t_k).
Complex signal_cf(const ModelParams& params, const ImpulseResponse& irf, std::size_t j);

/// The IRF circularly shifted by t (exact for integer t, Fourier phase shift otherwise).
std::vector<double> shifted_irf(const ImpulseResponse& irf, double t);

/// d/dt of shifted_irf(irf, t), via the Fourier representation.
std::vector<double> shifted_irf_derivative(const ImpulseResponse& irf, double t);

/// Mixture pmf over {0..T-1}; tiny negative ringing from fractional shifts is clamped and the
/// result renormalized.
std::vector<double> model_pmf(const ModelParams& params, const ImpulseResponse& irf);

/// Real sequence x[t] = (1/T) sum_j spectrum[j] exp(-i 2 pi j t / T) (imaginary part dropped).
std::vector<double> inverse_cf(std::span<const Complex> spectrum);

/// Forward transform with the CF sign convention: out[j] = sum_t x[t] exp(+i 2 pi j t / T).
std::vector<Complex> forward_cf(std::span<const double> x);

double circular_distance(double a, double b, double T);

/// Signed difference a - b wrapped into [-T/2, T/2).
double circular_difference(double a, double b, double T);

double wrap_depth(double t, double T);

}  // namespace sketchlidar
