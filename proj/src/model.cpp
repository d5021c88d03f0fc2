#include "sketchlidar/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "sketchlidar/errors.hpp"

namespace sketchlidar {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_integer(double t) { return std::isfinite(t) && std::floor(t) == t; }

}  // namespace

std::vector<Complex> forward_cf(std::span<const double> x) {
  // Eigen's forward FFT uses exp(-i...); the CF convention is its conjugate for real input.
  Eigen::FFT<double> fft;
  std::vector<double> in(x.begin(), x.end());
  std::vector<Complex> out;
  fft.fwd(out, in);
  out.resize(x.size());
  for (std::size_t j = 1; j < out.size(); ++j) {
    // Eigen fills the redundant half for real input only when not in half-spectrum mode;
    // rebuild it from symmetry to be safe.
    if (j > x.size() / 2) out[j] = std::conj(out[x.size() - j]);
  }
  for (auto& v : out) v = std::conj(v);
  return out;
}

std::vector<double> inverse_cf(std::span<const Complex> spectrum) {
  Eigen::FFT<double> fft;
  std::vector<Complex> in(spectrum.begin(), spectrum.end());
  std::vector<Complex> out;
  fft.fwd(out, in);
  const double scale = 1.0 / static_cast<double>(spectrum.size());
  std::vector<double> x(spectrum.size());
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = out[t].real() * scale;
  return x;
}

ImpulseResponse ImpulseResponse::from_samples(std::vector<double> values, double bin_width) {
  if (values.size() < 2) throw InvalidArgument("impulse response needs at least 2 bins");
  double total = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("impulse response has a negative or non-finite entry");
    total += v;
  }
  if (total <= 0.0) throw InvalidArgument("impulse response is all zero");
  for (double& v : values) v /= total;

  ImpulseResponse irf;
  irf.h_ = std::move(values);
  irf.h_hat_ = forward_cf(irf.h_);
  irf.h_hat_[0] = Complex(1.0, 0.0);
  irf.bin_width_ = bin_width;
  return irf;
}

std::size_t ImpulseResponse::peak() const noexcept {
  return static_cast<std::size_t>(std::max_element(h_.begin(), h_.end()) - h_.begin());
}

ModelParams::ModelParams(std::vector<double> alphas, std::vector<double> depths) {
  if (alphas.size() != depths.size() + 1) throw InvalidArgument("need K+1 weights for K depths");
  double total = 0.0;
  for (double a : alphas) {
    if (!std::isfinite(a) || a < -1e-12) throw InvalidArgument("mixture weights must be nonnegative");
    total += std::max(a, 0.0);
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("mixture weights must sum to 1");
  for (double& a : alphas) a = std::max(a, 0.0) / total;
  for (double t : depths)
    if (!std::isfinite(t)) throw InvalidArgument("depths must be finite");

  std::vector<std::size_t> order(depths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return depths[a] < depths[b]; });
  alphas_.resize(alphas.size());
  depths_.resize(depths.size());
  alphas_[0] = alphas[0];
  for (std::size_t k = 0; k < order.size(); ++k) {
    depths_[k] = depths[order[k]];
    alphas_[k + 1] = alphas[order[k] + 1];
  }
}

ModelParams ModelParams::from_sbr(double sbr, std::vector<double> signal_fractions, std::vector<double> depths) {
  if (!(sbr > 0.0)) throw InvalidArgument("SBR must be positive");
  if (signal_fractions.size() != depths.size()) throw InvalidArgument("one signal fraction per depth");
  double total = std::accumulate(signal_fractions.begin(), signal_fractions.end(), 0.0);
  if (!(total > 0.0)) throw InvalidArgument("signal fractions must have positive mass");
  const double background = std::isinf(sbr) ? 0.0 : 1.0 / (1.0 + sbr);
  std::vector<double> alphas{background};
  for (double f : signal_fractions) alphas.push_back((1.0 - background) * f / total);
  return ModelParams(std::move(alphas), std::move(depths));
}

double ModelParams::sbr() const noexcept {
  if (alphas_[0] <= 0.0) return std::numeric_limits<double>::infinity();
  return signal_mass() / alphas_[0];
}

ModelParams ModelParams::wrapped(std::size_t T) const {
  std::vector<double> d(depths_.begin(), depths_.end());
  for (double& t : d) t = wrap_depth(t, static_cast<double>(T));
  return ModelParams(std::vector<double>(alphas_.begin(), alphas_.end()), std::move(d));
}

ImpulseResponse gaussian_irf(double sigma, std::size_t T) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_irf: sigma must be positive");
  if (T < 2) throw InvalidArgument("gaussian_irf: T must be at least 2");
  std::vector<double> h(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double d = static_cast<double>(std::min(t, T - t));
    h[t] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return ImpulseResponse::from_samples(std::move(h));
}

ImpulseResponse irf_from_samples(std::span<const double> values) {
  return ImpulseResponse::from_samples(std::vector<double>(values.begin(), values.end()));
}

ImpulseResponse exp_modified_gaussian_irf(double sigma, double tau, std::size_t T) {
  if (!(tau > 0.0)) throw InvalidArgument("exp_modified_gaussian_irf: tau must be positive");
  const ImpulseResponse g = gaussian_irf(sigma, T);
  std::vector<double> tail(T);
  for (std::size_t t = 0; t < T; ++t) tail[t] = std::exp(-static_cast<double>(t) / tau);
  std::vector<double> h(T, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    const double gs = g[s];
    if (gs < 1e-300) continue;
    for (std::size_t u = 0; u < T; ++u) h[(s + u) % T] += gs * tail[u];
  }
  return ImpulseResponse::from_samples(std::move(h));
}

ImpulseResponse load_irf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open IRF file '" + path + "'");
  std::vector<double> values;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v;
    if (!(ss >> v)) throw ParseError(lineno, "IRF line is not a number");
    if (v < 0.0) throw ParseError(lineno, "IRF value is negative");
    values.push_back(v);
  }
  return ImpulseResponse::from_samples(std::move(values));
}

Complex irf_cf(const ImpulseResponse& irf, std::size_t j) {
  if (j >= irf.size()) throw InvalidArgument("irf_cf: frequency index out of range");
  return irf.spectrum()[j];
}

Complex shift_phase(std::size_t j, double t, std::size_t T) {
  if (j == 0) return {1.0, 0.0};
  if (is_integer(t)) {
    // Exact integer reduction keeps large t from losing phase accuracy.
    const auto ti = static_cast<long long>(std::floor(t));
    const long long Tl = static_cast<long long>(T);
    const long long r = ((static_cast<long long>(j) * (((ti % Tl) + Tl) % Tl)) % Tl);
    const double angle = kTwoPi * static_cast<double>(r) / static_cast<double>(T);
    return {std::cos(angle), std::sin(angle)};
  }
  if (2 * j == T) return {std::cos(std::numbers::pi * t), 0.0};
  const double s = (2 * j < T) ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(T);
  const double angle = kTwoPi * s * t / static_cast<double>(T);
  return {std::cos(angle), std::sin(angle)};
}

Complex shift_phase_derivative(std::size_t j, double t, std::size_t T) {
  if (j == 0) return {0.0, 0.0};
  if (2 * j == T) return {-std::numbers::pi * std::sin(std::numbers::pi * t), 0.0};
  const double s = (2 * j < T) ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(T);
  const double w = kTwoPi * s / static_cast<double>(T);
  return Complex(0.0, w) * shift_phase(j, t, T);
}

Complex signal_cf(const ModelParams& params, const ImpulseResponse& irf, std::size_t j) {
  const std::size_t T = irf.size();
  if (j >= T) throw InvalidArgument("frequency index out of range");
  Complex acc{0.0, 0.0};
  const Complex hj = irf.spectrum()[j];
  for (std::size_t k = 1; k <= params.surfaces(); ++k) acc += params.alpha(k) * hj * shift_phase(j, params.depth(k), T);
  return acc;
}

Complex model_cf(const ModelParams& params, const ImpulseResponse& irf, std::size_t j) {
  Complex v = signal_cf(params, irf, j);
  if (j == 0) v += params.background();
  return v;
}

std::vector<double> shifted_irf(const ImpulseResponse& irf, double t) {
  const std::size_t T = irf.size();
  if (is_integer(t)) {
    const auto Tl = static_cast<long long>(T);
    const long long s = ((static_cast<long long>(t) % Tl) + Tl) % Tl;
    std::vector<double> out(T);
    for (std::size_t x = 0; x < T; ++x) out[(x + static_cast<std::size_t>(s)) % T] = irf[x];
    return out;
  }
  std::vector<Complex> spec(T);
  for (std::size_t j = 0; j < T; ++j) spec[j] = irf.spectrum()[j] * shift_phase(j, t, T);
  return inverse_cf(spec);
}

std::vector<double> shifted_irf_derivative(const ImpulseResponse& irf, double t) {
  const std::size_t T = irf.size();
  std::vector<Complex> spec(T);
  for (std::size_t j = 0; j < T; ++j) spec[j] = irf.spectrum()[j] * shift_phase_derivative(j, t, T);
  return inverse_cf(spec);
}

std::vector<double> model_pmf(const ModelParams& params, const ImpulseResponse& irf) {
  const std::size_t T = irf.size();
  std::vector<double> p(T, params.background() / static_cast<double>(T));
  for (std::size_t k = 1; k <= params.surfaces(); ++k) {
    const auto s = shifted_irf(irf, params.depth(k));
    for (std::size_t x = 0; x < T; ++x) p[x] += params.alpha(k) * s[x];
  }
  double total = 0.0;
  for (double& v : p) {
    if (v < 0.0) v = 0.0;
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

double wrap_depth(double t, double T) {
  double r = std::fmod(t, T);
  if (r < 0.0) r += T;
  if (r >= T) r -= T;
  return r;
}

double circular_distance(double a, double b, double T) {
  const double d = std::abs(wrap_depth(a - b, T));
  return std::min(d, T - d);
}

double circular_difference(double a, double b, double T) {
  double d = wrap_depth(a - b, T);
  if (d >= T / 2.0) d -= T;
  return d;
}

}  // namespace sketchlidar
