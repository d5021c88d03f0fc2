#include "sketchlidar/estimate.hpp"

#include <cmath>
#include <numbers>

#include "sketchlidar/errors.hpp"

namespace sketchlidar {

double circular_mean(const Sketch& sketch) {
  const auto pos = sketch.freqs.position(1);
  if (!pos) throw MissingFrequencyError("circular mean needs frequency index 1 in the sketch");
  const Complex z1 = sketch.z[*pos];
  if (std::abs(z1) < 1e-12) throw UndefinedPhaseError("|z_1| < 1e-12: phase undefined (pure background?)");
  const double T = sketch.freqs.T;
  return wrap_depth(T * std::arg(z1) / (2.0 * std::numbers::pi), T);
}

namespace {

std::size_t lowpass_argmax(std::span<const std::uint32_t> indices, std::span<const Complex> values, std::uint32_t T) {
  // Z_0 = 1 is a constant offset and does not move the argmax. A coefficient and its mirror
  // T - j contribute 2 Re(z_j e^{-i w_j x}); a mirror already present in the set is not doubled.
  std::vector<double> weight(indices.size(), 2.0);
  for (std::size_t a = 0; a < indices.size(); ++a) {
    const std::uint32_t j = indices[a];
    if (2 * j == T) weight[a] = 1.0;
    for (std::size_t b = 0; b < indices.size(); ++b)
      if (b != a && indices[b] == T - j) weight[a] = 1.0;
  }
  std::size_t best = 0;
  double best_val = -INFINITY;
  for (std::uint32_t x = 0; x < T; ++x) {
    double f = 1.0;
    for (std::size_t a = 0; a < indices.size(); ++a)
      f += weight[a] * (values[a] * std::conj(unit_root(indices[a], x, T))).real();
    if (f > best_val) {
      best_val = f;
      best = x;
    }
  }
  return best;
}

}  // namespace

double ifft_estimate(const Sketch& sketch, const ImpulseResponse* offset_irf) {
  if (sketch.freqs.scheme != FrequencyScheme::Truncated)
    throw InvalidArgument("iFFT estimate needs a truncated frequency set");
  const std::uint32_t T = sketch.freqs.T;
  double t = static_cast<double>(lowpass_argmax(sketch.freqs.indices, sketch.z, T));
  if (offset_irf) {
    if (offset_irf->size() != T) throw InvalidArgument("impulse response length differs from T");
    std::vector<Complex> h;
    for (auto j : sketch.freqs.indices) h.push_back(offset_irf->spectrum()[j]);
    const double offset = static_cast<double>(lowpass_argmax(sketch.freqs.indices, h, T));
    t = wrap_depth(t - offset, T);
  }
  return t;
}

double max_peak(std::span<const double> hist) {
  if (hist.empty()) throw InvalidArgument("empty histogram");
  std::size_t best = 0;
  for (std::size_t t = 1; t < hist.size(); ++t)
    if (hist[t] > hist[best]) best = t;
  return static_cast<double>(best);
}

}  // namespace sketchlidar
