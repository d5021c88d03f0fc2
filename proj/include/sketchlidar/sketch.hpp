#pragma once

// Empirical characteristic-function sketches of photon time-stamps.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sketchlidar/model.hpp"

namespace sketchlidar {

enum class FrequencyScheme : std::uint8_t { Truncated = 0, Random = 1 };

/// m distinct orthogonal frequency indices j in [1, T-1]; omega_j = 2 pi j / T.
struct FrequencySet {
  std::uint32_t T = 0;
  std::vector<std::uint32_t> indices;
  FrequencyScheme scheme = FrequencyScheme::Truncated;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return indices.size(); }
  double omega(std::size_t k) const;
  /// Position of index j in `indices`, if present.
  std::optional<std::size_t> position(std::uint32_t j) const;

  bool operator==(const FrequencySet&) const = default;
};

/// Indices 1..m.
FrequencySet truncated_frequencies(std::uint32_t T, std::uint32_t m);

/// m indices drawn without replacement from {1..T-1} with probability proportional to
/// |h_hat(j)| (weighted reservoir keys u^(1/w)), returned in ascending order.
FrequencySet random_frequencies(std::uint32_t T, std::uint32_t m, const ImpulseResponse& irf, std::uint64_t seed);

/// Finalized sketch z_j = (1/n) sum_i exp(i omega_j x_i).
struct Sketch {
  FrequencySet freqs;
  std::vector<Complex> z;
  std::uint64_t n = 0;

  std::size_t m() const noexcept { return z.size(); }
  /// [Re z_1..Re z_m, Im z_1..Im z_m].
  Eigen::VectorXd real_view() const;
};

/// Running sums of exp(i omega_j x) over photons plus a 64-bit counter. Trig terms are evaluated
/// per photon after exact integer reduction of j*x mod T, so each term is correct to double
/// precision; sums stay accurate to ~1e-6 relative up to n ~ 1e9.
class SketchState {
 public:
  explicit SketchState(FrequencySet freqs);

  void add(std::uint32_t x);
  /// Adds `count` photons at bin x.
  void add(std::uint32_t x, double count);
  void add(std::span<const std::uint32_t> stamps);

  /// Componentwise sum; throws InvalidArgument if the frequency sets differ.
  SketchState& merge(const SketchState& other);

  /// Throws EmptySketchError when no photon has been added.
  Sketch finalize() const;

  const FrequencySet& freqs() const noexcept { return freqs_; }
  std::span<const Complex> sums() const noexcept { return sums_; }
  std::uint64_t count() const noexcept { return n_; }

 private:
  FrequencySet freqs_;
  std::vector<Complex> sums_;
  std::uint64_t n_ = 0;
  // exp(i 2 pi r / T) for r in [0, T), shared between copies.
  std::shared_ptr<const std::vector<Complex>> roots_;
};

SketchState merge(SketchState a, const SketchState& b);

/// z_j = sum_t hist[t] exp(i omega_j t) / sum_t hist[t].
Sketch sketch_from_histogram(std::span<const double> hist, const FrequencySet& freqs);
Sketch sketch_from_histogram(std::span<const std::uint32_t> hist, const FrequencySet& freqs);

/// Noise-free sketch z_theta: the signal CF at the sketch frequencies. n is carried as metadata.
Sketch expected_sketch(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs,
                       std::uint64_t n);

/// exp(i 2 pi r / T) with r = j*x mod T reduced exactly.
Complex unit_root(std::uint64_t j, std::uint64_t x, std::uint32_t T);

}  // namespace sketchlidar
