#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sketchlidar/model.hpp"
#include "sketchlidar/rng.hpp"

namespace sketchlidar {

struct PhotonStream {
  std::uint32_t T = 0;
  std::vector<std::uint32_t> stamps;

  std::size_t size() const noexcept { return stamps.size(); }
};

/// Photon counts n[i][j][t], row-major with t fastest.
class LidarCube {
 public:
  LidarCube() = default;
  LidarCube(std::uint32_t rows, std::uint32_t cols, std::uint32_t T);

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  std::uint32_t bins() const noexcept { return T_; }

  std::span<std::uint32_t> pixel(std::uint32_t i, std::uint32_t j);
  std::span<const std::uint32_t> pixel(std::uint32_t i, std::uint32_t j) const;
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }
  std::span<std::uint32_t> counts() noexcept { return counts_; }

  std::uint64_t pixel_total(std::uint32_t i, std::uint32_t j) const;
  /// Mean over pixels of the per-pixel photon total.
  double mean_photons() const;

  bool operator==(const LidarCube&) const = default;

 private:
  std::uint32_t rows_ = 0, cols_ = 0, T_ = 0;
  std::vector<std::uint32_t> counts_;
};

/// Inverse-CDF sampler over a fixed pmf; reusable across draws and trials.
class PhotonSampler {
 public:
  PhotonSampler(const ModelParams& params, const ImpulseResponse& irf);
  explicit PhotonSampler(std::span<const double> pmf);

  std::uint32_t draw(Rng& rng) const;
  PhotonStream sample(std::size_t n, std::uint64_t seed) const;
  void sample_into(std::size_t n, Rng& rng, std::vector<std::uint32_t>& out) const;
  std::uint32_t bins() const noexcept { return static_cast<std::uint32_t>(cdf_.size()); }

 private:
  std::vector<double> cdf_;
};

/// n i.i.d. draws from model_pmf(params, irf); generator seeded as Rng(seed).
PhotonStream sample_photons(const ModelParams& params, const ImpulseResponse& irf, std::size_t n,
                            std::uint64_t seed);

enum class CountMode { Poisson, Fixed };

/// Per-pixel scene description, row-major.
struct Scene {
  std::uint32_t rows = 1, cols = 1;
  std::vector<ModelParams> pixels;

  const ModelParams& at(std::uint32_t i, std::uint32_t j) const { return pixels[std::size_t(i) * cols + j]; }
  static Scene uniform(std::uint32_t rows, std::uint32_t cols, const ModelParams& params);
};

/// Pixel (i,j) uses seed derive_seed(seed, i, j): its count is Poisson(n_bar) (or exactly
/// round(n_bar) in Fixed mode) and its stamps come from the same generator. Pixels are simulated
/// in parallel; the result does not depend on the thread count.
LidarCube simulate_cube(const Scene& scene, const ImpulseResponse& irf, double n_bar, std::uint64_t seed,
                        CountMode mode = CountMode::Poisson);

/// Single-threaded reference for simulate_cube.
LidarCube simulate_cube_serial(const Scene& scene, const ImpulseResponse& irf, double n_bar, std::uint64_t seed,
                               CountMode mode = CountMode::Poisson);

std::vector<double> histogram(const PhotonStream& stream);
std::vector<double> histogram(std::span<const std::uint32_t> counts);

}  // namespace sketchlidar

