#include "sketchlidar/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sketchlidar/errors.hpp"
#include "sketchlidar/rng.hpp"

namespace sketchlidar {

Complex unit_root(std::uint64_t j, std::uint64_t x, std::uint32_t T) {
  const std::uint64_t r = (j % T) * (x % T) % T;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(T);
  return {std::cos(angle), std::sin(angle)};
}

double FrequencySet::omega(std::size_t k) const {
  return 2.0 * std::numbers::pi * static_cast<double>(indices.at(k)) / static_cast<double>(T);
}

std::optional<std::size_t> FrequencySet::position(std::uint32_t j) const {
  const auto it = std::find(indices.begin(), indices.end(), j);
  if (it == indices.end()) return std::nullopt;
  return static_cast<std::size_t>(it - indices.begin());
}

FrequencySet truncated_frequencies(std::uint32_t T, std::uint32_t m) {
  if (T < 2 || m < 1 || m > T - 1)
    throw InvalidArgument("number of frequencies m must lie in [1, T-1] = [1, " + std::to_string(T ? T - 1 : 0) +
                          "]");
  FrequencySet f;
  f.T = T;
  f.indices.resize(m);
  std::iota(f.indices.begin(), f.indices.end(), 1u);
  return f;
}

FrequencySet random_frequencies(std::uint32_t T, std::uint32_t m, const ImpulseResponse& irf, std::uint64_t seed) {
  if (T < 2 || m < 1 || m > T - 1)
    throw InvalidArgument("number of frequencies m must lie in [1, T-1] = [1, " + std::to_string(T ? T - 1 : 0) +
                          "]");
  if (irf.size() != T) throw InvalidArgument("impulse response length differs from T");
  Rng rng(seed);
  std::vector<std::pair<double, std::uint32_t>> keys;
  keys.reserve(T - 1);
  for (std::uint32_t j = 1; j < T; ++j) {
    const double w = std::abs(irf.spectrum()[j]);
    const double u = rng.uniform();
    if (w > 0.0) keys.emplace_back(std::log(std::max(u, 1e-300)) / w, j);
  }
  if (keys.size() < m) throw InvalidArgument("too few frequencies with nonzero IRF weight");
  std::partial_sort(keys.begin(), keys.begin() + m, keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  FrequencySet f;
  f.T = T;
  f.scheme = FrequencyScheme::Random;
  f.seed = seed;
  for (std::uint32_t k = 0; k < m; ++k) f.indices.push_back(keys[k].second);
  std::sort(f.indices.begin(), f.indices.end());
  return f;
}

Eigen::VectorXd Sketch::real_view() const {
  const auto m = static_cast<Eigen::Index>(z.size());
  Eigen::VectorXd v(2 * m);
  for (Eigen::Index k = 0; k < m; ++k) {
    v[k] = z[k].real();
    v[m + k] = z[k].imag();
  }
  return v;
}

SketchState::SketchState(FrequencySet freqs) : freqs_(std::move(freqs)), sums_(freqs_.size(), Complex(0.0, 0.0)) {
  if (freqs_.T < 2 || freqs_.indices.empty()) throw InvalidArgument("sketch needs a nonempty frequency set");
  auto roots = std::make_shared<std::vector<Complex>>(freqs_.T);
  for (std::uint32_t r = 0; r < freqs_.T; ++r) (*roots)[r] = unit_root(1, r, freqs_.T);
  roots_ = std::move(roots);
}

void SketchState::add(std::uint32_t x) {
  const std::uint64_t T = freqs_.T;
  if (x >= T) throw InvalidArgument("time-stamp " + std::to_string(x) + " outside [0, T)");
  const Complex* roots = roots_->data();
  for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k] += roots[freqs_.indices[k] * std::uint64_t(x) % T];
  ++n_;
}

void SketchState::add(std::uint32_t x, double count) {
  const std::uint64_t T = freqs_.T;
  if (x >= T) throw InvalidArgument("time-stamp " + std::to_string(x) + " outside [0, T)");
  if (count == 0.0) return;
  const Complex* roots = roots_->data();
  for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k] += count * roots[freqs_.indices[k] * std::uint64_t(x) % T];
  n_ += static_cast<std::uint64_t>(std::llround(count));
}

void SketchState::add(std::span<const std::uint32_t> stamps) {
  for (auto x : stamps) add(x);
}

SketchState& SketchState::merge(const SketchState& other) {
  if (!(freqs_ == other.freqs_)) throw InvalidArgument("cannot merge sketches over different frequency sets");
  for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k] += other.sums_[k];
  n_ += other.n_;
  return *this;
}

SketchState merge(SketchState a, const SketchState& b) {
  a.merge(b);
  return a;
}

Sketch SketchState::finalize() const {
  if (n_ == 0) throw EmptySketchError("cannot finalize a sketch with no photons");
  Sketch s;
  s.freqs = freqs_;
  s.n = n_;
  s.z.resize(sums_.size());
  const double inv = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < sums_.size(); ++k) s.z[k] = sums_[k] * inv;
  return s;
}

namespace {

template <class T>
Sketch sketch_from_counts(std::span<const T> hist, const FrequencySet& freqs) {
  if (hist.size() != freqs.T) throw InvalidArgument("histogram length differs from T");
  double total = 0.0;
  std::vector<Complex> acc(freqs.size(), Complex(0.0, 0.0));
  for (std::size_t t = 0; t < hist.size(); ++t) {
    const double c = static_cast<double>(hist[t]);
    if (c < 0.0) throw InvalidArgument("negative histogram count");
    if (c == 0.0) continue;
    total += c;
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += c * unit_root(freqs.indices[k], t, freqs.T);
  }
  if (total < 1.0) throw EmptySketchError("histogram holds no photons");
  Sketch s;
  s.freqs = freqs;
  s.n = static_cast<std::uint64_t>(std::llround(total));
  s.z.resize(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) s.z[k] = acc[k] / total;
  return s;
}

}  // namespace

Sketch sketch_from_histogram(std::span<const double> hist, const FrequencySet& freqs) {
  return sketch_from_counts(hist, freqs);
}

Sketch sketch_from_histogram(std::span<const std::uint32_t> hist, const FrequencySet& freqs) {
  return sketch_from_counts(hist, freqs);
}

Sketch expected_sketch(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs,
                       std::uint64_t n) {
  if (irf.size() != freqs.T) throw InvalidArgument("impulse response length differs from T");
  Sketch s;
  s.freqs = freqs;
  s.n = n;
  for (auto j : freqs.indices) s.z.push_back(signal_cf(params, irf, j));
  return s;
}

}  // namespace sketchlidar
