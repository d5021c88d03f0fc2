#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sketchlidar/errors.hpp"
#include "sketchlidar/estimate.hpp"

namespace sketchlidar {

double CoarseHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

namespace {

CoarseHistogram layout(std::uint32_t T, std::uint32_t m_tilde) {
  if (T == 0 || m_tilde < 1 || m_tilde > T)
    throw InvalidArgument("number of coarse bins must lie in [1, T] = [1, " + std::to_string(T) + "]");
  CoarseHistogram c;
  c.T = T;
  c.m_tilde = m_tilde;
  c.delta = (T + m_tilde - 1) / m_tilde;
  c.counts.assign(m_tilde, 0.0);
  return c;
}

// Circular prefix sums of the IRF: mass of h over [a, a + len) modulo T.
class IrfMass {
 public:
  explicit IrfMass(const ImpulseResponse& irf) : T_(irf.size()), H_(irf.size() + 1, 0.0) {
    for (std::size_t s = 0; s < T_; ++s) H_[s + 1] = H_[s] + irf[s];
  }
  double operator()(std::size_t a, std::size_t len) const {
    if (len >= T_) return 1.0;
    if (a + len <= T_) return std::max(H_[a + len] - H_[a], 0.0);
    return std::max(H_[T_] - H_[a] + H_[a + len - T_], 0.0);
  }

 private:
  std::size_t T_;
  std::vector<double> H_;
};

// Cell probability of the IRF shifted by integer t.
double cell_mass(const CoarseHistogram& c, const IrfMass& mass, const ImpulseResponse& irf, std::uint32_t cell,
                 std::uint32_t t) {
  const std::uint32_t b = c.cell_begin(cell), e = c.cell_end(cell);
  const std::uint32_t a = (b + c.T - t % c.T) % c.T;
  if (e - b == 1) return irf[a];
  return mass(a, e - b);
}

// argmax_t sum_c w_c log max(q_c(t), floor) over integer t; smallest t on ties. Current depths
// stay candidates, so the score at the returned t is never below the score at any of them.
// With `candidates` the search runs over those shifts only.
std::uint32_t binned_argmax(const CoarseHistogram& c, std::span<const double> w, const ImpulseResponse& irf,
                            double floor, const std::vector<std::uint32_t>* candidates = nullptr) {
  const IrfMass mass(irf);
  const double log_floor = std::log(floor);
  std::vector<std::uint32_t> cells;
  for (std::uint32_t k = 0; k < c.m_tilde; ++k)
    if (w[k] > 0.0) cells.push_back(k);
  std::uint32_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  const std::size_t count = candidates ? candidates->size() : c.T;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t t = candidates ? (*candidates)[i] : static_cast<std::uint32_t>(i);
    double s = 0.0;
    for (auto k : cells) {
      const double q = cell_mass(c, mass, irf, k, t);
      s += w[k] * (q > floor ? std::log(q) : log_floor);
    }
    if (s > best_score) {
      best_score = s;
      best = t;
    }
  }
  return best;
}

void check_irf(const CoarseHistogram& c, const ImpulseResponse& irf) {
  if (irf.size() != c.T) throw InvalidArgument("impulse response length differs from T");
  if (!(c.total() > 0.0)) throw EmptySketchError("histogram holds no photons");
}

}  // namespace

CoarseHistogram coarse_bin(const PhotonStream& stream, std::uint32_t m_tilde) {
  CoarseHistogram c = layout(stream.T, m_tilde);
  for (auto x : stream.stamps) {
    if (x >= stream.T) throw InvalidArgument("time-stamp outside [0, T)");
    c.counts[c.cell(x)] += 1.0;
  }
  return c;
}

CoarseHistogram coarse_bin(std::span<const double> hist, std::uint32_t m_tilde) {
  CoarseHistogram c = layout(static_cast<std::uint32_t>(hist.size()), m_tilde);
  for (std::uint32_t x = 0; x < hist.size(); ++x) c.counts[c.cell(x)] += hist[x];
  return c;
}

std::vector<double> coarse_probabilities(std::span<const double> pmf, const CoarseHistogram& layout) {
  if (pmf.size() != layout.T) throw InvalidArgument("pmf length differs from T");
  std::vector<double> P(layout.m_tilde, 0.0);
  for (std::uint32_t x = 0; x < layout.T; ++x) P[layout.cell(x)] += pmf[x];
  return P;
}

double matched_filter(std::span<const double> hist, const ImpulseResponse& irf) {
  const CoarseHistogram c = coarse_bin(hist, static_cast<std::uint32_t>(hist.size()));
  check_irf(c, irf);
  return binned_argmax(c, c.counts, irf, 1e-12);
}

double coarse_matched_filter(const CoarseHistogram& hist, const ImpulseResponse& irf, CoarseReadout readout) {
  check_irf(hist, irf);
  if (readout == CoarseReadout::SubBin) return binned_argmax(hist, hist.counts, irf, 1e-12);
  std::vector<std::uint32_t> centres;
  const std::uint32_t peak = static_cast<std::uint32_t>(irf.peak());
  for (std::uint32_t k = 0; k < hist.m_tilde; ++k) {
    const std::uint32_t b = hist.cell_begin(k), e = hist.cell_end(k);
    if (e > b) centres.push_back((b + (e - 1 - b) / 2 + hist.T - peak) % hist.T);
  }
  std::sort(centres.begin(), centres.end());
  return binned_argmax(hist, hist.counts, irf, 1e-12, &centres);
}

double coarse_loglik(const CoarseHistogram& hist, const ModelParams& params, const ImpulseResponse& irf) {
  const auto P = coarse_probabilities(model_pmf(params, irf), hist);
  double ll = 0.0;
  for (std::uint32_t c = 0; c < hist.m_tilde; ++c)
    if (hist.counts[c] > 0.0) ll += hist.counts[c] * std::log(P[c]);
  return ll;
}

namespace {

// Smallest r with at least 95% of the IRF mass within circular distance r of its peak.
std::uint32_t irf_half_width(const ImpulseResponse& irf) {
  const std::size_t T = irf.size(), p = irf.peak();
  double acc = irf[p];
  std::uint32_t r = 0;
  while (acc < 0.95 && 2 * r + 1 < T) {
    ++r;
    acc += irf[(p + r) % T];
    if (2 * r < T) acc += irf[(p + T - r) % T];
  }
  return r;
}

}  // namespace

FitResult em_fit(const CoarseHistogram& hist, const ImpulseResponse& irf, std::size_t K, const EmOptions& options) {
  if (K < 1) throw InvalidArgument("EM needs K >= 1");
  check_irf(hist, irf);
  const std::uint32_t T = hist.T;
  const double n = hist.total();
  const IrfMass mass(irf);

  // Initial depths: matched-filter argmax, then the strongest linear correlation of the counts left
  // after masking the cells within the IRF half-width of earlier peaks.
  std::vector<std::uint32_t> t(K);
  t[0] = binned_argmax(hist, hist.counts, irf, 1e-12);
  const double w = irf_half_width(irf);
  const std::uint32_t peak = static_cast<std::uint32_t>(irf.peak());
  std::vector<double> residual = hist.counts;
  for (std::size_t k = 1; k < K; ++k) {
    for (std::uint32_t c = 0; c < hist.m_tilde; ++c) {
      const double centre = 0.5 * (hist.cell_begin(c) + hist.cell_end(c) - 1);
      if (circular_distance(centre, (t[k - 1] + peak) % T, T) <= w) residual[c] = 0.0;
    }
    double best = -1.0;
    std::uint32_t arg = (t[k - 1] + T / 2) % T;
    for (std::uint32_t s = 0; s < T; ++s) {
      bool clear = true;
      for (std::size_t q = 0; q < k; ++q)
        if (circular_distance(s, t[q], T) <= w) clear = false;
      if (!clear) continue;
      double score = 0.0;
      for (std::uint32_t c = 0; c < hist.m_tilde; ++c)
        if (residual[c] > 0.0) score += residual[c] * cell_mass(hist, mass, irf, c, s);
      if (score > best) {
        best = score;
        arg = s;
      }
    }
    t[k] = arg;
  }
  std::vector<double> alpha(K + 1, (1.0 - options.background_init) / static_cast<double>(K));
  alpha[0] = options.background_init;

  std::vector<std::uint32_t> cells;
  std::vector<double> bg(hist.m_tilde);
  for (std::uint32_t c = 0; c < hist.m_tilde; ++c) {
    bg[c] = static_cast<double>(hist.cell_end(c) - hist.cell_begin(c)) / T;
    if (hist.counts[c] > 0.0) cells.push_back(c);
  }

  auto to_params = [&]() {
    std::vector<double> d(t.begin(), t.end());
    return ModelParams(alpha, std::move(d));
  };

  FitResult r;
  r.init = to_params();
  r.init_method = "matched-filter";
  std::vector<std::vector<double>> q(K, std::vector<double>(hist.m_tilde, 0.0));
  auto refresh = [&](std::size_t k) {
    for (auto c : cells) q[k][c] = cell_mass(hist, mass, irf, c, t[k]);
  };
  for (std::size_t k = 0; k < K; ++k) refresh(k);
  auto loglik = [&]() {
    double ll = 0.0;
    for (auto c : cells) {
      double p = alpha[0] * bg[c];
      for (std::size_t k = 0; k < K; ++k) p += alpha[k + 1] * q[k][c];
      ll += hist.counts[c] * std::log(p);
    }
    return ll;
  };

  double ll = loglik();
  r.loglik_history.push_back(ll);
  std::vector<std::vector<double>> weights(K + 1, std::vector<double>(hist.m_tilde, 0.0));
  for (r.iterations = 0; r.iterations < options.max_iter;) {
    for (auto c : cells) {
      double p = alpha[0] * bg[c];
      for (std::size_t k = 0; k < K; ++k) p += alpha[k + 1] * q[k][c];
      weights[0][c] = hist.counts[c] * alpha[0] * bg[c] / p;
      for (std::size_t k = 0; k < K; ++k) weights[k + 1][c] = hist.counts[c] * alpha[k + 1] * q[k][c] / p;
    }
    for (std::size_t k = 0; k <= K; ++k) {
      double mass_k = 0.0;
      for (auto c : cells) mass_k += weights[k][c];
      alpha[k] = mass_k / n;
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (alpha[k + 1] <= 0.0) continue;
      t[k] = binned_argmax(hist, weights[k + 1], irf, std::numeric_limits<double>::min());
      refresh(k);
    }
    ++r.iterations;
    const double next = loglik();
    r.loglik_history.push_back(next);
    const bool done = std::abs(next - ll) <= options.tol * (1.0 + std::abs(ll));
    ll = next;
    if (done) {
      r.converged = true;
      break;
    }
  }
  r.params = to_params();
  r.loss = -ll;
  return r;
}

FitResult em_fit(std::span<const double> hist, const ImpulseResponse& irf, std::size_t K, const EmOptions& options) {
  return em_fit(coarse_bin(hist, static_cast<std::uint32_t>(hist.size())), irf, K, options);
}

}  // namespace sketchlidar
