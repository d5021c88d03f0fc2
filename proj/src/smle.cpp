#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sketchlidar/errors.hpp"
#include "sketchlidar/estimate.hpp"

namespace sketchlidar {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Mixture parameters in optimizer order (depths unsorted, possibly outside [0, T)).
struct Theta {
  std::vector<double> alpha;  // K+1, alpha[0] background
  std::vector<double> t;      // K

  static Theta from(const ModelParams& p) {
    return {std::vector<double>(p.alphas().begin(), p.alphas().end()),
            std::vector<double>(p.depths().begin(), p.depths().end())};
  }
  std::size_t K() const { return t.size(); }
};

// Unique CF indices needed by the covariance of a frequency set: the indices themselves and their
// pairwise sums and differences modulo T.
struct CovLayout {
  std::uint32_t T = 0;
  std::size_t m = 0;
  std::vector<std::uint32_t> needed;
  std::vector<std::size_t> single, diff, sum;  // positions into `needed`

  explicit CovLayout(const FrequencySet& f) : T(f.T), m(f.size()) {
    std::vector<long> slot(T, -1);
    auto pos = [&](std::uint64_t l) {
      l %= T;
      if (slot[l] < 0) {
        slot[l] = static_cast<long>(needed.size());
        needed.push_back(static_cast<std::uint32_t>(l));
      }
      return static_cast<std::size_t>(slot[l]);
    };
    for (auto a : f.indices) single.push_back(pos(a));
    diff.resize(m * m);
    sum.resize(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        diff[i * m + j] = pos(std::uint64_t(f.indices[i]) + T - f.indices[j]);
        sum[i * m + j] = pos(std::uint64_t(f.indices[i]) + f.indices[j]);
      }
  }
};

std::vector<Complex> psi_values(const CovLayout& L, const ImpulseResponse& irf, const Theta& th) {
  std::vector<Complex> P(L.needed.size());
  for (std::size_t q = 0; q < P.size(); ++q) {
    const std::uint32_t l = L.needed[q];
    Complex acc{0.0, 0.0};
    for (std::size_t k = 0; k < th.K(); ++k) acc += th.alpha[k + 1] * shift_phase(l, th.t[k], L.T);
    P[q] = irf.spectrum()[l] * acc + (l == 0 ? Complex(th.alpha[0], 0.0) : Complex(0.0, 0.0));
  }
  return P;
}

// d Psi / d(alpha_1..alpha_K, t_1..t_K) with alpha_0 = 1 - sum alpha_k.
std::vector<std::vector<Complex>> psi_derivatives(const CovLayout& L, const ImpulseResponse& irf, const Theta& th) {
  const std::size_t K = th.K();
  std::vector<std::vector<Complex>> dP(2 * K, std::vector<Complex>(L.needed.size()));
  for (std::size_t q = 0; q < L.needed.size(); ++q) {
    const std::uint32_t l = L.needed[q];
    const Complex h = irf.spectrum()[l];
    for (std::size_t k = 0; k < K; ++k) {
      dP[k][q] = h * shift_phase(l, th.t[k], L.T) - (l == 0 ? 1.0 : 0.0);
      dP[K + k][q] = th.alpha[k + 1] * h * shift_phase_derivative(l, th.t[k], L.T);
    }
  }
  return dP;
}

Eigen::MatrixXd cov_from(const CovLayout& L, const std::vector<Complex>& P) {
  const std::size_t m = L.m;
  Eigen::MatrixXd S(2 * m, 2 * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const Complex pd = P[L.diff[i * m + j]], ps = P[L.sum[i * m + j]];
      const Complex pa = P[L.single[i]], pb = P[L.single[j]];
      S(i, j) = 0.5 * (pd.real() + ps.real()) - pa.real() * pb.real();
      S(m + i, m + j) = 0.5 * (pd.real() - ps.real()) - pa.imag() * pb.imag();
      const double cs = 0.5 * (ps.imag() - pd.imag()) - pa.real() * pb.imag();
      S(i, m + j) = cs;
      S(m + j, i) = cs;
    }
  return S;
}

Eigen::MatrixXd dcov_from(const CovLayout& L, const std::vector<Complex>& P, const std::vector<Complex>& dP) {
  const std::size_t m = L.m;
  Eigen::MatrixXd S(2 * m, 2 * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const Complex dd = dP[L.diff[i * m + j]], ds = dP[L.sum[i * m + j]];
      const Complex pa = P[L.single[i]], pb = P[L.single[j]];
      const Complex da = dP[L.single[i]], db = dP[L.single[j]];
      S(i, j) = 0.5 * (dd.real() + ds.real()) - da.real() * pb.real() - pa.real() * db.real();
      S(m + i, m + j) = 0.5 * (dd.real() - ds.real()) - da.imag() * pb.imag() - pa.imag() * db.imag();
      const double cs = 0.5 * (ds.imag() - dd.imag()) - da.real() * pb.imag() - pa.real() * db.imag();
      S(i, m + j) = cs;
      S(m + j, i) = cs;
    }
  return S;
}

Eigen::VectorXd stacked(const CovLayout& L, const std::vector<Complex>& P) {
  Eigen::VectorXd v(2 * L.m);
  for (std::size_t i = 0; i < L.m; ++i) {
    v[i] = P[L.single[i]].real();
    v[L.m + i] = P[L.single[i]].imag();
  }
  return v;
}

double ridge(const Eigen::MatrixXd& S, const SmleOptions& o, bool* trace_active) {
  const double scale = S.trace() / static_cast<double>(S.rows());
  if (trace_active) *trace_active = scale > o.trace_floor;
  return o.reg_eps * std::max(scale, o.trace_floor);
}

class Objective {
 public:
  Objective(const Sketch& sketch, const ImpulseResponse& irf, const SmleOptions& options)
      : irf_(irf), opt_(options), L_(sketch.freqs), zn_(sketch.real_view()), n_(static_cast<double>(sketch.n)) {
    if (irf.size() != sketch.freqs.T) throw InvalidArgument("impulse response length differs from T");
  }

  double n() const { return n_; }

  void freeze(const Theta& th) {
    const auto P = psi_values(L_, irf_, th);
    Eigen::MatrixXd S = cov_from(L_, P);
    S.diagonal().array() += ridge(S, opt_, nullptr);
    frozen_ = Eigen::LLT<Eigen::MatrixXd>(S);
    if (frozen_->info() != Eigen::Success) throw NonFiniteLossError("frozen covariance is not positive definite");
    frozen_logdet_ = 2.0 * frozen_->matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  double eval(const Theta& th, Weighting w, Eigen::VectorXd* grad) const {
    const std::size_t K = th.K();
    const double half_m = 0.5 * static_cast<double>(L_.m);
    const auto P = psi_values(L_, irf_, th);
    const Eigen::VectorXd d = zn_ - stacked(L_, P);
    std::vector<std::vector<Complex>> dP;
    if (grad) {
      dP = psi_derivatives(L_, irf_, th);
      grad->setZero(2 * K);
    }

    double loss;
    if (w == Weighting::Identity) {
      loss = n_ * d.squaredNorm();
      if (grad)
        for (std::size_t p = 0; p < 2 * K; ++p) (*grad)[p] = -2.0 * n_ * d.dot(stacked(L_, dP[p]));
    } else if (w == Weighting::Fixed || w == Weighting::TwoStep) {
      if (!frozen_) throw InvalidArgument("fixed weighting needs a frozen covariance");
      const Eigen::VectorXd a = frozen_->solve(d);
      loss = half_m * frozen_logdet_ + n_ * d.dot(a);
      if (grad)
        for (std::size_t p = 0; p < 2 * K; ++p) (*grad)[p] = -2.0 * n_ * a.dot(stacked(L_, dP[p]));
    } else {
      Eigen::MatrixXd S = cov_from(L_, P);
      bool trace_active = false;
      S.diagonal().array() += ridge(S, opt_, &trace_active);
      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success) throw NonFiniteLossError("covariance is not positive definite");
      const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const Eigen::VectorXd a = llt.solve(d);
      loss = half_m * logdet + n_ * d.dot(a);
      if (grad) {
        const Eigen::MatrixXd Sinv = llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
        for (std::size_t p = 0; p < 2 * K; ++p) {
          Eigen::MatrixXd dS = dcov_from(L_, P, dP[p]);
          if (trace_active) dS.diagonal().array() += opt_.reg_eps * dS.trace() / static_cast<double>(S.rows());
          (*grad)[p] = half_m * Sinv.cwiseProduct(dS).sum() - 2.0 * n_ * a.dot(stacked(L_, dP[p])) -
                       n_ * a.dot(dS * a);
        }
      }
    }
    if (!std::isfinite(loss) || (grad && !grad->allFinite())) throw NonFiniteLossError("SMLE loss is not finite");
    return loss;
  }

 private:
  const ImpulseResponse& irf_;
  SmleOptions opt_;
  CovLayout L_;
  Eigen::VectorXd zn_;
  double n_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> frozen_;
  double frozen_logdet_ = 0.0;
};

// ---- reparameterization: x = (u_1..u_K, phi_1..phi_K), alpha = softmax(0, u), t = T phi / 2 pi

Theta theta_of(const Eigen::VectorXd& x, std::size_t K, double T) {
  Theta th;
  th.alpha.resize(K + 1);
  double mx = 0.0;
  for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, x[k]);
  double total = std::exp(-mx);
  th.alpha[0] = total;
  for (std::size_t k = 0; k < K; ++k) {
    th.alpha[k + 1] = std::exp(x[k] - mx);
    total += th.alpha[k + 1];
  }
  for (double& a : th.alpha) a /= total;
  th.t.resize(K);
  for (std::size_t k = 0; k < K; ++k) th.t[k] = wrap_depth(T * x[K + k] / kTwoPi, T);
  return th;
}

Eigen::VectorXd x_of(const Theta& th, double T) {
  const std::size_t K = th.K();
  std::vector<double> a(th.alpha);
  for (double& v : a) v = std::max(v, 1e-6);
  Eigen::VectorXd x(2 * K);
  for (std::size_t k = 0; k < K; ++k) {
    x[k] = std::log(a[k + 1] / a[0]);
    x[K + k] = kTwoPi * wrap_depth(th.t[k], T) / T;
  }
  return x;
}

Eigen::VectorXd chain(const Eigen::VectorXd& g_free, const Theta& th, double T) {
  const std::size_t K = th.K();
  Eigen::VectorXd g(2 * K);
  for (std::size_t q = 0; q < K; ++q) {
    double s = 0.0;
    for (std::size_t l = 0; l < K; ++l)
      s += g_free[l] * th.alpha[l + 1] * ((l == q ? 1.0 : 0.0) - th.alpha[q + 1]);
    g[q] = s;
    g[K + q] = g_free[K + q] * T / kTwoPi;
  }
  return g;
}

struct Descent {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  double gnorm = std::numeric_limits<double>::infinity();
};

Descent descend(const Objective& obj, Weighting w, const Theta& start, std::size_t K, double T,
                const SmleOptions& o) {
  const double nscale = std::max(obj.n(), 1.0);
  auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const Theta th = theta_of(x, K, T);
    Eigen::VectorXd gf;
    try {
      const double f = obj.eval(th, w, &gf);
      g = chain(gf, th, T);
      return f;
    } catch (const NonFiniteLossError&) {
      g.setZero(2 * K);
      return std::numeric_limits<double>::infinity();
    }
  };

  Descent r;
  r.x = x_of(start, T);
  Eigen::VectorXd g;
  r.f = fg(r.x, g);
  if (!std::isfinite(r.f)) return r;

  const Eigen::Index P = r.x.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(P, P);
  bool fresh = true;
  constexpr double kMaxStep = 1.0;
  for (r.iterations = 0; r.iterations < o.max_iter; ++r.iterations) {
    r.gnorm = g.norm() / nscale;
    if (r.gnorm < o.grad_tol) {
      r.converged = true;
      break;
    }
    Eigen::VectorXd p = -H * g;
    if (p.dot(g) >= 0.0) {
      H.setIdentity();
      fresh = true;
      p = -g;
    }
    if (p.norm() > kMaxStep) p *= kMaxStep / p.norm();

    double step = 1.0;
    Eigen::VectorXd xn, gn;
    double fn = 0.0;
    bool accepted = false;
    const double slope = g.dot(p);
    for (int ls = 0; ls < 60; ++ls) {
      xn = r.x + step * p;
      fn = fg(xn, gn);
      if (std::isfinite(fn) && fn <= r.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        H.setIdentity();
        fresh = true;
        continue;
      }
      break;
    }
    const Eigen::VectorXd s = xn - r.x;
    const Eigen::VectorXd y = gn - g;
    const double df = r.f - fn;
    r.x = xn;
    r.f = fn;
    g = gn;
    if (std::abs(df) < o.loss_tol * (1.0 + std::abs(r.f)) && s.norm() < o.step_tol) {
      r.gnorm = g.norm() / nscale;
      r.converged = true;
      ++r.iterations;
      break;
    }
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        H *= sy / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(P, P);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
  }
  r.gnorm = g.norm() / nscale;
  if (r.gnorm < o.grad_tol) r.converged = true;
  return r;
}

ModelParams to_params(const Theta& th, double T) {
  std::vector<double> t(th.t);
  for (double& v : t) v = wrap_depth(v, T);
  return ModelParams(th.alpha, std::move(t));
}

void for_each_subset(int G, std::size_t K, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(K);
  for (std::size_t k = 0; k < K; ++k) idx[k] = static_cast<int>(k);
  if (static_cast<int>(K) > G) return;
  while (true) {
    fn(idx);
    int k = static_cast<int>(K) - 1;
    while (k >= 0 && idx[k] == G - static_cast<int>(K) + k) --k;
    if (k < 0) return;
    ++idx[k];
    for (std::size_t q = k + 1; q < K; ++q) idx[q] = idx[q - 1] + 1;
  }
}

// Depth grid for the starts: at least `minimum` points and four per period of the highest
// sketched frequency, limited so the number of K-subsets stays near kMaxSubsets.
int start_grid_size(const FrequencySet& freqs, std::size_t K, int minimum) {
  constexpr double kMaxSubsets = 5000;
  std::uint32_t top = 0;
  for (std::uint32_t j : freqs.indices) top = std::max(top, std::min(j, freqs.T - j));
  int G = std::max({minimum, static_cast<int>(K), static_cast<int>(4 * top)});
  G = std::min<int>(G, static_cast<int>(freqs.T));
  auto subsets = [K](int g) {
    double c = 1;
    for (std::size_t k = 0; k < K; ++k) c = c * (g - static_cast<double>(k)) / static_cast<double>(k + 1);
    return c;
  };
  while (K > 1 && G > std::max(minimum, static_cast<int>(K)) && subsets(G) > kMaxSubsets) --G;
  return G;
}

}  // namespace

Eigen::MatrixXd covariance(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs) {
  if (freqs.indices.empty()) throw InvalidArgument("empty frequency set");
  if (irf.size() != freqs.T) throw InvalidArgument("impulse response length differs from T");
  const CovLayout L(freqs);
  return cov_from(L, psi_values(L, irf, Theta::from(params)));
}

Eigen::MatrixXd regularized_covariance(const ModelParams& params, const ImpulseResponse& irf,
                                       const FrequencySet& freqs, const SmleOptions& options) {
  Eigen::MatrixXd S = covariance(params, irf, freqs);
  S.diagonal().array() += ridge(S, options, nullptr);
  return S;
}

Eigen::MatrixXd sketch_jacobian(const ModelParams& params, const ImpulseResponse& irf, const FrequencySet& freqs) {
  if (irf.size() != freqs.T) throw InvalidArgument("impulse response length differs from T");
  const CovLayout L(freqs);
  const auto dP = psi_derivatives(L, irf, Theta::from(params));
  Eigen::MatrixXd J(2 * L.m, dP.size());
  for (std::size_t p = 0; p < dP.size(); ++p) J.col(static_cast<Eigen::Index>(p)) = stacked(L, dP[p]);
  return J;
}

namespace {

Objective prepared(const ModelParams& theta, const Sketch& sketch, const ImpulseResponse& irf,
                   const SmleOptions& options) {
  Objective obj(sketch, irf, options);
  if (options.weighting == Weighting::Fixed || options.weighting == Weighting::TwoStep)
    obj.freeze(Theta::from(options.fixed_theta.value_or(theta)));
  return obj;
}

}  // namespace

double smle_loss(const ModelParams& theta, const Sketch& sketch, const ImpulseResponse& irf,
                 const SmleOptions& options) {
  return prepared(theta, sketch, irf, options).eval(Theta::from(theta), options.weighting, nullptr);
}

Eigen::VectorXd smle_gradient(const ModelParams& theta, const Sketch& sketch, const ImpulseResponse& irf,
                              const SmleOptions& options) {
  Eigen::VectorXd g;
  prepared(theta, sketch, irf, options).eval(Theta::from(theta), options.weighting, &g);
  return g;
}

FitResult smle_fit(const Sketch& sketch, const ImpulseResponse& irf, std::size_t K, const SmleOptions& options) {
  if (K < 1) throw InvalidArgument("SMLE needs K >= 1");
  if (sketch.m() < K + 1)
    throw InvalidArgument("SMLE with K=" + std::to_string(K) + " needs at least " + std::to_string(K + 1) +
                          " frequencies (2m >= 2K+1)");
  if (sketch.n == 0) throw EmptySketchError("sketch holds no photons");
  if (irf.size() != sketch.freqs.T) throw InvalidArgument("impulse response length differs from T");
  const double T = sketch.freqs.T;

  Objective obj(sketch, irf, options);
  const Weighting rank_w = options.weighting == Weighting::CUE ? Weighting::CUE : Weighting::Identity;

  std::vector<std::pair<Theta, std::string>> starts;
  bool degenerate = false;
  if (options.init) {
    starts.emplace_back(Theta::from(*options.init), "user");
  } else {
    int grid_starts = std::max(options.n_starts, 1);
    if (K == 1) {
      const auto pos = sketch.freqs.position(1);
      if (pos && std::abs(sketch.z[*pos]) >= 1e-12) {
        const Complex z1 = sketch.z[*pos];
        const Complex h1 = irf.spectrum()[1];
        Theta th;
        const double a1 = std::clamp(std::abs(z1) / std::max(std::abs(h1), 1e-300), 0.05, 0.95);
        th.alpha = {1.0 - a1, a1};
        th.t = {wrap_depth(T * (std::arg(z1) - std::arg(h1)) / kTwoPi, T)};
        starts.emplace_back(th, "circular-mean");
        --grid_starts;
      } else {
        degenerate = true;
      }
    }
    if (grid_starts > 0) {
      std::vector<std::pair<double, Theta>> scored;
      const int G = start_grid_size(sketch.freqs, K, options.grid);
      const std::vector<double> grid_alpha =
          starts.empty() ? std::vector<double>{} : starts.front().first.alpha;
      for_each_subset(G, K, [&](const std::vector<int>& idx) {
        Theta th;
        th.alpha.assign(K + 1, 0.8 / static_cast<double>(K));
        th.alpha[0] = 0.2;
        if (!grid_alpha.empty()) th.alpha = grid_alpha;
        for (int g : idx) th.t.push_back(T * g / G);
        double f;
        try {
          f = obj.eval(th, rank_w, nullptr);
        } catch (const NonFiniteLossError&) {
          f = std::numeric_limits<double>::infinity();
        }
        scored.emplace_back(f, std::move(th));
      });
      std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (int s = 0; s < grid_starts && s < static_cast<int>(scored.size()); ++s)
        starts.emplace_back(scored[s].second, degenerate ? "grid (undefined circular mean)" : "grid");
    }
  }

  FitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  bool have = false;
  for (const auto& [start, method] : starts) {
    Descent d;
    Objective local = obj;
    switch (options.weighting) {
      case Weighting::CUE:
      case Weighting::Identity:
        d = descend(local, options.weighting, start, K, T, options);
        break;
      case Weighting::Fixed:
        local.freeze(options.fixed_theta ? Theta::from(*options.fixed_theta) : start);
        d = descend(local, Weighting::Fixed, start, K, T, options);
        break;
      case Weighting::TwoStep: {
        const Descent first = descend(local, Weighting::Identity, start, K, T, options);
        const Theta mid = theta_of(first.x, K, T);
        local.freeze(mid);
        d = descend(local, Weighting::Fixed, mid, K, T, options);
        d.iterations += first.iterations;
        break;
      }
    }
    if (!have || d.f < best.loss) {
      have = true;
      const Theta th = theta_of(d.x, K, T);
      best.params = to_params(th, T);
      best.loss = d.f;
      best.iterations = d.iterations;
      best.converged = d.converged && std::isfinite(d.f);
      best.init = to_params(start, T);
      best.init_method = method;
      best.gradient_norm = d.gnorm;
    }
  }
  best.degenerate_init = degenerate;
  return best;
}

}  // namespace sketchlidar
