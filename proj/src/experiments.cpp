#include "sketchlidar/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "sketchlidar/analysis.hpp"
#include "sketchlidar/errors.hpp"
#include "sketchlidar/io.hpp"
#include "sketchlidar/parallel.hpp"
#include "sketchlidar/rng.hpp"

namespace sketchlidar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> signal_split(const ExperimentConfig& c) {
  if (!c.fractions.empty()) return c.fractions;
  return std::vector<double>(c.K, 1.0 / static_cast<double>(c.K));
}

ModelParams trial_params(const ExperimentConfig& c, double sbr, std::vector<double> depths) {
  return ModelParams::from_sbr(sbr, signal_split(c), std::move(depths));
}

std::vector<double> draw_depths(const ExperimentConfig& c, Rng& rng) {
  if (!c.depths.empty()) return c.depths;
  std::vector<double> d;
  for (std::size_t k = 0; k < c.K; ++k) d.push_back(std::floor(rng.uniform() * c.T));
  return d;
}

std::vector<double> draw_histogram(const ModelParams& params, const ImpulseResponse& irf, std::size_t n, Rng& rng) {
  const PhotonSampler sampler(params, irf);
  std::vector<double> hist(irf.size(), 0.0);
  for (std::size_t p = 0; p < n; ++p) hist[sampler.draw(rng)] += 1.0;
  return hist;
}

std::size_t photons(double n) { return static_cast<std::size_t>(std::llround(n)); }

double corrected_circular_mean(const Sketch& sketch, const ImpulseResponse& irf) {
  const double T = sketch.freqs.T;
  return wrap_depth(circular_mean(sketch) - T * std::arg(irf.spectrum()[1]) / (2.0 * std::numbers::pi), T);
}

void require_single_surface(const ExperimentConfig& c) {
  if (c.K != 1) throw InvalidArgument("this experiment supports K = 1 only");
}

MethodScore score(const std::string& method, const std::vector<double>& errors, const std::vector<char>& failed,
                  const std::vector<double>& tolerances) {
  MethodScore s;
  s.method = method;
  double acc = 0.0;
  for (double e : errors) acc += e * e;
  s.rmse = errors.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(errors.size()));
  for (double tol : tolerances) s.detection.push_back(detection_rate(errors, tol));
  s.failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  return s;
}

// Runs `trials` trials of grid point `point` in parallel; fn(rng, trial) returns one error per method.
template <class Fn>
std::vector<std::vector<double>> run_trials(const ExperimentConfig& c, std::uint64_t point, std::size_t methods,
                                            std::vector<std::vector<char>>& failed, Fn&& fn) {
  std::vector<std::vector<double>> errors(methods, std::vector<double>(c.trials, 0.0));
  failed.assign(methods, std::vector<char>(c.trials, 0));
  ParallelError error;
#pragma omp parallel for schedule(dynamic, 4)
  for (long long r = 0; r < static_cast<long long>(c.trials); ++r)
    error.run([&] {
      Rng rng(derive_seed(c.seed, point, static_cast<std::uint64_t>(r)));
      fn(rng, static_cast<std::size_t>(r), errors, failed);
    });
  error.rethrow();
  return errors;
}

// Error of one method on one trial; failures count as the largest circular error T/2.
void record(const std::string& method, std::span<const double> hist, const ImpulseResponse& irf, std::uint32_t two_m,
            const SmleOptions& o, bool offset, double truth, std::size_t slot, std::size_t r,
            std::vector<std::vector<double>>& errors, std::vector<std::vector<char>>& failed) {
  const double T = irf.size();
  try {
    errors[slot][r] = circular_distance(estimate_depth(method, hist, irf, two_m, o, offset), truth, T);
  } catch (const std::runtime_error&) {
    errors[slot][r] = T / 2.0;
    failed[slot][r] = 1;
  }
}

double depth_variance_from(const Eigen::MatrixXd& fim) {
  try {
    crb_rmse(fim);
  } catch (const NonIdentifiableError&) {
    return kInf;
  }
  const Eigen::MatrixXd inv = fim.inverse();
  const Eigen::Index K = fim.rows() / 2;
  double v = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) v += inv(K + k, K + k);
  return v;
}

}  // namespace

double crb_depth_rmse(const Eigen::MatrixXd& fim) { return std::sqrt(depth_variance_from(fim)); }

double compression_ratio(double two_m, double T, double n) { return std::max(two_m / T, two_m / n); }

double estimate_depth(const std::string& method, std::span<const double> hist, const ImpulseResponse& irf,
                      std::uint32_t two_m, const SmleOptions& options, bool offset_correction) {
  const auto T = static_cast<std::uint32_t>(irf.size());
  const std::uint32_t m = std::max<std::uint32_t>(two_m / 2, 1);
  if (method == "smle") {
    const Sketch s = sketch_from_histogram(hist, truncated_frequencies(T, m));
    if (m < 2) return corrected_circular_mean(s, irf);
    return smle_fit(s, irf, 1, options).params.depth(1);
  }
  if (method == "circular-mean") return corrected_circular_mean(sketch_from_histogram(hist, truncated_frequencies(T, 1)), irf);
  if (method == "ifft")
    return ifft_estimate(sketch_from_histogram(hist, truncated_frequencies(T, m)), offset_correction ? &irf : nullptr);
  if (method == "coarse+mf") return coarse_matched_filter(coarse_bin(hist, std::min(two_m, T)), irf);
  if (method == "coarse+subbin")
    return coarse_matched_filter(coarse_bin(hist, std::min(two_m, T)), irf, CoarseReadout::SubBin);
  if (method == "coarse+em") return em_fit(coarse_bin(hist, std::min(two_m, T)), irf, 1).params.depth(1);
  if (method == "matched-filter") return matched_filter(hist, irf);
  if (method == "em") return em_fit(hist, irf, 1).params.depth(1);
  if (method == "max-peak") return wrap_depth(max_peak(hist) - static_cast<double>(irf.peak()), T);
  throw InvalidArgument("unknown method '" + method + "'");
}

// ---- CLT --------------------------------------------------------------------------------------

std::vector<CltRow> run_clt(const ExperimentConfig& c, std::vector<std::vector<double>>* errors_out) {
  require_single_surface(c);
  if (c.depths.empty()) throw InvalidArgument("the CLT experiment needs a fixed depth");
  const ImpulseResponse irf = make_irf(c);
  const FrequencySet f1 = truncated_frequencies(c.T, 1);
  std::vector<CltRow> rows;
  if (errors_out) errors_out->clear();
  const double sbr = c.sbr.front();
  const ModelParams params = trial_params(c, sbr, c.depths);
  const PhotonSampler sampler(params, irf);
  for (std::size_t p = 0; p < c.n.size(); ++p) {
    const std::size_t n = photons(c.n[p]);
    std::vector<double> err(c.trials, 0.0);
    std::vector<char> undefined(c.trials, 0);
    ParallelError error;
#pragma omp parallel for schedule(dynamic, 8)
    for (long long r = 0; r < static_cast<long long>(c.trials); ++r)
      error.run([&] {
        Rng rng(derive_seed(c.seed, p, static_cast<std::uint64_t>(r)));
        SketchState state(f1);
        for (std::size_t i = 0; i < n; ++i) state.add(sampler.draw(rng));
        try {
          err[r] = circular_difference(corrected_circular_mean(state.finalize(), irf), c.depths[0], c.T);
        } catch (const UndefinedPhaseError&) {
          undefined[r] = 1;
          err[r] = c.T / 2.0;
        }
      });
    error.rethrow();
    CltRow row;
    row.n = static_cast<double>(n);
    row.trials = c.trials;
    row.mean_error = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
    row.std_error = sample_std(err);
    row.predicted_std = circular_mean_std(params, irf, static_cast<double>(n));
    std::vector<double> abs_err(err);
    for (double& e : abs_err) e = std::abs(e);
    row.within_tol = detection_rate(abs_err, c.tolerances.front());
    row.rmse = rmse(err, std::vector<double>(err.size(), 0.0), c.T, false);
    row.undefined = static_cast<std::size_t>(std::count(undefined.begin(), undefined.end(), 1));
    rows.push_back(row);
    if (errors_out) errors_out->push_back(std::move(err));
  }
  return rows;
}

void write_clt_csv(const std::string& path, const std::vector<CltRow>& rows) {
  std::ostringstream out;
  out << "n,trials,mean_error,std_error,predicted_std,within_tol,rmse,undefined\n";
  for (const auto& r : rows)
    out << num(r.n) << ',' << r.trials << ',' << num(r.mean_error) << ',' << num(r.std_error) << ','
        << num(r.predicted_std) << ',' << num(r.within_tol) << ',' << num(r.rmse) << ',' << r.undefined << '\n';
  write_file_atomic(path, out.str());
}

void write_clt_errors_csv(const std::string& path, const std::vector<CltRow>& rows,
                          const std::vector<std::vector<double>>& errors) {
  std::ostringstream out;
  out << "n,trial,error\n";
  for (std::size_t p = 0; p < rows.size() && p < errors.size(); ++p)
    for (std::size_t r = 0; r < errors[p].size(); ++r) out << num(rows[p].n) << ',' << r << ',' << num(errors[p][r]) << '\n';
  write_file_atomic(path, out.str());
}

// ---- REP --------------------------------------------------------------------------------------

std::vector<RepRow> run_rep(const ExperimentConfig& c) {
  if (c.depths.empty()) throw InvalidArgument("the REP experiment needs fixed depths");
  const ImpulseResponse irf = make_irf(c);
  std::vector<RepRow> rows;
  for (const auto& scheme : c.schemes)
    for (auto two_m : c.two_m)
      for (double sbr : c.sbr) {
        const ModelParams params = trial_params(c, sbr, c.depths);
        RepRow row;
        row.scheme = scheme;
        row.two_m = two_m;
        row.sbr = sbr;
        row.irf_tag = c.irf;
        try {
          EfficiencyReport e;
          if (scheme == "coarse") {
            e = rep_coarse(params, irf, std::min(two_m, c.T));
          } else {
            const std::uint32_t m = two_m / 2;
            if (m < 1 || m > c.T - 1) continue;
            const FrequencySet f = scheme == "truncated"
                                       ? truncated_frequencies(c.T, m)
                                       : random_frequencies(c.T, m, irf, derive_seed(c.frequency_seed, two_m));
            e = rep(params, irf, f);
          }
          row.rmse_full = e.rmse_full;
          row.rmse_sketch = e.rmse_sketch;
          row.rep = e.rep;
        } catch (const NonIdentifiableError&) {
          row.rmse_full = crb_rmse(fim_full(params, irf, 1.0));
          row.rmse_sketch = kInf;
          row.rep = kInf;
        }
        rows.push_back(row);
      }
  return rows;
}

void write_rep_csv(const std::string& path, const std::vector<RepRow>& rows) {
  std::ostringstream out;
  out << "scheme,2m,SBR,irf_tag,rmse_full,rmse_sketch,rep\n";
  for (const auto& r : rows)
    out << r.scheme << ',' << r.two_m << ',' << num(r.sbr) << ',' << r.irf_tag << ',' << num(r.rmse_full) << ','
        << num(r.rmse_sketch) << ',' << num(r.rep) << '\n';
  write_file_atomic(path, out.str());
}

// ---- contours ---------------------------------------------------------------------------------

std::vector<ContourRow> run_contour(const ExperimentConfig& c) {
  require_single_surface(c);
  const ImpulseResponse irf = make_irf(c);
  const SmleOptions o = smle_options(c);
  const std::vector<std::string> methods =
      c.methods.empty() ? std::vector<std::string>{"smle", "ifft", "coarse+mf", "matched-filter", "max-peak"} : c.methods;
  std::vector<ContourRow> rows;
  for (std::size_t si = 0; si < c.sbr.size(); ++si)
    for (std::size_t ni = 0; ni < c.n.size(); ++ni)
      for (auto two_m : c.two_m) {
        const std::size_t n = photons(c.n[ni]);
        std::vector<std::vector<char>> failed;
        const auto errors = run_trials(
            c, si * c.n.size() + ni, methods.size(), failed,
            [&](Rng& rng, std::size_t r, std::vector<std::vector<double>>& err, std::vector<std::vector<char>>& fail) {
              const auto depths = draw_depths(c, rng);
              const auto hist = draw_histogram(trial_params(c, c.sbr[si], depths), irf, n, rng);
              for (std::size_t k = 0; k < methods.size(); ++k)
                record(methods[k], hist, irf, two_m, o, c.offset_correction, depths[0], k, r, err, fail);
            });

        const ModelParams ref = trial_params(c, c.sbr[si], {std::floor(c.T / 2.0)});
        double crb_full = kInf, crb_sketch = kInf;
        try {
          crb_full = crb_depth_rmse(fim_full(ref, irf, static_cast<double>(n)));
        } catch (const std::runtime_error&) {
        }
        if (two_m >= 2) {
          try {
            crb_sketch = crb_depth_rmse(fim_sketch(ref, irf, truncated_frequencies(c.T, two_m / 2), static_cast<double>(n)));
          } catch (const std::runtime_error&) {
          }
        }
        for (std::size_t k = 0; k < methods.size(); ++k) {
          ContourRow row;
          row.sbr = c.sbr[si];
          row.two_m = two_m;
          row.n = static_cast<double>(n);
          row.score = score(methods[k], errors[k], failed[k], c.tolerances);
          row.crb_full = crb_full;
          row.crb_sketch = crb_sketch;
          row.compression = compression_ratio(two_m, c.T, static_cast<double>(n));
          rows.push_back(std::move(row));
        }
      }
  return rows;
}

void write_contour_csv(const std::string& path, const ExperimentConfig& c, const std::vector<ContourRow>& rows) {
  std::ostringstream out;
  out << "sbr,2m,n,method,rmse";
  for (double t : c.tolerances) out << ",det_" << num(t);
  out << ",failures,crb_full,crb_sketch,compression\n";
  for (const auto& r : rows) {
    out << num(r.sbr) << ',' << r.two_m << ',' << num(r.n) << ',' << r.score.method << ',' << num(r.score.rmse);
    for (double d : r.score.detection) out << ',' << num(d);
    out << ',' << r.score.failures << ',' << num(r.crb_full) << ',' << num(r.crb_sketch) << ',' << num(r.compression)
        << '\n';
  }
  write_file_atomic(path, out.str());
}

// ---- ratio heatmaps ---------------------------------------------------------------------------

namespace {

std::vector<RatioRow> run_ratio(const ExperimentConfig& c, const std::vector<std::string>& references, bool starved) {
  require_single_surface(c);
  const ImpulseResponse irf = make_irf(c);
  const SmleOptions o = smle_options(c);
  std::vector<std::string> methods{"smle"};
  methods.insert(methods.end(), references.begin(), references.end());
  std::vector<RatioRow> rows;
  for (std::size_t si = 0; si < c.sbr.size(); ++si)
    for (std::size_t ni = 0; ni < c.n.size(); ++ni) {
      const std::size_t n = photons(c.n[ni]);
      const std::uint32_t two_m = starved ? static_cast<std::uint32_t>(2 * ((n + 1) / 2)) : c.two_m.front();
      std::vector<std::vector<char>> failed;
      const auto errors = run_trials(
          c, si * c.n.size() + ni, methods.size(), failed,
          [&](Rng& rng, std::size_t r, std::vector<std::vector<double>>& err, std::vector<std::vector<char>>& fail) {
            const auto depths = draw_depths(c, rng);
            const auto hist = draw_histogram(trial_params(c, c.sbr[si], depths), irf, n, rng);
            for (std::size_t k = 0; k < methods.size(); ++k)
              record(methods[k], hist, irf, two_m, o, c.offset_correction, depths[0], k, r, err, fail);
          });
      const double sketch_rmse = score("smle", errors[0], failed[0], c.tolerances).rmse;
      for (std::size_t k = 1; k < methods.size(); ++k) {
        RatioRow row;
        row.sbr = c.sbr[si];
        row.n = static_cast<double>(n);
        row.two_m = starved ? static_cast<std::uint32_t>(n) : two_m;
        row.reference = methods[k];
        row.rmse_sketch = sketch_rmse;
        row.rmse_reference = score(methods[k], errors[k], failed[k], c.tolerances).rmse;
        row.ratio = row.rmse_reference > 0 ? row.rmse_sketch / row.rmse_reference : (row.rmse_sketch > 0 ? kInf : 1.0);
        rows.push_back(row);
      }
    }
  return rows;
}

}  // namespace

std::vector<RatioRow> run_starved(const ExperimentConfig& c) {
  return run_ratio(c, c.methods.empty() ? std::vector<std::string>{"matched-filter", "max-peak"} : c.methods, true);
}

std::vector<RatioRow> run_ifft_compare(const ExperimentConfig& c) {
  return run_ratio(c, c.methods.empty() ? std::vector<std::string>{"ifft"} : c.methods, false);
}

void write_ratio_csv(const std::string& path, const std::vector<RatioRow>& rows) {
  std::ostringstream out;
  out << "sbr,n,2m,reference,rmse_sketch,rmse_reference,R\n";
  for (const auto& r : rows)
    out << num(r.sbr) << ',' << num(r.n) << ',' << r.two_m << ',' << r.reference << ',' << num(r.rmse_sketch) << ','
        << num(r.rmse_reference) << ',' << num(r.ratio) << '\n';
  write_file_atomic(path, out.str());
}

// ---- pulse width ------------------------------------------------------------------------------

namespace {

// Standard deviation of the IRF about its mean, measured on the circle from bin 0.
double rms_width(const ImpulseResponse& irf) {
  const auto T = static_cast<std::uint32_t>(irf.size());
  double mean = 0.0, var = 0.0;
  for (std::uint32_t t = 0; t < T; ++t) mean += irf[t] * circular_difference(t, 0, T);
  for (std::uint32_t t = 0; t < T; ++t) var += irf[t] * std::pow(circular_difference(t, 0, T) - mean, 2);
  return std::sqrt(var);
}

}  // namespace

std::vector<PulseRow> run_pulse_width(const ExperimentConfig& c) {
  require_single_surface(c);
  const ImpulseResponse narrow = make_irf(c);
  const std::uint32_t two_m = c.two_m.front();
  const std::uint32_t delta = (c.T + two_m - 1) / two_m;
  const double wide_sigma = c.wide_sigma_bins * delta;
  const ImpulseResponse wide = gaussian_irf(wide_sigma, c.T);
  const SmleOptions o = smle_options(c);
  const std::size_t n = photons(c.n.front());

  std::vector<PulseRow> rows;
  for (std::size_t si = 0; si < c.sbr.size(); ++si) {
    std::vector<std::vector<char>> failed;
    const auto errors = run_trials(
        c, si, 3, failed,
        [&](Rng& rng, std::size_t r, std::vector<std::vector<double>>& err, std::vector<std::vector<char>>& fail) {
          const auto depths = draw_depths(c, rng);
          const auto hist_narrow = draw_histogram(trial_params(c, c.sbr[si], depths), narrow, n, rng);
          const auto hist_wide = draw_histogram(trial_params(c, c.sbr[si], depths), wide, n, rng);
          record("smle", hist_narrow, narrow, two_m, o, false, depths[0], 0, r, err, fail);
          record("coarse+mf", hist_narrow, narrow, two_m, o, false, depths[0], 1, r, err, fail);
          record("coarse+subbin", hist_wide, wide, two_m, o, false, depths[0], 2, r, err, fail);
        });

    // Coarse bounds depend on where the depth falls within a cell: average the variance over one cell.
    auto coarse_crb = [&](const ImpulseResponse& irf) {
      double v = 0.0;
      for (std::uint32_t t = 0; t < delta; ++t)
        v += depth_variance_from(fim_coarse(trial_params(c, c.sbr[si], {double(t)}), irf, two_m, double(n)));
      return std::sqrt(v / delta);
    };
    double smle_crb = kInf;
    try {
      smle_crb = crb_depth_rmse(
          fim_sketch(trial_params(c, c.sbr[si], {std::floor(c.T / 2.0)}), narrow, truncated_frequencies(c.T, two_m / 2), double(n)));
    } catch (const std::runtime_error&) {
    }
    const double sigma_narrow = rms_width(narrow);
    const std::string names[3] = {"smle", "coarse-narrow", "coarse-wide"};
    const double sigmas[3] = {sigma_narrow, sigma_narrow, wide_sigma};
    const double crbs[3] = {smle_crb, coarse_crb(narrow), coarse_crb(wide)};
    for (int k = 0; k < 3; ++k) {
      PulseRow row;
      row.sbr = c.sbr[si];
      row.method = names[k];
      row.sigma = sigmas[k];
      row.two_m = two_m;
      row.rmse = score(names[k], errors[k], failed[k], c.tolerances).rmse;
      row.crb = crbs[k];
      rows.push_back(row);
    }
  }
  return rows;
}

void write_pulse_csv(const std::string& path, const std::vector<PulseRow>& rows) {
  std::ostringstream out;
  out << "sbr,method,sigma,2m,rmse,crb\n";
  for (const auto& r : rows)
    out << num(r.sbr) << ',' << r.method << ',' << num(r.sigma) << ',' << r.two_m << ',' << num(r.rmse) << ','
        << num(r.crb) << '\n';
  write_file_atomic(path, out.str());
}

// ---- dispatch ---------------------------------------------------------------------------------

std::vector<std::string> run_experiment(const ExperimentConfig& c) {
  std::filesystem::create_directories(c.out_dir);
  const auto path = [&](const std::string& name) { return (std::filesystem::path(c.out_dir) / name).string(); };
  std::vector<std::string> written;
  if (c.experiment == "clt") {
    std::vector<std::vector<double>> errors;
    const auto rows = run_clt(c, &errors);
    written = {path("clt.csv"), path("clt_errors.csv")};
    write_clt_csv(written[0], rows);
    write_clt_errors_csv(written[1], rows, errors);
  } else if (c.experiment == "rep") {
    written = {path("rep.csv")};
    write_rep_csv(written[0], run_rep(c));
  } else if (c.experiment == "contour") {
    written = {path("contour.csv")};
    write_contour_csv(written[0], c, run_contour(c));
  } else if (c.experiment == "starved") {
    written = {path("starved.csv")};
    write_ratio_csv(written[0], run_starved(c));
  } else if (c.experiment == "ifft-compare") {
    written = {path("ifft_compare.csv")};
    write_ratio_csv(written[0], run_ifft_compare(c));
  } else if (c.experiment == "pulse-width") {
    written = {path("pulse_width.csv")};
    write_pulse_csv(written[0], run_pulse_width(c));
  } else {
    throw InvalidArgument("unknown experiment '" + c.experiment + "'");
  }
  written.push_back(path(c.experiment + ".cfg"));
  write_file_atomic(written.back(), render_config(c));
  return written;
}

}  // namespace sketchlidar
