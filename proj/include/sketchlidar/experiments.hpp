#pragma once

// Monte-Carlo and Fisher-information experiment runners. Trials run in parallel; trial r of grid
// point p draws its depth and photons from Rng(derive_seed(seed, p, r)), so every table is
// independent of the thread count.

#include <string>
#include <vector>

#include "sketchlidar/config.hpp"

namespace sketchlidar {

// ---- circular-mean CLT --------------------------------------------------------------------------

struct CltRow {
  double n = 0;
  std::size_t trials = 0;
  double mean_error = 0, std_error = 0, predicted_std = 0, within_tol = 0, rmse = 0;
  std::size_t undefined = 0;
};

/// Signed errors per photon count are returned through `errors` when non-null.
std::vector<CltRow> run_clt(const ExperimentConfig& config, std::vector<std::vector<double>>* errors = nullptr);
void write_clt_csv(const std::string& path, const std::vector<CltRow>& rows);
void write_clt_errors_csv(const std::string& path, const std::vector<CltRow>& rows,
                          const std::vector<std::vector<double>>& errors);

// ---- REP curves -------------------------------------------------------------------------------

struct RepRow {
  std::string scheme;
  std::uint32_t two_m = 0;
  double sbr = 0;
  std::string irf_tag;
  double rmse_full = 0, rmse_sketch = 0, rep = 0;
};

/// One row per (scheme, 2m, SBR). Coarse binning uses 2m cells. Non-identifiable points get
/// rmse_sketch = rep = inf.
std::vector<RepRow> run_rep(const ExperimentConfig& config);
void write_rep_csv(const std::string& path, const std::vector<RepRow>& rows);

// ---- depth-estimation contours ----------------------------------------------------------------

struct MethodScore {
  std::string method;
  double rmse = 0;
  std::vector<double> detection;  // one per tolerance
  std::size_t failures = 0;
};

struct ContourRow {
  double sbr = 0;
  std::uint32_t two_m = 0;
  double n = 0;
  MethodScore score;
  double crb_full = 0, crb_sketch = 0;
  double compression = 0;
};

/// Methods: smle, circular-mean, ifft, coarse+mf, coarse+subbin, coarse+em, matched-filter, em, max-peak.
std::vector<ContourRow> run_contour(const ExperimentConfig& config);
void write_contour_csv(const std::string& path, const ExperimentConfig& config, const std::vector<ContourRow>& rows);

// ---- RMSE-ratio heatmaps ----------------------------------------------------------------------

struct RatioRow {
  double sbr = 0;
  double n = 0;
  std::uint32_t two_m = 0;
  std::string reference;
  double rmse_sketch = 0, rmse_reference = 0, ratio = 0;
};

/// Photon-starved regime: 2m = n (m = ceil(n/2)); references matched-filter and max-peak.
std::vector<RatioRow> run_starved(const ExperimentConfig& config);
/// SMLE with the configured 2m against the low-pass (iFFT) estimate.
std::vector<RatioRow> run_ifft_compare(const ExperimentConfig& config);
void write_ratio_csv(const std::string& path, const std::vector<RatioRow>& rows);

// ---- pulse-width comparison -------------------------------------------------------------------

struct PulseRow {
  double sbr = 0;
  std::string method;
  double sigma = 0;
  std::uint32_t two_m = 0;
  double rmse = 0;
  double crb = 0;
};

/// SMLE on the configured (narrow) IRF against coarse binning with the narrow IRF and with a wide
/// Gaussian of width wide_sigma_bins coarse bins read out at sub-cell resolution.
std::vector<PulseRow> run_pulse_width(const ExperimentConfig& config);
void write_pulse_csv(const std::string& path, const std::vector<PulseRow>& rows);

/// Depth-only Cramer-Rao RMSE: sqrt of the depth block of the inverse FIM (inf if singular).
double crb_depth_rmse(const Eigen::MatrixXd& fim);

/// max{2m/T, 2m/n}.
double compression_ratio(double two_m, double T, double n);

/// Depth estimate for a single-surface pixel by the named method, in the IRF's phase convention.
double estimate_depth(const std::string& method, std::span<const double> hist, const ImpulseResponse& irf,
                      std::uint32_t two_m, const SmleOptions& options, bool offset_correction);

/// Writes the experiment's CSV(s) and the resolved config into config.out_dir; returns the written paths.
std::vector<std::string> run_experiment(const ExperimentConfig& config);

}  // namespace sketchlidar
