#pragma once

// Flat key=value experiment configuration. '#' starts a comment; list values are comma separated
// and may use logspace(a,b,k) (10^a..10^b, k points) or range(a,b,step) (inclusive).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sketchlidar/estimate.hpp"
#include "sketchlidar/model.hpp"
#include "sketchlidar/simulate.hpp"

namespace sketchlidar {

struct ExperimentConfig {
  std::string experiment = "contour";
  std::uint32_t T = 250;
  /// gaussian(sigma) | emg(sigma,tau) | file(path) | short | long (surrogates scaled with T).
  std::string irf = "gaussian(5)";
  double short_sigma_frac = 0.011;
  double long_tau_frac = 0.08;
  std::size_t K = 1;
  /// Fixed depths; empty means a uniformly random integer depth per trial.
  std::vector<double> depths;
  std::vector<double> fractions;
  std::vector<double> sbr{1.0};
  std::vector<double> n{100.0};
  std::vector<std::uint32_t> two_m{12};
  std::vector<std::string> schemes{"truncated"};
  std::vector<std::string> methods;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::vector<double> tolerances{10.0};
  std::string out_dir = "results";
  // Cube simulation.
  std::uint32_t rows = 1, cols = 1;
  double n_bar = 100.0;
  std::string count_mode = "poisson";
  // Estimator options.
  int grid = 16;
  int n_starts = 3;
  std::string weighting = "cue";
  bool offset_correction = true;
  /// Second (wide) pulse width for the pulse-width comparison, as a fraction of the coarse bin width.
  double wide_sigma_bins = 0.4;
  std::uint64_t frequency_seed = 7;

  /// Keys exactly as given in the file and overrides.
  std::map<std::string, std::string> raw;
};

/// Parses `text`, then applies `overrides` (same keys). Unknown keys and invalid values throw
/// InvalidArgument naming the key.
ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides = {});

/// Canonical key=value rendering (round-trips through parse_config).
std::string render_config(const ExperimentConfig& config);

ImpulseResponse make_irf(const std::string& spec, std::uint32_t T, double short_sigma_frac = 0.011,
                         double long_tau_frac = 0.08);
ImpulseResponse make_irf(const ExperimentConfig& config);

SmleOptions smle_options(const ExperimentConfig& config);
CountMode count_mode(const ExperimentConfig& config);

std::vector<double> parse_list(const std::string& key, const std::string& value);

const std::vector<std::string>& config_keys();

}  // namespace sketchlidar
