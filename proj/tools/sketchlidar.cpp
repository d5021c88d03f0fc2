// sketchlidar: simulate photon data, sketch it, fit depths, and run the experiment sweeps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sketchlidar/analysis.hpp"
#include "sketchlidar/config.hpp"
#include "sketchlidar/errors.hpp"
#include "sketchlidar/estimate.hpp"
#include "sketchlidar/experiments.hpp"
#include "sketchlidar/io.hpp"
#include "sketchlidar/kernels.hpp"
#include "sketchlidar/parallel.hpp"
#include "sketchlidar/rng.hpp"

using namespace sketchlidar;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<std::string> out_dir;
};

ExperimentConfig build_config(const Globals& g, std::map<std::string, std::string> ov, const std::string& experiment = "") {
  if (g.seed) ov["seed"] = std::to_string(*g.seed);
  if (g.out_dir) ov["out_dir"] = *g.out_dir;
  if (!experiment.empty()) ov["experiment"] = experiment;
  return g.config_path.empty() ? parse_config("", ov) : load_config(g.config_path, ov);
}

// Every config key except those set by global flags or the subcommand becomes --key (and
// --key-with-dashes) on `sub`.
void add_overrides(CLI::App* sub, std::map<std::string, std::string>& ov) {
  for (const auto& key : config_keys()) {
    if (key == "seed" || key == "out_dir" || key == "experiment") continue;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    const std::string names = dashed == key ? "--" + key : "--" + key + ",--" + dashed;
    sub->add_option_function<std::string>(names, [&ov, key](const std::string& v) { ov[key] = v; })
        ->group("Config overrides");
  }
}

std::string default_output(const ExperimentConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out_dir);
  return (std::filesystem::path(c.out_dir) / name).string();
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- simulate ---------------------------------------------------------------------------------

int cmd_simulate(const ExperimentConfig& c, const std::string& format, std::string output) {
  const ImpulseResponse irf = make_irf(c);
  Rng depth_rng(derive_seed(c.seed, 0xD3, 0));
  auto pixel_params = [&]() {
    std::vector<double> depths = c.depths;
    if (depths.empty())
      for (std::size_t k = 0; k < c.K; ++k) depths.push_back(std::floor(depth_rng.uniform() * c.T));
    std::vector<double> split = c.fractions.empty() ? std::vector<double>(c.K, 1.0 / c.K) : c.fractions;
    return ModelParams::from_sbr(c.sbr.front(), split, depths);
  };

  if (format == "stream" || format == "csv") {
    if (c.rows * c.cols != 1) throw InvalidArgument("stream output needs a 1x1 scene (rows = cols = 1)");
    const ModelParams p = pixel_params();
    Rng rng(derive_seed(c.seed, 0, 0));
    std::uint64_t n = static_cast<std::uint64_t>(std::llround(c.n_bar));
    if (count_mode(c) == CountMode::Poisson) n = std::poisson_distribution<std::uint64_t>(c.n_bar)(rng.engine());
    PhotonStream s;
    s.T = c.T;
    PhotonSampler(p, irf).sample_into(n, rng, s.stamps);
    if (output.empty()) output = default_output(c, format == "csv" ? "stream.csv" : "stream.skl");
    if (format == "csv") write_stream_csv(output, s);
    else write_stream(output, s);
    std::cout << "wrote " << output << ": T=" << c.T << " n=" << s.size() << " depths=";
    for (double t : p.depths()) std::cout << num(t) << ' ';
    std::cout << "sbr=" << num(p.sbr()) << '\n';
    return 0;
  }
  if (format != "cube") throw InvalidArgument("--format must be stream, csv or cube");
  Scene scene;
  scene.rows = c.rows;
  scene.cols = c.cols;
  for (std::uint64_t p = 0; p < std::uint64_t(c.rows) * c.cols; ++p) scene.pixels.push_back(pixel_params());
  const LidarCube cube = simulate_cube(scene, irf, c.n_bar, c.seed, count_mode(c));
  if (output.empty()) output = default_output(c, "cube.skc");
  write_cube(output, cube);
  std::cout << "wrote " << output << ": N_r=" << cube.rows() << " N_c=" << cube.cols() << " T=" << cube.bins()
            << " mean photons per pixel=" << num(cube.mean_photons()) << " sbr=" << num(scene.pixels[0].sbr()) << '\n';
  return 0;
}

// ---- sketch -----------------------------------------------------------------------------------

FrequencySet frequencies_for(const ExperimentConfig& c, std::uint32_t T, std::uint32_t m, const std::string& scheme) {
  if (scheme == "truncated") return truncated_frequencies(T, m);
  if (scheme == "random") {
    ExperimentConfig cc = c;
    cc.T = T;
    return random_frequencies(T, m, make_irf(cc), c.frequency_seed);
  }
  throw InvalidArgument("--scheme must be truncated or random");
}

int cmd_sketch(const ExperimentConfig& c, const std::string& input, std::uint32_t m, const std::string& scheme,
               const std::string& format, std::string output) {
  const std::string magic = file_magic(input);
  if (!std::filesystem::exists(input)) throw IoError("input file '" + input + "' does not exist");
  if (magic == "SKC1") {
    const LidarCube cube = read_cube(input);
    const FrequencySet f = frequencies_for(c, cube.bins(), m, scheme);
    const auto sketches = sketch_cube(cube, f);
    if (output.empty()) output = default_output(c, "sketches.skzc");
    write_sketch_cube(output, cube.rows(), cube.cols(), sketches);
    std::cout << "wrote " << output << ": " << sketches.size() << " pixel sketches, m=" << m << " (2m=" << 2 * m
              << " real values), compression max{2m/T, 2m/n}=" << num(compression_ratio(2.0 * m, cube.bins(), cube.mean_photons()))
              << '\n';
    return 0;
  }
  StreamReader reader(input);
  const FrequencySet f = frequencies_for(c, reader.bins(), m, scheme);
  SketchState state(f);
  std::vector<std::uint32_t> buf(1 << 16);
  while (const std::size_t got = reader.read(buf)) state.add(std::span<const std::uint32_t>(buf.data(), got));
  const Sketch s = state.finalize();
  if (output.empty()) output = default_output(c, format == "csv" ? "sketch.csv" : "sketch.skz");
  if (format == "csv") write_sketch_csv(output, s);
  else if (format == "binary") write_sketch(output, s);
  else throw InvalidArgument("--format must be binary or csv");
  std::cout << "wrote " << output << ": n=" << s.n << " m=" << m << " (2m=" << 2 * m
            << " real values), compression max{2m/T, 2m/n}=" << num(compression_ratio(2.0 * m, f.T, double(s.n))) << '\n';
  return 0;
}

// ---- fit --------------------------------------------------------------------------------------

bool is_sketch_csv(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    return line.rfind("j,", 0) == 0;
  }
  return false;
}

bool is_sketch_method(const std::string& m) { return m == "smle" || m == "circular-mean" || m == "ifft"; }

struct FitRow {
  std::uint32_t i = 0, j = 0;
  FitResult fit;
  bool has_weights = true;
  double photons = 0;
  std::string note;
};

FitRow fit_sketch(const Sketch& s, const ImpulseResponse& irf, const std::string& method, const ExperimentConfig& c) {
  FitRow row;
  row.photons = static_cast<double>(s.n);
  if (method == "smle") {
    row.fit = smle_fit(s, irf, c.K, smle_options(c));
    return row;
  }
  if (c.K != 1) throw InvalidArgument("method '" + method + "' estimates a single surface (K = 1)");
  double t;
  if (method == "circular-mean")
    t = wrap_depth(circular_mean(s) - s.freqs.T * std::arg(irf.spectrum()[1]) / (2.0 * std::numbers::pi), s.freqs.T);
  else
    t = ifft_estimate(s, c.offset_correction ? &irf : nullptr);
  row.fit.params = ModelParams({0.0, 1.0}, {t});
  row.fit.converged = true;
  row.fit.init_method = method;
  row.has_weights = false;
  return row;
}

FitRow fit_histogram(const std::vector<double>& hist, const ImpulseResponse& irf, const std::string& method,
                     const ExperimentConfig& c) {
  FitRow row;
  for (double v : hist) row.photons += v;
  const std::uint32_t cells = std::min(c.two_m.front(), static_cast<std::uint32_t>(hist.size()));
  if (method == "em") {
    row.fit = em_fit(hist, irf, c.K);
  } else if (method == "coarse+em") {
    row.fit = em_fit(coarse_bin(hist, cells), irf, c.K);
  } else {
    if (c.K != 1) throw InvalidArgument("method '" + method + "' estimates a single surface (K = 1)");
    const double t = estimate_depth(method, hist, irf, cells, smle_options(c), c.offset_correction);
    row.fit.params = ModelParams({0.0, 1.0}, {t});
    row.fit.converged = true;
    row.fit.init_method = method;
    row.has_weights = false;
  }
  return row;
}

int cmd_fit(const ExperimentConfig& c, const std::vector<std::string>& inputs, const std::string& method,
            std::string output) {
  static const std::vector<std::string> methods{"smle", "circular-mean", "ifft", "matched-filter", "em",
                                                "coarse+mf", "coarse+subbin", "coarse+em", "max-peak"};
  if (std::find(methods.begin(), methods.end(), method) == methods.end())
    throw InvalidArgument("unknown method '" + method + "'");
  if (inputs.empty()) throw InvalidArgument("fit needs at least one input file");

  std::vector<FitRow> rows;
  std::uint32_t T = 0;
  double two_m = 0, mean_n = 0;
  for (const auto& input : inputs) {
    if (!std::filesystem::exists(input)) throw IoError("input file '" + input + "' does not exist");
    const std::string magic = file_magic(input);
    const bool sketch_input =
        magic == "SKZ1" || magic == "SKZC" || (magic != "SKL1" && magic != "SKC1" && is_sketch_csv(input));
    if (sketch_input != is_sketch_method(method))
      throw InvalidArgument("method '" + method + "' needs " +
                            (is_sketch_method(method) ? std::string("sketch input (SKZ1/SKZC/sketch CSV)")
                                                      : std::string("photon data (stream or cube file)")));
    if (sketch_input) {
      std::vector<Sketch> sketches;
      std::uint32_t cols_n = 1;
      if (magic == "SKZC") {
        auto sc = read_sketch_cube(input);
        cols_n = sc.cols;
        sketches = std::move(sc.sketches);
      } else {
        sketches.push_back(magic == "SKZ1" ? read_sketch(input) : read_sketch_csv(input));
      }
      T = sketches.front().freqs.T;
      two_m = 2.0 * sketches.front().m();
      ExperimentConfig cc = c;
      cc.T = T;
      const ImpulseResponse irf = make_irf(cc);
      std::vector<FitRow> part(sketches.size());
      ParallelError error;
#pragma omp parallel for schedule(dynamic)
      for (long long p = 0; p < static_cast<long long>(sketches.size()); ++p)
        error.run([&] {
          try {
            if (sketches[p].n == 0) throw EmptySketchError("pixel has no photons");
            part[p] = fit_sketch(sketches[p], irf, method, c);
          } catch (const std::runtime_error& e) {
            part[p].note = e.what();
            part[p].photons = static_cast<double>(sketches[p].n);
          }
          part[p].i = static_cast<std::uint32_t>(p / cols_n);
          part[p].j = static_cast<std::uint32_t>(p % cols_n);
        });
      error.rethrow();
      for (auto& r : part) {
        mean_n += r.photons;
        rows.push_back(std::move(r));
      }
    } else {
      std::vector<std::vector<double>> hists;
      std::uint32_t cols_n = 1;
      if (magic == "SKC1") {
        const LidarCube cube = read_cube(input);
        cols_n = cube.cols();
        for (std::uint32_t i = 0; i < cube.rows(); ++i)
          for (std::uint32_t j = 0; j < cube.cols(); ++j) hists.push_back(histogram(cube.pixel(i, j)));
        T = cube.bins();
      } else {
        const PhotonStream s = read_stream(input);
        hists.push_back(histogram(s));
        T = s.T;
      }
      two_m = c.two_m.front();
      ExperimentConfig cc = c;
      cc.T = T;
      const ImpulseResponse irf = make_irf(cc);
      std::vector<FitRow> part(hists.size());
      ParallelError error;
#pragma omp parallel for schedule(dynamic)
      for (long long p = 0; p < static_cast<long long>(hists.size()); ++p)
        error.run([&] {
          try {
            part[p] = fit_histogram(hists[p], irf, method, c);
          } catch (const std::runtime_error& e) {
            part[p].note = e.what();
            for (double v : hists[p]) part[p].photons += v;
          }
          part[p].i = static_cast<std::uint32_t>(p / cols_n);
          part[p].j = static_cast<std::uint32_t>(p % cols_n);
        });
      error.rethrow();
      for (auto& r : part) {
        mean_n += r.photons;
        rows.push_back(std::move(r));
      }
    }
  }
  mean_n /= std::max<std::size_t>(rows.size(), 1);

  std::ostringstream out;
  out << "i,j,K";
  for (std::size_t k = 0; k <= c.K; ++k) out << ",alpha_" << k;
  for (std::size_t k = 1; k <= c.K; ++k) out << ",t_" << k;
  out << ",loss,iterations,converged,init";
  for (std::size_t k = 1; k <= c.K; ++k) out << ",intensity_" << k;
  out << ",photons\n";
  for (const auto& r : rows) {
    const bool ok = r.note.empty();
    out << r.i << ',' << r.j << ',' << c.K;
    for (std::size_t k = 0; k <= c.K; ++k)
      out << ',' << (ok && r.has_weights && k < r.fit.params.alphas().size() ? num(r.fit.params.alpha(k)) : "nan");
    for (std::size_t k = 1; k <= c.K; ++k)
      out << ',' << (ok && k <= r.fit.params.surfaces() ? num(r.fit.params.depth(k)) : "nan");
    out << ',' << (ok && r.has_weights ? num(r.fit.loss) : "nan") << ',' << r.fit.iterations << ','
        << (ok && r.fit.converged ? 1 : 0) << ',' << (ok ? r.fit.init_method : "failed: " + r.note);
    for (std::size_t k = 1; k <= c.K; ++k)
      out << ',' << (ok && r.has_weights ? num(r.fit.params.alpha(k) * r.photons) : "nan");
    out << ',' << num(r.photons) << '\n';
  }
  if (output.empty()) output = default_output(c, "fit.csv");
  write_file_atomic(output, out.str());
  std::cout << "wrote " << output << ": " << rows.size() << " pixel(s), method " << method;
  if (is_sketch_method(method))
    std::cout << ", compression max{2m/T, 2m/n}=" << num(compression_ratio(two_m, T, mean_n));
  std::cout << '\n';
  return 0;
}

int cmd_experiment(const ExperimentConfig& c) {
  const auto written = run_experiment(c);
  for (const auto& p : written) std::cout << "wrote " << p << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressive single-photon lidar: sketches, estimators and experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key=value experiment configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master random seed (overrides the config)");
  app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)");
  app.add_option("--out-dir", g.out_dir, "output directory (overrides the config)");

  auto* sim = app.add_subcommand("simulate", "simulate a photon stream or a lidar cube");
  std::string sim_format = "cube", sim_output;
  sim->add_option("--format", sim_format, "stream | csv | cube");
  sim->add_option("-o,--output", sim_output, "output file");

  auto* sk = app.add_subcommand("sketch", "sketch a stream or cube file in one pass");
  std::string sk_input, sk_scheme = "truncated", sk_format = "binary", sk_output;
  std::uint32_t sk_m = 10;
  sk->add_option("input", sk_input, "stream (SKL1 or CSV) or cube (SKC1) file")->required();
  sk->add_option("--m", sk_m, "number of complex frequencies (2m real values)");
  sk->add_option("--scheme", sk_scheme, "truncated | random");
  sk->add_option("--format", sk_format, "binary | csv (single-stream input)");
  sk->add_option("-o,--output", sk_output, "output file");

  auto* fit = app.add_subcommand("fit", "estimate depths and intensities per pixel");
  std::vector<std::string> fit_inputs;
  std::string fit_method = "smle", fit_output;
  fit->add_option("inputs", fit_inputs, "sketch files (SKZ1, SKZC, CSV) or photon data (SKL1, SKC1)")->required();
  fit->add_option("--method", fit_method,
                  "smle | circular-mean | ifft | matched-filter | em | coarse+mf | coarse+subbin | coarse+em | max-peak");
  fit->add_option("-o,--output", fit_output, "results CSV");

  std::vector<std::pair<CLI::App*, std::string>> experiments;
  for (const auto& [name, what] : std::vector<std::pair<std::string, std::string>>{
           {"rep", "REP curves from Fisher information"},
           {"contour", "Monte-Carlo RMSE / detection grids"},
           {"starved", "photon-starved RMSE ratio grid"},
           {"ifft-compare", "SMLE vs iFFT RMSE ratio grid"},
           {"clt", "circular-mean error distribution vs its Gaussian limit"},
           {"pulse-width", "SMLE vs narrow/wide pulse coarse binning"}})
    experiments.emplace_back(app.add_subcommand(name, what), name);
  std::map<std::string, std::string> ov;
  for (auto* sub : app.get_subcommands({})) add_overrides(sub, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    set_thread_count(g.threads);
    if (sim->parsed()) return cmd_simulate(build_config(g, ov), sim_format, sim_output);
    if (sk->parsed())
      return cmd_sketch(build_config(g, ov), sk_input, sk_m, sk_scheme, sk_format, sk_output);
    if (fit->parsed()) return cmd_fit(build_config(g, ov), fit_inputs, fit_method, fit_output);
    for (const auto& [sub, name] : experiments)
      if (sub->parsed()) return cmd_experiment(build_config(g, ov, name));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
