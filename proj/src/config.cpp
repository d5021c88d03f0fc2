#include "sketchlidar/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sketchlidar/errors.hpp"

namespace sketchlidar {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(item));
      item.clear();
    } else {
      item.push_back(c);
    }
  }
  if (!trim(item).empty() || !out.empty()) out.push_back(trim(item));
  return out;
}

double number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d;
  try {
    d = std::stod(v, &used);
  } catch (const std::logic_error&) {
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not a number");
  }
  if (used != v.size() || !std::isfinite(d)) throw InvalidArgument("config key '" + key + "': '" + v + "' is not a number");
  return d;
}

std::uint64_t count(const std::string& key, const std::string& v) {
  const double d = number(key, v);
  if (d < 0 || std::floor(d) != d) throw InvalidArgument("config key '" + key + "': '" + v + "' is not a nonnegative integer");
  return static_cast<std::uint64_t>(d);
}

bool boolean(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidArgument("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<double> call_args(const std::string& key, const std::string& v, const std::string& name) {
  const std::string inner = v.substr(name.size() + 1, v.size() - name.size() - 2);
  std::vector<double> args;
  for (const auto& a : split(inner, ',')) args.push_back(number(key, a));
  return args;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "experiment", "T",       "irf",        "short_sigma_frac", "long_tau_frac", "K",        "depths",
      "fractions",  "sbr",     "n",          "two_m",            "schemes",       "methods",  "trials",
      "seed",       "tolerances", "out_dir", "rows",             "cols",          "n_bar",    "count_mode",
      "grid",       "n_starts", "weighting", "offset_correction", "wide_sigma_bins", "frequency_seed"};
  return keys;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split(value, ',')) {
    if (item.empty()) throw InvalidArgument("config key '" + key + "': empty list element");
    if (item.rfind("logspace(", 0) == 0 && item.back() == ')') {
      const auto a = call_args(key, item, "logspace");
      if (a.size() != 3 || a[2] < 1 || std::floor(a[2]) != a[2])
        throw InvalidArgument("config key '" + key + "': logspace(a,b,k) needs integer k >= 1");
      const int k = static_cast<int>(a[2]);
      for (int i = 0; i < k; ++i)
        out.push_back(std::pow(10.0, k == 1 ? a[0] : a[0] + (a[1] - a[0]) * i / (k - 1)));
    } else if (item.rfind("range(", 0) == 0 && item.back() == ')') {
      const auto a = call_args(key, item, "range");
      if (a.size() != 3 || !(a[2] > 0)) throw InvalidArgument("config key '" + key + "': range(a,b,step) needs step > 0");
      for (double x = a[0]; x <= a[1] + 1e-9 * std::abs(a[2]); x += a[2]) out.push_back(x);
    } else {
      out.push_back(number(key, item));
    }
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  for (const auto& [k, v] : overrides) kv[k] = v;

  const auto& known = config_keys();
  for (const auto& [k, v] : kv)
    if (std::find(known.begin(), known.end(), k) == known.end()) throw InvalidArgument("unknown config key '" + k + "'");

  ExperimentConfig c;
  c.raw = kv;
  auto get = [&](const char* k) -> const std::string* {
    const auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("experiment")) c.experiment = *v;
  if (auto v = get("T")) c.T = static_cast<std::uint32_t>(count("T", *v));
  if (auto v = get("irf")) c.irf = *v;
  if (auto v = get("short_sigma_frac")) c.short_sigma_frac = number("short_sigma_frac", *v);
  if (auto v = get("long_tau_frac")) c.long_tau_frac = number("long_tau_frac", *v);
  if (auto v = get("K")) c.K = count("K", *v);
  if (auto v = get("depths")) c.depths = v->empty() || *v == "uniform" ? std::vector<double>{} : parse_list("depths", *v);
  if (auto v = get("fractions")) c.fractions = parse_list("fractions", *v);
  if (auto v = get("sbr")) c.sbr = parse_list("sbr", *v);
  if (auto v = get("n")) c.n = parse_list("n", *v);
  if (auto v = get("two_m")) {
    c.two_m.clear();
    for (double d : parse_list("two_m", *v)) {
      if (d < 1 || std::floor(d) != d) throw InvalidArgument("config key 'two_m': values must be positive integers");
      c.two_m.push_back(static_cast<std::uint32_t>(d));
    }
  }
  if (auto v = get("schemes")) c.schemes = split(*v, ',');
  if (auto v = get("methods")) c.methods = split(*v, ',');
  if (auto v = get("trials")) c.trials = count("trials", *v);
  if (auto v = get("seed")) c.seed = count("seed", *v);
  if (auto v = get("tolerances")) c.tolerances = parse_list("tolerances", *v);
  if (auto v = get("out_dir")) c.out_dir = *v;
  if (auto v = get("rows")) c.rows = static_cast<std::uint32_t>(count("rows", *v));
  if (auto v = get("cols")) c.cols = static_cast<std::uint32_t>(count("cols", *v));
  if (auto v = get("n_bar")) c.n_bar = number("n_bar", *v);
  if (auto v = get("count_mode")) c.count_mode = *v;
  if (auto v = get("grid")) c.grid = static_cast<int>(count("grid", *v));
  if (auto v = get("n_starts")) c.n_starts = static_cast<int>(count("n_starts", *v));
  if (auto v = get("weighting")) c.weighting = *v;
  if (auto v = get("offset_correction")) c.offset_correction = boolean("offset_correction", *v);
  if (auto v = get("wide_sigma_bins")) c.wide_sigma_bins = number("wide_sigma_bins", *v);
  if (auto v = get("frequency_seed")) c.frequency_seed = count("frequency_seed", *v);

  if (c.T < 2) throw InvalidArgument("config key 'T' must be at least 2");
  if (c.trials < 1) throw InvalidArgument("config key 'trials' must be at least 1");
  if (c.sbr.empty() || c.n.empty() || c.two_m.empty() || c.schemes.empty() || c.tolerances.empty())
    throw InvalidArgument("config grids (sbr, n, two_m, schemes, tolerances) must be nonempty");
  for (double s : c.sbr)
    if (!(s > 0)) throw InvalidArgument("config key 'sbr' values must be positive");
  for (double n : c.n)
    if (!(n >= 1)) throw InvalidArgument("config key 'n' values must be at least 1");
  for (double t : c.tolerances)
    if (t < 0) throw InvalidArgument("config key 'tolerances' values must be nonnegative");
  if (!c.depths.empty() && c.depths.size() != c.K)
    throw InvalidArgument("config key 'depths' must list K values (or be 'uniform')");
  if (!c.fractions.empty() && c.fractions.size() != c.K)
    throw InvalidArgument("config key 'fractions' must list K values");
  if (c.rows == 0 || c.cols == 0) throw InvalidArgument("config keys 'rows'/'cols' must be positive");
  if (!(c.n_bar > 0)) throw InvalidArgument("config key 'n_bar' must be positive");
  if (c.grid < 1 || c.n_starts < 1) throw InvalidArgument("config keys 'grid'/'n_starts' must be positive");
  count_mode(c);
  smle_options(c);
  make_irf(c);
  for (const auto& s : c.schemes)
    if (s != "truncated" && s != "random" && s != "coarse")
      throw InvalidArgument("config key 'schemes': unknown scheme '" + s + "'");
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

namespace {

std::string shortest(double d) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, r.ptr);
}

template <class T, class F>
std::string joined(const std::vector<T>& v, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

}  // namespace

std::string render_config(const ExperimentConfig& c) {
  const auto num = [](double d) { return shortest(d); };
  const auto str = [](const std::string& s) { return s; };
  const auto u = [](auto x) { return std::to_string(x); };
  const std::vector<std::pair<std::string, std::string>> kv{
      {"experiment", c.experiment},
      {"T", u(c.T)},
      {"irf", c.irf},
      {"short_sigma_frac", num(c.short_sigma_frac)},
      {"long_tau_frac", num(c.long_tau_frac)},
      {"K", u(c.K)},
      {"depths", c.depths.empty() ? "uniform" : joined(c.depths, num)},
      {"fractions", joined(c.fractions, num)},
      {"sbr", joined(c.sbr, num)},
      {"n", joined(c.n, num)},
      {"two_m", joined(c.two_m, u)},
      {"schemes", joined(c.schemes, str)},
      {"methods", joined(c.methods, str)},
      {"trials", u(c.trials)},
      {"seed", u(c.seed)},
      {"tolerances", joined(c.tolerances, num)},
      {"out_dir", c.out_dir},
      {"rows", u(c.rows)},
      {"cols", u(c.cols)},
      {"n_bar", num(c.n_bar)},
      {"count_mode", c.count_mode},
      {"grid", u(c.grid)},
      {"n_starts", u(c.n_starts)},
      {"weighting", c.weighting},
      {"offset_correction", c.offset_correction ? "true" : "false"},
      {"wide_sigma_bins", num(c.wide_sigma_bins)},
      {"frequency_seed", u(c.frequency_seed)}};
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

ImpulseResponse make_irf(const std::string& spec, std::uint32_t T, double short_sigma_frac, double long_tau_frac) {
  const std::string s = trim(spec);
  if (s == "short") return gaussian_irf(short_sigma_frac * T, T);
  if (s == "long") return exp_modified_gaussian_irf(short_sigma_frac * T, long_tau_frac * T, T);
  if (s.rfind("gaussian(", 0) == 0 && s.back() == ')') {
    const auto a = call_args("irf", s, "gaussian");
    if (a.size() != 1) throw InvalidArgument("config key 'irf': gaussian(sigma) takes one argument");
    return gaussian_irf(a[0], T);
  }
  if (s.rfind("emg(", 0) == 0 && s.back() == ')') {
    const auto a = call_args("irf", s, "emg");
    if (a.size() != 2) throw InvalidArgument("config key 'irf': emg(sigma,tau) takes two arguments");
    return exp_modified_gaussian_irf(a[0], a[1], T);
  }
  if (s.rfind("file(", 0) == 0 && s.back() == ')') {
    ImpulseResponse irf = load_irf(s.substr(5, s.size() - 6));
    if (irf.size() != T) throw InvalidArgument("IRF file length " + std::to_string(irf.size()) + " differs from T");
    return irf;
  }
  throw InvalidArgument("config key 'irf': unknown impulse response '" + s + "'");
}

ImpulseResponse make_irf(const ExperimentConfig& config) {
  return make_irf(config.irf, config.T, config.short_sigma_frac, config.long_tau_frac);
}

SmleOptions smle_options(const ExperimentConfig& config) {
  SmleOptions o;
  o.grid = config.grid;
  o.n_starts = config.n_starts;
  if (config.weighting == "cue") o.weighting = Weighting::CUE;
  else if (config.weighting == "identity") o.weighting = Weighting::Identity;
  else if (config.weighting == "fixed") o.weighting = Weighting::Fixed;
  else if (config.weighting == "two-step") o.weighting = Weighting::TwoStep;
  else throw InvalidArgument("config key 'weighting': expected cue, identity, fixed or two-step");
  return o;
}

CountMode count_mode(const ExperimentConfig& config) {
  if (config.count_mode == "poisson") return CountMode::Poisson;
  if (config.count_mode == "fixed") return CountMode::Fixed;
  throw InvalidArgument("config key 'count_mode': expected poisson or fixed");
}

}  // namespace sketchlidar
