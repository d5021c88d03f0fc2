#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "sketchlidar/io.hpp"
#include "sketchlidar/sketch.hpp"

using namespace sketchlidar;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / ("sketchlidar_cli_" + std::to_string(::getpid()));

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  fs::create_directories(kDir);
  const std::string log = (kDir / "log.txt").string();
  const std::string cmd = std::string("'") + SKETCHLIDAR_CLI + "' --out-dir '" + kDir.string() + "' " + args + " > '" +
                          log + "' 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, {std::istreambuf_iterator<char>(in), {}}};
}

std::string at(const std::string& name) { return (kDir / name).string(); }

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Value of column `name` in the first data row of a CSV file.
std::string csv_field(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::vector<std::string> h, r;
  for (std::stringstream ss(header); std::getline(ss, h.emplace_back(), ',');) {}
  for (std::stringstream ss(row); std::getline(ss, r.emplace_back(), ',');) {}
  for (std::size_t i = 0; i < h.size() && i < r.size(); ++i)
    if (h[i] == name) return r[i];
  return "";
}

struct Cleanup {
  ~Cleanup() { fs::remove_all(kDir); }
} cleanup;

}  // namespace

TEST_CASE("simulate is deterministic in the seed") {
  REQUIRE(cli("--seed 5 simulate --format stream -o " + at("a.skl") + " --T 250 --n_bar 500").code == 0);
  REQUIRE(cli("--seed 5 simulate --format stream -o " + at("b.skl") + " --T 250 --n_bar 500").code == 0);
  REQUIRE(cli("--seed 6 simulate --format stream -o " + at("c.skl") + " --T 250 --n_bar 500").code == 0);
  CHECK(slurp(at("a.skl")) == slurp(at("b.skl")));
  CHECK(slurp(at("a.skl")) != slurp(at("c.skl")));
  REQUIRE(cli("--seed 5 simulate -o " + at("a.skc") + " --rows 3 --cols 2 --T 100").code == 0);
  REQUIRE(cli("--seed 5 --threads 1 simulate -o " + at("b.skc") + " --rows 3 --cols 2 --T 100").code == 0);
  CHECK(slurp(at("a.skc")) == slurp(at("b.skc")));
}

TEST_CASE("sketch of one photon per bin is zero") {
  std::string text = "# T=16\n";
  for (int t = 0; t < 16; ++t) text += std::to_string(t) + "\n";
  write_file_atomic(at("flat.csv"), text);
  const auto r = cli("sketch " + at("flat.csv") + " --m 3 -o " + at("flat.skz"));
  REQUIRE(r.code == 0);
  CHECK(r.output.find("compression") != std::string::npos);
  const auto s = read_sketch(at("flat.skz"));
  CHECK(s.n == 16);
  for (auto v : s.z) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("CLI sketch equals the library sketch of the same stream") {
  REQUIRE(cli("--seed 9 simulate --format stream -o " + at("s.skl") + " --n_bar 5000").code == 0);
  REQUIRE(cli("sketch " + at("s.skl") + " --m 8 --scheme random --frequency-seed 3 --format csv -o " + at("s.csv"))
              .code == 0);
  const auto stream = read_stream(at("s.skl"));
  const auto got = read_sketch_csv(at("s.csv"));
  SketchState st(got.freqs);
  st.add(stream.stamps);
  const auto want = st.finalize();
  CHECK(got.n == want.n);
  for (std::size_t k = 0; k < want.z.size(); ++k) CHECK(std::abs(got.z[k] - want.z[k]) < 1e-12);
}

TEST_CASE("invalid invocations exit nonzero with a message") {
  REQUIRE(cli("simulate --format stream -o " + at("e.skl") + " --T 100").code == 0);
  auto r = cli("sketch " + at("e.skl") + " --m 100");
  CHECK(r.code != 0);
  CHECK(r.output.find("error:") != std::string::npos);
  r = cli("sketch " + at("missing.skl"));
  CHECK(r.code != 0);
  CHECK(r.output.find("missing.skl") != std::string::npos);
  r = cli("fit " + at("e.skl") + " --method smle");
  CHECK(r.code != 0);
  CHECK(r.output.find("sketch input") != std::string::npos);
  r = cli("contour --bogus_key 3");
  CHECK(r.code != 0);
  CHECK(r.output.find("bogus_key") != std::string::npos);
  r = cli("fit " + at("e.skl") + " --method sorcery");
  CHECK(r.code != 0);
}

TEST_CASE("fit recovers the depth of a noiseless sketch") {
  const auto irf = gaussian_irf(5, 250);
  write_sketch(at("clean.skz"), expected_sketch(ModelParams({0.2, 0.8}, {87.4}), irf, truncated_frequencies(250, 8), 1'000'000));
  REQUIRE(cli("fit " + at("clean.skz") + " -o " + at("clean.csv")).code == 0);
  CHECK(std::stod(csv_field(at("clean.csv"), "t_1")) == doctest::Approx(87.4).epsilon(0.1 / 87.4));
  CHECK(std::stod(csv_field(at("clean.csv"), "alpha_1")) == doctest::Approx(0.8).epsilon(0.01));
  CHECK(csv_field(at("clean.csv"), "converged") == "1");

  REQUIRE(cli("fit " + at("clean.skz") + " --method circular-mean -o " + at("cm.csv")).code == 0);
  CHECK(csv_field(at("cm.csv"), "alpha_1") == "nan");
}

TEST_CASE("cube pipeline writes one row per pixel and failed fits are labelled") {
  REQUIRE(cli("--seed 2 simulate -o " + at("cube.skc") + " --rows 2 --cols 3 --T 250 --n_bar 300").code == 0);
  REQUIRE(cli("sketch " + at("cube.skc") + " --m 6 -o " + at("cube.skzc")).code == 0);
  REQUIRE(cli("fit " + at("cube.skzc") + " -o " + at("cube.csv")).code == 0);
  std::ifstream in(at("cube.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 7);
  REQUIRE(cli("fit " + at("cube.skc") + " --method coarse+em --two_m 10 -o " + at("cube_em.csv")).code == 0);

  REQUIRE(cli("simulate -o " + at("empty.skc") + " --rows 1 --cols 2 --n_bar 0.0001").code == 0);
  REQUIRE(cli("sketch " + at("empty.skc") + " --m 4 -o " + at("empty.skzc")).code == 0);
  REQUIRE(cli("fit " + at("empty.skzc") + " -o " + at("empty.csv")).code == 0);
  CHECK(slurp(at("empty.csv")).find("failed: ") != std::string::npos);
}

TEST_CASE("experiment subcommands run with tiny trial counts") {
  for (const std::string name : {"rep", "contour", "starved", "ifft-compare", "clt", "pulse-width"}) {
    CAPTURE(name);
    const auto r = cli(name + " --trials 2 --T 100 --irf 'gaussian(3)' --n 20 --sbr 1 --two_m 4 --depths 30");
    CHECK(r.code == 0);
    CHECK(r.output.find("wrote") != std::string::npos);
  }
  CHECK(fs::exists(at("contour.csv")));
  CHECK(fs::exists(at("contour.cfg")));
}

TEST_CASE("unwritable output leaves no partial file") {
  REQUIRE(cli("simulate --format stream -o " + at("w.skl")).code == 0);
  const auto r = cli("fit " + at("w.skl") + " --method matched-filter -o " + at("nodir/out.csv"));
  CHECK(r.code != 0);
  CHECK(!fs::exists(at("nodir")));
}
