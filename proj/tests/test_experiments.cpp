#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "sketchlidar/experiments.hpp"
#include "sketchlidar/io.hpp"
#include "sketchlidar/kernels.hpp"

using namespace sketchlidar;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ExperimentConfig small(const std::string& experiment, const std::string& extra = "") {
  return parse_config("experiment = " + experiment + "\nT = 100\nirf = gaussian(3)\ntrials = 6\n" + extra);
}

}  // namespace

TEST_CASE("contour tables do not depend on the thread count") {
  const auto c = small("contour", "sbr = 0.5, 5\ntwo_m = 4, 8\nn = 50\nmethods = smle, ifft, coarse+mf, matched-filter\n");
  const int saved = thread_count();
  set_thread_count(1);
  const auto one = run_contour(c);
  set_thread_count(4);
  const auto four = run_contour(c);
  set_thread_count(saved);
  REQUIRE(one.size() == four.size());
  CHECK(one.size() == 16);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].score.method == four[i].score.method);
    CHECK(one[i].score.rmse == four[i].score.rmse);
    CHECK(one[i].score.detection == four[i].score.detection);
    CHECK(one[i].crb_sketch == four[i].crb_sketch);
  }
}

TEST_CASE("every experiment runs at small scale and writes its tables") {
  const fs::path dir = fs::temp_directory_path() / ("sketchlidar_exp_" + std::to_string(::getpid()));
  const std::vector<std::pair<std::string, std::string>> runs{
      {"clt", "n = 10, 100\ndepths = 30\n"},
      {"rep", "schemes = truncated, random, coarse\ntwo_m = 4, 10\nsbr = 1, 10\ndepths = 43\n"},
      {"contour", "methods = smle, circular-mean, em, coarse+em, max-peak\n"},
      {"starved", "n = 1, 3\nsbr = 1\n"},
      {"ifft-compare", "n = 20\nsbr = 1\ntwo_m = 4\n"},
      {"pulse-width", "n = 50\nsbr = 1\ntwo_m = 10\n"}};
  for (const auto& [name, extra] : runs) {
    CAPTURE(name);
    auto c = small(name, extra + "out_dir = " + dir.string() + "\n");
    const auto written = run_experiment(c);
    REQUIRE(written.size() >= 2);
    for (const auto& p : written) {
      CAPTURE(p);
      const auto text = slurp(p);
      CHECK(text.size() > 10);
      CHECK(text.find("inf,inf,inf") == std::string::npos);
    }
    const auto again = parse_config(slurp(written.back()));
    CHECK(render_config(again) == render_config(c));
  }
  fs::remove_all(dir);
}

TEST_CASE("REP rows and compression ratio") {
  const auto rows = run_rep(small("rep", "schemes = truncated, coarse\ntwo_m = 4, 20\nsbr = 10\ndepths = 43\n"));
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.rep >= -0.01);
    CHECK(r.rmse_full > 0);
  }
  CHECK(compression_ratio(20, 1000, 100) == doctest::Approx(0.2));
  CHECK(compression_ratio(20, 100, 1000) == doctest::Approx(0.2));
}

TEST_CASE("starved grid ties 2m to the photon count") {
  const auto rows = run_starved(small("starved", "n = 1, 4, 7\nsbr = 1\n"));
  REQUIRE(!rows.empty());
  for (const auto& r : rows) {
    CHECK(r.two_m == std::uint32_t(r.n));
    CHECK(std::isfinite(r.ratio));
  }
}

TEST_CASE("unknown experiments and methods are rejected") {
  CHECK_THROWS(run_experiment(small("nope", "out_dir = " + (fs::temp_directory_path() / "sketchlidar_nope").string() + "\n")));
  CHECK_THROWS(run_contour(small("contour", "methods = sorcery\n")));
}
