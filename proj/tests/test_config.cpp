#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sketchlidar/config.hpp"
#include "sketchlidar/errors.hpp"

using namespace sketchlidar;

TEST_CASE("parse, lists and overrides") {
  const auto c = parse_config(
      "# comment\nexperiment = rep\nT=1000\nirf = gaussian(15)\ndepths = 320, 570\nK = 2\n"
      "fractions=0.75,0.25\nsbr = logspace(-1, 1, 3)\ntwo_m = range(2, 10, 4)\n",
      {{"trials", "7"}, {"T", "500"}});
  CHECK(c.experiment == "rep");
  CHECK(c.T == 500);
  CHECK(c.trials == 7);
  CHECK(c.K == 2);
  CHECK(c.depths == std::vector<double>{320, 570});
  REQUIRE(c.sbr.size() == 3);
  CHECK(c.sbr[0] == doctest::Approx(0.1));
  CHECK(c.sbr[2] == doctest::Approx(10));
  CHECK(c.two_m == std::vector<std::uint32_t>{2, 6, 10});
  CHECK(parse_list("n", "range(1, 15, 2)").size() == 8);
}

TEST_CASE("invalid configs name the offending key") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("bogus = 1\n").find("bogus") != std::string::npos);
  CHECK(message("T = abc\n").find("'T'") != std::string::npos);
  CHECK(message("trials = 0\n").find("trials") != std::string::npos);
  CHECK(message("two_m = 3.5\n").find("two_m") != std::string::npos);
  CHECK(message("K = 2\ndepths = 10\n").find("depths") != std::string::npos);
  CHECK(message("irf = triangle(3)\n").find("irf") != std::string::npos);
  CHECK(message("sbr = -1\n").find("sbr") != std::string::npos);
  CHECK(message("no equals sign\n").find("line 1") != std::string::npos);
}

TEST_CASE("render round-trips and names every key") {
  const auto c = parse_config("experiment = contour\nT=250\nsbr=0.1,1,10\nmethods=smle,ifft\n");
  const auto again = parse_config(render_config(c));
  CHECK(render_config(again) == render_config(c));
  const auto text = render_config(c);
  for (const auto& key : config_keys()) CHECK(text.find(key + " =") != std::string::npos);
}

TEST_CASE("impulse response specs") {
  CHECK(make_irf("gaussian(5)", 250).peak() == 0);
  const auto s = make_irf("short", 1000);
  const auto g = gaussian_irf(11, 1000);
  for (std::size_t t = 0; t < 1000; t += 50) CHECK(s[t] == doctest::Approx(g[t]));
  const auto l = make_irf("long", 1000);
  // The long-tailed pulse has more mass after its peak than before it.
  double after = 0, before = 0;
  for (std::size_t d = 1; d < 300; ++d) {
    after += l[(l.peak() + d) % 1000];
    before += l[(l.peak() + 1000 - d) % 1000];
  }
  CHECK(after > 2 * before);
  CHECK_THROWS_AS(make_irf("file(/no/such/file)", 10), IoError);
}

TEST_CASE("shipped configs parse") {
  const std::filesystem::path dir = SKETCHLIDAR_SOURCE_DIR "/configs";
  std::size_t count = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".cfg") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path().string()));
    ++count;
  }
  CHECK(count >= 8);
  const auto b = load_config((dir / "appB_starved.cfg").string());
  CHECK(b.T == 100);
  CHECK(make_irf(b).values()[3] == doctest::Approx(gaussian_irf(0.03 * 100, 100)[3]));
  const auto c = load_config((dir / "appC_ifft.cfg").string());
  CHECK(c.two_m == std::vector<std::uint32_t>{4});
}
