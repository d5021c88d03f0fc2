#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <unistd.h>

#include "sketchlidar/errors.hpp"
#include "sketchlidar/io.hpp"
#include "sketchlidar/kernels.hpp"

using namespace sketchlidar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("sketchlidar_io_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::string& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

// Offset reported by a ParseError thrown from f, or -1 when nothing (or something else) is thrown.
template <class F>
long long parse_offset(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return static_cast<long long>(e.offset());
  } catch (...) {
    return -2;
  }
  return -1;
}

const auto kIrf = gaussian_irf(5, 250);
const ModelParams kParams({0.3, 0.7}, {120});

}  // namespace

TEST_CASE("stream files round-trip byte-identically") {
  TempDir d;
  const auto s = sample_photons(kParams, kIrf, 5000, 1);
  write_stream(d / "a.skl", s);
  const auto r = read_stream(d / "a.skl");
  CHECK(r.T == 250);
  CHECK(r.stamps == s.stamps);
  write_stream(d / "b.skl", r);
  CHECK(slurp(d / "a.skl") == slurp(d / "b.skl"));

  write_stream_csv(d / "a.csv", s);
  const auto c = read_stream_csv(d / "a.csv");
  CHECK(c.stamps == s.stamps);
  write_stream_csv(d / "b.csv", c);
  CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
  CHECK(read_stream(d / "a.csv").stamps == s.stamps);

  write_stream(d / "empty.skl", PhotonStream{250, {}});
  CHECK(read_stream(d / "empty.skl").size() == 0);
}

TEST_CASE("stream reader delivers chunks") {
  TempDir d;
  const auto s = sample_photons(kParams, kIrf, 10'007, 2);
  write_stream(d / "s.skl", s);
  StreamReader r(d / "s.skl");
  CHECK(r.bins() == 250);
  CHECK(r.declared() == 10'007);
  std::vector<std::uint32_t> buf(1000), all;
  while (std::size_t got = r.read(buf)) all.insert(all.end(), buf.begin(), buf.begin() + long(got));
  CHECK(all == s.stamps);
}

TEST_CASE("cube and sketch files round-trip byte-identically") {
  TempDir d;
  const auto cube = simulate_cube(Scene::uniform(3, 4, kParams), kIrf, 80, 5);
  write_cube(d / "a.skc", cube);
  CHECK(read_cube(d / "a.skc") == cube);
  write_cube(d / "b.skc", read_cube(d / "a.skc"));
  CHECK(slurp(d / "a.skc") == slurp(d / "b.skc"));

  const auto f = random_frequencies(250, 9, kIrf, 77);
  const auto sk = sketch_stamps(sample_photons(kParams, kIrf, 3000, 3).stamps, f).finalize();
  write_sketch(d / "a.skz", sk);
  const auto back = read_sketch(d / "a.skz");
  CHECK(back.freqs == sk.freqs);
  CHECK(back.z == sk.z);
  CHECK(back.n == sk.n);
  write_sketch(d / "b.skz", back);
  CHECK(slurp(d / "a.skz") == slurp(d / "b.skz"));

  write_sketch_csv(d / "a.csv", sk);
  const auto csv = read_sketch_csv(d / "a.csv");
  CHECK(csv.freqs == sk.freqs);
  CHECK(csv.z == sk.z);
  write_sketch_csv(d / "b.csv", csv);
  CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));

  const auto sketches = sketch_cube(cube, truncated_frequencies(250, 4));
  write_sketch_cube(d / "a.skzc", 3, 4, sketches);
  const auto sc = read_sketch_cube(d / "a.skzc");
  CHECK(sc.rows == 3);
  CHECK(sc.cols == 4);
  write_sketch_cube(d / "b.skzc", sc.rows, sc.cols, sc.sketches);
  CHECK(slurp(d / "a.skzc") == slurp(d / "b.skzc"));
  CHECK(file_magic(d / "a.skzc") == "SKZC");
}

TEST_CASE("malformed binary headers are rejected with their byte offsets") {
  TempDir d;
  write_stream(d / "s.skl", sample_photons(kParams, kIrf, 10, 1));
  const auto good = slurp(d / "s.skl");

  auto bad = good;
  bad[0] = 'X';
  spit(d / "x.skl", bad);
  CHECK(parse_offset([&] { read_stream(d / "x.skl"); }) == 0);

  bad = good;
  bad[4] = 9;  // version
  spit(d / "x.skl", bad);
  CHECK(parse_offset([&] { read_stream(d / "x.skl"); }) == 4);

  bad = good;
  bad[8] = bad[9] = bad[10] = bad[11] = 0;  // T = 0
  spit(d / "x.skl", bad);
  CHECK(parse_offset([&] { read_stream(d / "x.skl"); }) == 8);

  spit(d / "x.skl", good.substr(0, good.size() - 2));
  CHECK(parse_offset([&] { read_stream(d / "x.skl"); }) >= 20);

  spit(d / "x.skl", good + "zz");
  CHECK(parse_offset([&] { read_stream(d / "x.skl"); }) == long(good.size()));

  bad = good;
  bad[20] = char(0xff);
  bad[21] = char(0xff);  // first stamp far outside [0, T)
  spit(d / "x.skl", bad);
  CHECK(parse_offset([&] { read_stream(d / "x.skl"); }) == 20);

  write_sketch(d / "k.skz", sketch_from_histogram(std::vector<double>(250, 1.0), truncated_frequencies(250, 3)));
  const auto sk = slurp(d / "k.skz");
  bad = sk;
  bad[12] = 0;
  bad[13] = bad[14] = bad[15] = 0;  // m = 0
  spit(d / "x.skz", bad);
  CHECK(parse_offset([&] { read_sketch(d / "x.skz"); }) == 12);
  bad = sk;
  bad[16] = 7;  // scheme
  spit(d / "x.skz", bad);
  CHECK(parse_offset([&] { read_sketch(d / "x.skz"); }) == 16);

  write_cube(d / "c.skc", LidarCube(2, 2, 5));
  const auto cb = slurp(d / "c.skc");
  spit(d / "x.skc", cb.substr(0, cb.size() - 4));
  CHECK(parse_offset([&] { read_cube(d / "x.skc"); }) > 0);
  bad = cb;
  bad[8] = bad[9] = bad[10] = bad[11] = 0;  // rows = 0
  spit(d / "x.skc", bad);
  CHECK(parse_offset([&] { read_cube(d / "x.skc"); }) == 8);
}

TEST_CASE("malformed text files are rejected with line offsets") {
  TempDir d;
  spit(d / "s.csv", "# T=10\n1\n2\nabc\n");
  CHECK(parse_offset([&] { read_stream_csv(d / "s.csv"); }) == 11);
  spit(d / "s.csv", "# T=10\n1\n12\n");
  CHECK(parse_offset([&] { read_stream_csv(d / "s.csv"); }) == 9);
  spit(d / "s.csv", "hello\n");
  CHECK(parse_offset([&] { read_stream(d / "s.csv"); }) == 0);

  spit(d / "k.csv", "# T=10\n# m=1\n# scheme=truncated\n# seed=0\n# n=4\nj, re, im\n1,0.5\n");
  CHECK(parse_offset([&] { read_sketch_csv(d / "k.csv"); }) == 57);
  spit(d / "k.csv", "# T=10\n# m=1\n# scheme=zigzag\n");
  CHECK(parse_offset([&] { read_sketch_csv(d / "k.csv"); }) == 13);
  spit(d / "k.csv", "# T=10\n# m=1\n# scheme=truncated\n# seed=0\n# n=4\nj,re,im\n1,0.5,0.25\n");
  const auto ok = read_sketch_csv(d / "k.csv");
  CHECK(ok.z[0] == Complex(0.5, 0.25));
}

TEST_CASE("writes are atomic and fail cleanly") {
  TempDir d;
  CHECK_THROWS_AS(write_stream(d / "no/such/dir/a.skl", PhotonStream{4, {1}}), IoError);
  CHECK(!fs::exists(d / "no"));
  CHECK_THROWS_AS(read_stream(d / "missing.skl"), IoError);
  write_file_atomic(d / "t.txt", "abc");
  CHECK(slurp(d / "t.txt") == "abc");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(d.path)) ++entries;
  CHECK(entries == 1);
}
