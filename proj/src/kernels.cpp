#include "sketchlidar/kernels.hpp"

#include "sketchlidar/parallel.hpp"

#include <algorithm>

#include <omp.h>

namespace sketchlidar {

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int n) {
  if (n > 0) omp_set_num_threads(n);
}

SketchState sketch_stamps_serial(std::span<const std::uint32_t> stamps, const FrequencySet& freqs) {
  SketchState state(freqs);
  state.add(stamps);
  return state;
}

SketchState sketch_stamps(std::span<const std::uint32_t> stamps, const FrequencySet& freqs) {
  constexpr std::size_t kChunk = 1 << 14;
  const std::size_t chunks = (stamps.size() + kChunk - 1) / kChunk;
  if (chunks <= 1) return sketch_stamps_serial(stamps, freqs);
  std::vector<SketchState> parts(chunks, SketchState(freqs));
  ParallelError error;
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(stamps.size(), begin + kChunk);
    error.run([&] { parts[c].add(stamps.subspan(begin, end - begin)); });
  }
  error.rethrow();
  for (std::size_t c = 1; c < chunks; ++c) parts[0].merge(parts[c]);
  return parts[0];
}

namespace {

Sketch sketch_pixel(const LidarCube& cube, std::uint32_t i, std::uint32_t j, const FrequencySet& freqs) {
  SketchState state(freqs);
  const auto counts = cube.pixel(i, j);
  for (std::uint32_t t = 0; t < counts.size(); ++t)
    if (counts[t]) state.add(t, static_cast<double>(counts[t]));
  if (state.count() == 0) {
    Sketch s;
    s.freqs = freqs;
    s.z.assign(freqs.size(), Complex(0.0, 0.0));
    return s;
  }
  return state.finalize();
}

}  // namespace

std::vector<Sketch> sketch_cube(const LidarCube& cube, const FrequencySet& freqs) {
  const long long pixels = static_cast<long long>(cube.rows()) * cube.cols();
  std::vector<Sketch> out(static_cast<std::size_t>(pixels));
  ParallelError error;
#pragma omp parallel for schedule(dynamic, 8)
  for (long long p = 0; p < pixels; ++p)
    error.run([&] {
      out[p] = sketch_pixel(cube, static_cast<std::uint32_t>(p / cube.cols()),
                            static_cast<std::uint32_t>(p % cube.cols()), freqs);
    });
  error.rethrow();
  return out;
}

std::vector<Sketch> sketch_cube_serial(const LidarCube& cube, const FrequencySet& freqs) {
  std::vector<Sketch> out;
  out.reserve(std::size_t(cube.rows()) * cube.cols());
  for (std::uint32_t i = 0; i < cube.rows(); ++i)
    for (std::uint32_t j = 0; j < cube.cols(); ++j) out.push_back(sketch_pixel(cube, i, j, freqs));
  return out;
}

}  // namespace sketchlidar
