#pragma once

// OpenMP kernels with single-threaded reference versions used by the tests and benchmarks.

#include <span>
#include <vector>

#include "sketchlidar/simulate.hpp"
#include "sketchlidar/sketch.hpp"

namespace sketchlidar {

/// Thread-local SketchStates over contiguous chunks, merged in chunk order.
SketchState sketch_stamps(std::span<const std::uint32_t> stamps, const FrequencySet& freqs);
SketchState sketch_stamps_serial(std::span<const std::uint32_t> stamps, const FrequencySet& freqs);

/// One sketch per pixel, row-major. Pixels without photons yield a sketch with n == 0 and z == 0.
std::vector<Sketch> sketch_cube(const LidarCube& cube, const FrequencySet& freqs);
std::vector<Sketch> sketch_cube_serial(const LidarCube& cube, const FrequencySet& freqs);

/// Number of OpenMP threads used by the parallel kernels.
int thread_count();
void set_thread_count(int n);

}  // namespace sketchlidar
