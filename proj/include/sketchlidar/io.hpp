#pragma once

// File formats. Binary files are little-endian and written atomically (temporary file + rename).
//
//   stream  "SKL1" u32 version=1, u32 T, u64 n, n x u32 stamps
//   cube    "SKC1" u32 version=1, u32 N_r, u32 N_c, u32 T, N_r*N_c*T x u32 counts (row-major, t fastest)
//   sketch  "SKZ1" u32 version=1, u32 T, u32 m, u8 scheme (0 truncated, 1 random), u64 seed,
//                  u64 n, m x u32 indices, m x (f64 re, f64 im)
//   sketch cube "SKZC" u32 version=1, u32 N_r, u32 N_c, then N_r*N_c SKZ1 records, row-major
//
// Text forms: streams as "# T=<T>" followed by one stamp per line; sketches as "# key=value"
// metadata lines, a "j, re, im" header and one row per frequency.

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "sketchlidar/simulate.hpp"
#include "sketchlidar/sketch.hpp"

namespace sketchlidar {

void write_stream(const std::string& path, const PhotonStream& stream);
PhotonStream read_stream(const std::string& path);
void write_stream_csv(const std::string& path, const PhotonStream& stream);
PhotonStream read_stream_csv(const std::string& path);

/// Incremental reader for binary or CSV stream files; holds one buffer, never the whole stream.
class StreamReader {
 public:
  explicit StreamReader(const std::string& path);

  std::uint32_t bins() const noexcept { return T_; }
  /// Declared photon count (binary files only; 0 for CSV until fully read).
  std::uint64_t declared() const noexcept { return n_; }
  /// Fills `out` with up to out.size() stamps; returns the number read (0 at end of stream).
  std::size_t read(std::span<std::uint32_t> out);

 private:
  std::ifstream in_;
  bool csv_ = false;
  std::uint32_t T_ = 0;
  std::uint64_t n_ = 0, consumed_ = 0, line_ = 0;
  std::uint64_t offset_ = 0;
  std::vector<unsigned char> raw_;
};

void write_cube(const std::string& path, const LidarCube& cube);
LidarCube read_cube(const std::string& path);

void write_sketch(const std::string& path, const Sketch& sketch);
Sketch read_sketch(const std::string& path);
void write_sketch_csv(const std::string& path, const Sketch& sketch);
Sketch read_sketch_csv(const std::string& path);

void write_sketch_cube(const std::string& path, std::uint32_t rows, std::uint32_t cols,
                       std::span<const Sketch> sketches);
struct SketchCube {
  std::uint32_t rows = 0, cols = 0;
  std::vector<Sketch> sketches;
};
SketchCube read_sketch_cube(const std::string& path);

/// First four bytes of a file ("SKL1", "SKC1", ...), or "" when shorter or unreadable.
std::string file_magic(const std::string& path);

/// Writes `contents` to `path` via a temporary file and rename; throws IoError on failure.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace sketchlidar
