#include "sketchlidar/io.hpp"

#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iterator>
#include <sstream>

#include "sketchlidar/errors.hpp"

namespace sketchlidar {

namespace {

constexpr std::uint32_t kVersion = 1;

// ---- encoding ---------------------------------------------------------------------------------

template <class U>
void put(std::string& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

class Cursor {
 public:
  Cursor(const std::string& data, std::uint64_t base = 0) : data_(data), base_(base) {}

  std::uint64_t offset() const { return base_ + pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void magic(const char* expected) {
    need(4, "magic");
    if (std::memcmp(data_.data() + pos_, expected, 4) != 0)
      throw ParseError(offset(), std::string("bad magic, expected \"") + expected + "\"");
    pos_ += 4;
  }

  template <class U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
    pos_ += sizeof(U);
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }

  void version() {
    const std::uint64_t at = offset();
    const auto v = get<std::uint32_t>("version");
    if (v != kVersion) throw ParseError(at, "unsupported version " + std::to_string(v));
  }

  void need(std::size_t bytes, const char* what) const {
    if (remaining() < bytes) throw ParseError(offset(), std::string("truncated file while reading ") + what);
  }

  void finish() const {
    if (remaining() != 0) throw ParseError(offset(), "trailing bytes after payload");
  }

 private:
  const std::string& data_;
  std::uint64_t base_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    try {
      body(out);
    } catch (...) {
      out.close();
      std::remove(tmp.c_str());
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw IoError("write failed for '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("cannot move output into place at '" + path + "': " + ec.message());
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void encode_sketch(std::string& out, const Sketch& s) {
  out.append("SKZ1", 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, s.freqs.T);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.freqs.size()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(s.freqs.scheme));
  put<std::uint64_t>(out, s.freqs.scheme == FrequencyScheme::Truncated ? 0 : s.freqs.seed);
  put<std::uint64_t>(out, s.n);
  for (auto j : s.freqs.indices) put<std::uint32_t>(out, j);
  for (const auto& z : s.z) {
    put_f64(out, z.real());
    put_f64(out, z.imag());
  }
}

Sketch decode_sketch(Cursor& c) {
  c.magic("SKZ1");
  c.version();
  Sketch s;
  const std::uint64_t t_at = c.offset();
  s.freqs.T = c.get<std::uint32_t>("T");
  if (s.freqs.T < 2) throw ParseError(t_at, "T must be at least 2");
  const std::uint64_t m_at = c.offset();
  const auto m = c.get<std::uint32_t>("m");
  if (m < 1 || m > s.freqs.T - 1) throw ParseError(m_at, "m outside [1, T-1]");
  const std::uint64_t scheme_at = c.offset();
  const auto scheme = c.get<std::uint8_t>("scheme");
  if (scheme > 1) throw ParseError(scheme_at, "unknown frequency scheme " + std::to_string(scheme));
  s.freqs.scheme = static_cast<FrequencyScheme>(scheme);
  s.freqs.seed = c.get<std::uint64_t>("seed");
  s.n = c.get<std::uint64_t>("n");
  c.need(std::size_t(m) * 20, "frequency payload");
  for (std::uint32_t k = 0; k < m; ++k) {
    const std::uint64_t at = c.offset();
    const auto j = c.get<std::uint32_t>("index");
    if (j < 1 || j >= s.freqs.T) throw ParseError(at, "frequency index outside [1, T-1]");
    s.freqs.indices.push_back(j);
  }
  for (std::uint32_t k = 0; k < m; ++k) {
    const double re = c.f64("re");
    const double im = c.f64("im");
    s.z.emplace_back(re, im);
  }
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& contents) {
  atomic_write(path, [&](std::ostream& out) { out.write(contents.data(), static_cast<std::streamsize>(contents.size())); });
}

std::string file_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char buf[4];
  if (!in.read(buf, 4)) return "";
  return std::string(buf, 4);
}

// ---- streams ----------------------------------------------------------------------------------

void write_stream(const std::string& path, const PhotonStream& stream) {
  for (auto x : stream.stamps)
    if (x >= stream.T) throw InvalidArgument("time-stamp outside [0, T)");
  atomic_write(path, [&](std::ostream& out) {
    std::string head("SKL1", 4);
    put<std::uint32_t>(head, kVersion);
    put<std::uint32_t>(head, stream.T);
    put<std::uint64_t>(head, stream.stamps.size());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    std::string chunk;
    constexpr std::size_t kChunk = 1 << 16;
    for (std::size_t i = 0; i < stream.stamps.size(); i += kChunk) {
      chunk.clear();
      const std::size_t end = std::min(stream.stamps.size(), i + kChunk);
      for (std::size_t k = i; k < end; ++k) put<std::uint32_t>(chunk, stream.stamps[k]);
      out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    }
  });
}

PhotonStream read_stream(const std::string& path) {
  StreamReader reader(path);
  PhotonStream s;
  s.T = reader.bins();
  s.stamps.reserve(reader.declared());
  std::vector<std::uint32_t> buf(1 << 16);
  while (const std::size_t got = reader.read(buf)) s.stamps.insert(s.stamps.end(), buf.begin(), buf.begin() + got);
  return s;
}

void write_stream_csv(const std::string& path, const PhotonStream& stream) {
  atomic_write(path, [&](std::ostream& out) {
    out << "# T=" << stream.T << '\n';
    for (auto x : stream.stamps) out << x << '\n';
  });
}

PhotonStream read_stream_csv(const std::string& path) { return read_stream(path); }

StreamReader::StreamReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open '" + path + "'");
  char magic[4] = {0, 0, 0, 0};
  in_.read(magic, 4);
  if (in_.gcount() == 4 && std::memcmp(magic, "SKL1", 4) == 0) {
    std::string head(16, '\0');
    in_.read(head.data(), 16);
    head.resize(static_cast<std::size_t>(in_.gcount()));
    Cursor c(head, 4);
    c.version();
    const std::uint64_t t_at = c.offset();
    T_ = c.get<std::uint32_t>("T");
    if (T_ == 0) throw ParseError(t_at, "T must be positive");
    n_ = c.get<std::uint64_t>("n");
    offset_ = 20;
    return;
  }
  // Text form: "# T=<T>" on the first line.
  in_.clear();
  in_.seekg(0);
  csv_ = true;
  std::string line;
  if (!std::getline(in_, line)) throw ParseError(0, "empty stream file");
  line_ = 1;
  const std::string t = trim(line);
  if (t.rfind("# T=", 0) != 0 && t.rfind("#T=", 0) != 0)
    throw ParseError(0, "stream file starts with neither magic \"SKL1\" nor a \"# T=\" header");
  try {
    const long long v = std::stoll(t.substr(t.find('=') + 1));
    if (v <= 0 || v > 0xFFFFFFFFll) throw std::out_of_range("T");
    T_ = static_cast<std::uint32_t>(v);
  } catch (const std::logic_error&) {
    throw ParseError(t.find('=') + 1, "invalid T in stream header");
  }
  offset_ = line.size() + 1;
}

std::size_t StreamReader::read(std::span<std::uint32_t> out) {
  std::size_t got = 0;
  if (!csv_) {
    const std::uint64_t left = n_ - consumed_;
    const std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(left, out.size()));
    if (want == 0) {
      if (in_.peek() != std::char_traits<char>::eof()) throw ParseError(offset_, "trailing bytes after payload");
      return 0;
    }
    raw_.resize(want * 4);
    in_.read(reinterpret_cast<char*>(raw_.data()), static_cast<std::streamsize>(raw_.size()));
    const auto bytes = static_cast<std::size_t>(in_.gcount());
    if (bytes < raw_.size())
      throw ParseError(offset_ + bytes, "truncated file: header declares " + std::to_string(n_) + " stamps");
    for (std::size_t k = 0; k < want; ++k) {
      const std::uint32_t x = std::uint32_t(raw_[4 * k]) | std::uint32_t(raw_[4 * k + 1]) << 8 |
                              std::uint32_t(raw_[4 * k + 2]) << 16 | std::uint32_t(raw_[4 * k + 3]) << 24;
      if (x >= T_) throw ParseError(offset_ + 4 * k, "time-stamp " + std::to_string(x) + " outside [0, T)");
      out[k] = x;
    }
    offset_ += raw_.size();
    consumed_ += want;
    return want;
  }
  std::string line;
  while (got < out.size() && std::getline(in_, line)) {
    ++line_;
    const std::uint64_t at = offset_;
    offset_ += line.size() + 1;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t used = 0;
    long long v;
    try {
      v = std::stoll(t, &used);
    } catch (const std::logic_error&) {
      throw ParseError(at, "line " + std::to_string(line_) + " is not an integer time-stamp");
    }
    if (used != t.size() || v < 0 || v >= T_)
      throw ParseError(at, "line " + std::to_string(line_) + ": time-stamp outside [0, T)");
    out[got++] = static_cast<std::uint32_t>(v);
    ++consumed_;
  }
  return got;
}

// ---- cubes ------------------------------------------------------------------------------------

void write_cube(const std::string& path, const LidarCube& cube) {
  std::string out("SKC1", 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, cube.rows());
  put<std::uint32_t>(out, cube.cols());
  put<std::uint32_t>(out, cube.bins());
  out.reserve(out.size() + cube.counts().size() * 4);
  for (auto c : cube.counts()) put<std::uint32_t>(out, c);
  write_file_atomic(path, out);
}

LidarCube read_cube(const std::string& path) {
  const std::string data = slurp(path);
  Cursor c(data);
  c.magic("SKC1");
  c.version();
  const std::uint64_t dims_at = c.offset();
  const auto rows = c.get<std::uint32_t>("N_r");
  const auto cols = c.get<std::uint32_t>("N_c");
  const auto T = c.get<std::uint32_t>("T");
  if (rows == 0 || cols == 0 || T == 0) throw ParseError(dims_at, "cube dimensions must be positive");
  const std::uint64_t cells = std::uint64_t(rows) * cols * T;
  if (cells * 4 != c.remaining())
    throw ParseError(c.offset() + std::min<std::uint64_t>(cells * 4, c.remaining()),
                     "payload holds " + std::to_string(c.remaining()) + " bytes, header implies " +
                         std::to_string(cells * 4));
  LidarCube cube(rows, cols, T);
  auto counts = cube.counts();
  for (std::uint64_t k = 0; k < cells; ++k) counts[k] = c.get<std::uint32_t>("counts");
  return cube;
}

// ---- sketches ---------------------------------------------------------------------------------

void write_sketch(const std::string& path, const Sketch& sketch) {
  std::string out;
  encode_sketch(out, sketch);
  write_file_atomic(path, out);
}

Sketch read_sketch(const std::string& path) {
  const std::string data = slurp(path);
  Cursor c(data);
  Sketch s = decode_sketch(c);
  c.finish();
  return s;
}

void write_sketch_csv(const std::string& path, const Sketch& sketch) {
  std::ostringstream out;
  out << "# T=" << sketch.freqs.T << '\n';
  out << "# m=" << sketch.freqs.size() << '\n';
  out << "# scheme=" << (sketch.freqs.scheme == FrequencyScheme::Truncated ? "truncated" : "random") << '\n';
  out << "# seed=" << (sketch.freqs.scheme == FrequencyScheme::Truncated ? 0 : sketch.freqs.seed) << '\n';
  out << "# n=" << sketch.n << '\n';
  out << "j, re, im\n";
  for (std::size_t k = 0; k < sketch.m(); ++k)
    out << sketch.freqs.indices[k] << ',' << fmt_double(sketch.z[k].real()) << ',' << fmt_double(sketch.z[k].imag())
        << '\n';
  write_file_atomic(path, out.str());
}

Sketch read_sketch_csv(const std::string& path) {
  const std::string data = slurp(path);
  std::istringstream in(data);
  Sketch s;
  std::string line;
  std::uint64_t offset = 0;
  bool header = false;
  std::int64_t m = -1;
  while (std::getline(in, line)) {
    const std::uint64_t at = offset;
    offset += line.size() + 1;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto eq = t.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(t.substr(1, eq - 1)), val = trim(t.substr(eq + 1));
      try {
        if (key == "T") s.freqs.T = static_cast<std::uint32_t>(std::stoul(val));
        else if (key == "m") m = std::stoll(val);
        else if (key == "seed") s.freqs.seed = std::stoull(val);
        else if (key == "n") s.n = std::stoull(val);
        else if (key == "scheme") {
          if (val == "truncated") s.freqs.scheme = FrequencyScheme::Truncated;
          else if (val == "random") s.freqs.scheme = FrequencyScheme::Random;
          else throw ParseError(at, "unknown scheme '" + val + "'");
        }
      } catch (const std::logic_error&) {
        throw ParseError(at, "invalid value for '" + key + "'");
      }
      continue;
    }
    if (!header) {
      std::string compact;
      for (char ch : t)
        if (ch != ' ') compact.push_back(ch);
      if (compact != "j,re,im") throw ParseError(at, "expected header \"j, re, im\"");
      header = true;
      continue;
    }
    std::istringstream row(t);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
      throw ParseError(at, "expected three comma-separated fields");
    try {
      const unsigned long j = std::stoul(a);
      if (j < 1 || (s.freqs.T && j >= s.freqs.T)) throw ParseError(at, "frequency index outside [1, T-1]");
      s.freqs.indices.push_back(static_cast<std::uint32_t>(j));
      s.z.emplace_back(std::stod(b), std::stod(c));
    } catch (const std::logic_error&) {
      throw ParseError(at, "malformed numeric field");
    }
  }
  if (s.freqs.T < 2) throw ParseError(0, "missing or invalid '# T=' metadata");
  if (!header) throw ParseError(offset, "missing \"j, re, im\" header");
  if (s.z.empty() || (m >= 0 && static_cast<std::size_t>(m) != s.z.size()))
    throw ParseError(offset, "row count does not match '# m='");
  if (s.freqs.scheme == FrequencyScheme::Truncated) s.freqs.seed = 0;
  return s;
}

void write_sketch_cube(const std::string& path, std::uint32_t rows, std::uint32_t cols,
                       std::span<const Sketch> sketches) {
  if (std::size_t(rows) * cols != sketches.size()) throw InvalidArgument("sketch count does not match N_r x N_c");
  std::string out("SKZC", 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, rows);
  put<std::uint32_t>(out, cols);
  for (const auto& s : sketches) encode_sketch(out, s);
  write_file_atomic(path, out);
}

SketchCube read_sketch_cube(const std::string& path) {
  const std::string data = slurp(path);
  Cursor c(data);
  c.magic("SKZC");
  c.version();
  SketchCube sc;
  const std::uint64_t at = c.offset();
  sc.rows = c.get<std::uint32_t>("N_r");
  sc.cols = c.get<std::uint32_t>("N_c");
  if (sc.rows == 0 || sc.cols == 0) throw ParseError(at, "dimensions must be positive");
  for (std::uint64_t p = 0; p < std::uint64_t(sc.rows) * sc.cols; ++p) sc.sketches.push_back(decode_sketch(c));
  c.finish();
  return sc;
}

}  // namespace sketchlidar
