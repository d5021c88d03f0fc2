#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sketchlidar {

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sketch was finalized (or built from a histogram) with zero photons.
class EmptySketchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The estimator needs a frequency index the sketch does not carry.
class MissingFrequencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sketch value at the fundamental is numerically zero, so its phase is undefined.
class UndefinedPhaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// p(x|theta) vanishes where its derivative does not; the full-data FIM is undefined.
class SingularModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fisher information is singular: the parameters cannot be identified from the statistic.
class NonIdentifiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `offset()` is the byte (binary) or line (text) where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::uint64_t offset, const std::string& what)
      : std::runtime_error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sketchlidar
