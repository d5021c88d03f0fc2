#pragma once

// Carries the first exception thrown inside an OpenMP loop body out of the parallel region.

#include <exception>
#include <mutex>

namespace sketchlidar {

class ParallelError {
 public:
  /// Runs f, keeping the first exception it throws.
  template <class F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }

  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
};

}  // namespace sketchlidar
