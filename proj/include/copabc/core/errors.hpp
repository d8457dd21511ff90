#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace copabc {

// Raised when a computation cannot produce a usable number (singular systems,
// non-convergence without fallback, non-finite input where finite is required).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by a simulator to request that the row be redrawn.
class simulation_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningSink = std::function<void(const std::string&)>;

namespace detail {

inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) {
    std::cerr << "copabc warning: " << msg << '\n';
  };
  return sink;
}

}  // namespace detail

/// Replace the process-wide warning sink. Passing an empty function silences
/// warnings. Returns the previous sink.
inline WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(detail::warning_mutex());
  return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

// RAII helper that silences warnings for its lifetime.
class ScopedWarningSink {
 public:
  explicit ScopedWarningSink(WarningSink sink = {}) : previous_(set_warning_sink(std::move(sink))) {}
  ~ScopedWarningSink() { set_warning_sink(std::move(previous_)); }
  ScopedWarningSink(const ScopedWarningSink&) = delete;
  ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

 private:
  WarningSink previous_;
};

inline void require(bool condition, const std::string& msg) {
  if (!condition) throw std::invalid_argument(msg);
}

}  // namespace copabc
