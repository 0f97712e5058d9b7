#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace canopy {

/// Every failure surfaced by the library is a canopy::Error carrying a
/// human-readable message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

/// Non-fatal conditions (too few values to screen, all-outlier cells, ...)
/// are routed here. Tests swap the handler to capture them.
inline void warn(const std::string& message) {
  if (warning_handler()) warning_handler()(message);
}

/// Installs `handler` for the lifetime of the guard.
class ScopedWarningHandler {
 public:
  explicit ScopedWarningHandler(WarningHandler handler)
      : previous_(std::exchange(warning_handler(), std::move(handler))) {}
  ~ScopedWarningHandler() { warning_handler() = std::move(previous_); }
  ScopedWarningHandler(const ScopedWarningHandler&) = delete;
  ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
  WarningHandler previous_;
};

}  // namespace canopy
