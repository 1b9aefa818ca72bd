#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace amorph {

enum class ErrorKind {
  invalid_action,
  simulation_diverged,
  config,
  domain,
  shape,
  internal,
  io,
  replay_mismatch,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_action: return "invalid_action";
    case ErrorKind::simulation_diverged: return "simulation_diverged";
    case ErrorKind::config: return "config";
    case ErrorKind::domain: return "domain";
    case ErrorKind::shape: return "shape";
    case ErrorKind::internal: return "internal";
    case ErrorKind::io: return "io";
    case ErrorKind::replay_mismatch: return "replay_mismatch";
  }
  return "unknown";
}

// All library failures are reported through this one exception type; the
// kind tells callers which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(std::int64_t step_index, const std::string& what)
      : Error(ErrorKind::simulation_diverged,
              what + " at step " + std::to_string(step_index)),
        step_index_(step_index) {}

  std::int64_t step_index() const noexcept { return step_index_; }

 private:
  std::int64_t step_index_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace amorph
