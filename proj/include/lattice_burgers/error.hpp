#pragma once

#include <stdexcept>
#include <string>

namespace lattice_burgers {

enum class ErrorKind {
  invalid_index,
  domain,
  capacity,
  shape,
  kernel,
  not_psd,
  parameter,
  numerical_blowup,
  resolution,
  statistical_power,
  sample_size,
  config,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_index: return "invalid-index";
    case ErrorKind::domain: return "domain";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::shape: return "shape";
    case ErrorKind::kernel: return "kernel";
    case ErrorKind::not_psd: return "not-positive-semidefinite";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::numerical_blowup: return "numerical-blow-up";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::statistical_power: return "statistical-power";
    case ErrorKind::sample_size: return "sample-size";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Numerical failures (blow-up, factorization) as opposed to bad input.
inline bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::numerical_blowup || kind == ErrorKind::not_psd;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lattice_burgers
