#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <system_error>

#include "lattice_burgers/error.hpp"

namespace lattice_burgers {

/// Neumaier compensated summation.
class NeumaierSum {
 public:
  NeumaierSum& operator+=(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Shortest round-trip decimal form.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || text.empty())
    throw Error(ErrorKind::config, "cannot parse " + what + " '" + text + "' as a number");
  return value;
}

inline long long parse_integer(const std::string& text, const std::string& what) {
  long long value = 0;
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(text.data(), last, value);
  if (res.ec != std::errc() || res.ptr != last || text.empty())
    throw Error(ErrorKind::config, "cannot parse " + what + " '" + text + "' as an integer");
  return value;
}

}  // namespace lattice_burgers
