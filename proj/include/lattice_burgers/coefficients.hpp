#pragma once

// Diffusion coefficients sigma on [0, 1] with sigma(0) = sigma(1) = 0 and
// Hoelder order alpha in [1/2, 1).

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lattice_burgers/error.hpp"
#include "lattice_burgers/numerics.hpp"

namespace lattice_burgers {

class SigmaCoefficient {
 public:
  using Evaluator = std::function<double(double)>;

  SigmaCoefficient(std::string name, Evaluator eval, double alpha, bool identically_zero = false)
      : name_(std::move(name)), eval_(std::move(eval)), alpha_(alpha), zero_(identically_zero) {}

  double operator()(double x) const {
    assert(x >= 0.0 && x <= 1.0);
    return eval_(x);
  }

  double alpha() const noexcept { return alpha_; }
  const std::string& name() const noexcept { return name_; }
  bool is_zero() const noexcept { return zero_; }
  /// False for sigma == 0, which is outside the hypothesis class but handy
  /// for deterministic runs.
  bool within_hypothesis() const noexcept { return !zero_ && alpha_ >= 0.5 && alpha_ < 1.0; }

 private:
  std::string name_;
  Evaluator eval_;
  double alpha_;
  bool zero_;
};

/// sqrt(x (1 - x)), the stepping-stone coefficient, alpha = 1/2.
inline SigmaCoefficient stepping_stone() {
  return {"stepping-stone", [](double x) { return std::sqrt(x * (1.0 - x)); }, 0.5};
}

/// -x^gamma log x with value 0 at x = 0, for gamma in (1/2, 1]. The declared
/// order is gamma - eps, eps = min(0.01, (gamma - 1/2)/2).
inline SigmaCoefficient log_power(double gamma) {
  if (!(gamma > 0.5 && gamma <= 1.0))
    throw Error(ErrorKind::parameter, "log-power exponent gamma must lie in (1/2, 1], got " + format_double(gamma));
  const double eps = std::min(0.01, (gamma - 0.5) / 2.0);
  return {"log-power:" + format_double(gamma),
          [gamma](double x) { return x == 0.0 ? 0.0 : -std::pow(x, gamma) * std::log(x); }, gamma - eps};
}

inline SigmaCoefficient zero_sigma() {
  return {"zero", [](double) { return 0.0; }, 0.5, true};
}

/// User-supplied coefficient; rejects evaluators that do not vanish at 0 and 1.
inline SigmaCoefficient custom_sigma(std::string name, SigmaCoefficient::Evaluator eval, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::parameter, "Hoelder order must lie in (0, 1]");
  if (eval(0.0) != 0.0 || eval(1.0) != 0.0)
    throw Error(ErrorKind::parameter, "coefficient '" + name + "' must vanish at 0 and 1");
  return {std::move(name), std::move(eval), alpha};
}

/// `stepping-stone`, `log-power:<gamma>` or `zero`.
inline SigmaCoefficient parse_sigma(const std::string& spec) {
  if (spec == "stepping-stone") return stepping_stone();
  if (spec == "zero") return zero_sigma();
  const std::string prefix = "log-power:";
  if (spec.rfind(prefix, 0) == 0) return log_power(parse_double(spec.substr(prefix.size()), "log-power gamma"));
  throw Error(ErrorKind::config, "unknown sigma '" + spec + "' (expected stepping-stone, log-power:<gamma> or zero)");
}

/// max |sigma(x) - sigma(y)| / |x - y|^alpha over the m-point uniform grid on
/// [0, 1] (all m (m - 1) / 2 pairs).
inline double holder_estimate(const SigmaCoefficient& s, double alpha, std::size_t m) {
  if (m < 2) throw Error(ErrorKind::parameter, "holder_estimate needs m >= 2");
  std::vector<double> v(m);
  const double h = 1.0 / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) v[i] = s(i + 1 == m ? 1.0 : static_cast<double>(i) * h);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  double best = 0.0;
  for (std::size_t lag = 1; lag < m; ++lag) {
    const double w = std::pow(static_cast<double>(lag) * h, -alpha);
    if (range * w <= best) break;  // w decreases with lag, so no later pair can win
    double top = 0.0;
    for (std::size_t i = 0; i + lag < m; ++i) top = std::max(top, std::abs(v[i + lag] - v[i]));
    best = std::max(best, top * w);
  }
  return best;
}

inline double holder_estimate(const SigmaCoefficient& s, std::size_t m) { return holder_estimate(s, s.alpha(), m); }

/// max sigma(x) / min(x^alpha, (1 - x)^alpha) over x = i/m, i = 1..m-1.
inline double envelope_check(const SigmaCoefficient& s, double alpha, std::size_t m) {
  if (m < 2) throw Error(ErrorKind::parameter, "envelope_check needs m >= 2");
  double best = 0.0;
  for (std::size_t i = 1; i < m; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(m);
    const double env = std::pow(std::min(x, 1.0 - x), alpha);
    best = std::max(best, s(x) / env);
  }
  return best;
}

inline double envelope_check(const SigmaCoefficient& s, std::size_t m) { return envelope_check(s, s.alpha(), m); }

}  // namespace lattice_burgers
