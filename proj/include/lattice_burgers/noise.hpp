#pragma once

// Spatially correlated, temporally white Gaussian noise aggregated over grid
// cells. Cell increments F(dt, I_k) are jointly Gaussian with covariance
// dt * C, where C_kj is the double integral of the correlation kernel f over
// I_k x I_j.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lattice_burgers/error.hpp"
#include "lattice_burgers/grid.hpp"
#include "lattice_burgers/numerics.hpp"
#include "lattice_burgers/rng.hpp"

namespace lattice_burgers {

class CorrelationKernel {
 public:
  using Evaluator = std::function<double(std::span<const double>, std::span<const double>)>;
  /// g with f(x, y) = g(x - y).
  using Profile = std::function<double(std::span<const double>)>;

  CorrelationKernel(std::string name, Evaluator f, double sup_bound)
      : name_(std::move(name)), f_(std::move(f)), sup_(sup_bound) {}

  static CorrelationKernel stationary(std::string name, Profile g, double sup_bound) {
    CorrelationKernel k(std::move(name), [g](auto x, auto y) {
      std::vector<double> r(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) r[j] = x[j] - y[j];
      return g(r);
    }, sup_bound);
    k.profile_ = std::move(g);
    return k;
  }

  double operator()(std::span<const double> x, std::span<const double> y) const { return f_(x, y); }
  double sup_bound() const noexcept { return sup_; }
  const std::string& name() const noexcept { return name_; }
  bool is_constant() const noexcept { return constant_; }
  /// Empty unless the kernel is stationary.
  const Profile& profile() const noexcept { return profile_; }

  static CorrelationKernel constant(double c0) {
    if (!(c0 >= 0.0) || !std::isfinite(c0))
      throw Error(ErrorKind::parameter, "constant kernel level must be finite and >= 0");
    CorrelationKernel k("constant:" + format_double(c0), [c0](auto, auto) { return c0; }, c0);
    k.constant_ = true;
    return k;
  }

  /// exp(-|x - y| / ell)
  static CorrelationKernel exponential(double ell) {
    require_length(ell);
    return stationary("exp:" + format_double(ell), [ell](auto r) { return std::exp(-norm(r) / ell); }, 1.0);
  }

  /// exp(-|x - y|^2 / ell^2)
  static CorrelationKernel gaussian(double ell) {
    require_length(ell);
    return stationary("gaussian:" + format_double(ell),
                      [ell](auto r) {
                        const double q = norm(r) / ell;
                        return std::exp(-q * q);
                      },
                      1.0);
  }

  /// `constant:<c0>`, `exp:<ell>` or `gaussian:<ell>`.
  static CorrelationKernel parse(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string tag = spec.substr(0, colon);
    if (colon == std::string::npos)
      throw Error(ErrorKind::config, "kernel spec '" + spec + "' needs a parameter, e.g. constant:1, exp:0.5");
    const double value = parse_double(spec.substr(colon + 1), "kernel parameter");
    if (tag == "constant") return constant(value);
    if (tag == "exp") return exponential(value);
    if (tag == "gaussian") return gaussian(value);
    throw Error(ErrorKind::config, "unknown kernel '" + tag + "' (expected constant, exp or gaussian)");
  }

  static double norm(std::span<const double> r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s);
  }

  static double distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
    return std::sqrt(s);
  }

 private:
  static void require_length(double ell) {
    if (!(ell > 0.0) || !std::isfinite(ell)) throw Error(ErrorKind::parameter, "kernel length scale must be > 0");
  }

  std::string name_;
  Evaluator f_;
  Profile profile_;
  double sup_;
  bool constant_ = false;
};

/// Checks symmetry and the declared bound on a regular sample of point pairs.
inline void validate_kernel(const CorrelationKernel& f, int d, int samples_per_axis = 5) {
  GridSpec probe(d, samples_per_axis + 1);
  std::vector<double> x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
  for (std::size_t a = 0; a < probe.N(); ++a) {
    node_point(a, probe, x);
    for (std::size_t b = 0; b < probe.N(); ++b) {
      node_point(b, probe, y);
      const double fxy = f(x, y);
      const double fyx = f(y, x);
      if (std::abs(fxy - fyx) > 1e-12) throw Error(ErrorKind::kernel, "kernel " + f.name() + " is not symmetric");
      if (fxy > f.sup_bound() * (1.0 + 1e-12))
        throw Error(ErrorKind::kernel, "kernel " + f.name() + " exceeds its declared supremum");
    }
  }
}

namespace detail {

// Tensor midpoint rule with m points per axis per cell.
inline Eigen::MatrixXd midpoint_covariance(const CorrelationKernel& f, const GridSpec& g, int m) {
  const auto d = static_cast<std::size_t>(g.d());
  const std::size_t N = g.N();
  const double inv_vol2 = std::pow(static_cast<double>(g.n()), 2.0 * g.d());
  std::size_t per_cell = 1;
  for (std::size_t j = 0; j < d; ++j) per_cell *= static_cast<std::size_t>(m);

  // Midpoints of the m^d sub-cells of every cell, flattened [cell][point][axis].
  std::vector<double> pts(N * per_cell * d);
  std::vector<double> x(d);
  for (std::size_t k = 0; k < N; ++k) {
    node_point(k, g, x);  // lower corner of I_k
    for (std::size_t p = 0; p < per_cell; ++p) {
      std::size_t rest = p;
      for (std::size_t j = 0; j < d; ++j) {
        const auto l = static_cast<double>(rest % static_cast<std::size_t>(m));
        rest /= static_cast<std::size_t>(m);
        pts[(k * per_cell + p) * d + j] = x[j] + (l + 0.5) / (static_cast<double>(m) * g.n());
      }
    }
  }

  const double pairs = static_cast<double>(per_cell) * static_cast<double>(per_cell);
  Eigen::MatrixXd C(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t j = 0; j < N; ++j) {
      NeumaierSum acc;
      for (std::size_t p = 0; p < per_cell; ++p) {
        std::span<const double> xp(&pts[(k * per_cell + p) * d], d);
        for (std::size_t q = 0; q < per_cell; ++q) acc += f(xp, std::span<const double>(&pts[(j * per_cell + q) * d], d));
      }
      C(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = acc.value() / pairs / inv_vol2;
    }
  }
  return C;
}

struct GaussRule {
  std::vector<double> nodes, weights;
};

// m-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_m.
inline GaussRule gauss_legendre(int m) {
  GaussRule r;
  const auto um = static_cast<unsigned>(m);
  for (int i = 1; i <= m; ++i) {
    double x = std::cos(std::numbers::pi * (i - 0.25) / (m + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double p = std::legendre(um, x);
      dp = m * (x * p - std::legendre(um - 1, x)) / (x * x - 1.0);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double pm1 = std::legendre(um - 1, x);
    dp = m * (x * std::legendre(um, x) - pm1) / (x * x - 1.0);
    r.nodes.push_back(x);
    r.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
  }
  return r;
}

// Stationary kernels: C_kj = int g(r) prod_a (h - |r_a - o_a h|)_+ dr with
// o = k - j, evaluated once per distinct offset.
inline Eigen::MatrixXd offset_covariance(const CorrelationKernel& f, const GridSpec& g, int m) {
  const auto d = static_cast<std::size_t>(g.d());
  const std::size_t N = g.N();
  const double h = 1.0 / g.n();
  // Nodes s in [-1, 0] and [0, 1] with weight w (1 - |s|).
  std::vector<double> s1, w1;
  const GaussRule gl = gauss_legendre(m);
  for (double side : {-1.0, 1.0})
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double s = side * 0.5 * (gl.nodes[i] + 1.0);
      s1.push_back(s);
      w1.push_back(0.5 * gl.weights[i] * (1.0 - std::abs(s)));
    }
  const std::size_t q = s1.size();
  std::size_t tensor = 1;
  for (std::size_t a = 0; a < d; ++a) tensor *= q;

  const int span = g.side() - 1;  // offsets per axis in [-span, span]
  const auto width = static_cast<std::size_t>(2 * span + 1);
  std::size_t offsets = 1;
  for (std::size_t a = 0; a < d; ++a) offsets *= width;
  const double vol2 = std::pow(h, 2.0 * g.d());
  const double bound = f.sup_bound() * vol2;
  std::vector<double> table(offsets);
  std::vector<double> r(d);
  for (std::size_t o = 0; o < offsets; ++o) {
    std::vector<int> off(d);
    std::size_t rest = o;
    for (std::size_t a = 0; a < d; ++a) {
      off[a] = static_cast<int>(rest % width) - span;
      rest /= width;
    }
    NeumaierSum acc;
    for (std::size_t t = 0; t < tensor; ++t) {
      std::size_t tr = t;
      double w = 1.0;
      for (std::size_t a = 0; a < d; ++a) {
        const std::size_t i = tr % q;
        tr /= q;
        r[a] = (off[a] + s1[i]) * h;
        w *= w1[i];
      }
      acc += w * f.profile()(r);
    }
    table[o] = std::min(acc.value() * vol2, bound);
  }

  Eigen::MatrixXd C(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (std::size_t k = 1; k <= N; ++k) {
    const MultiIndex mk = to_multi(k, g);
    for (std::size_t j = 1; j <= N; ++j) {
      const MultiIndex mj = to_multi(j, g);
      std::size_t o = 0;
      for (std::size_t a = d; a-- > 0;) o = o * width + static_cast<std::size_t>(mk.at(static_cast<int>(a) + 1) - mj.at(static_cast<int>(a) + 1) + span);
      C(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j - 1)) = table[o];
    }
  }
  return C;
}

}  // namespace detail

/// C_kj = int_{I_k} int_{I_j} f(x, y) dx dy. A constant kernel c0 gives exactly
/// c0 / n^(2d). Stationary kernels integrate g(x - y) against the overlap
/// weight of the two cells with m Gauss-Legendre nodes per half-axis; the
/// result does not depend on where the kink of g sits. Other kernels use the
/// tensor midpoint rule with m points per axis per cell.
inline Eigen::MatrixXd cell_covariance(const CorrelationKernel& f, const GridSpec& g, int m = 4) {
  if (m < 1) throw Error(ErrorKind::parameter, "quadrature refinement m must be >= 1");
  const std::size_t N = g.N();
  if (f.is_constant()) {
    const auto d = static_cast<std::size_t>(g.d());
    const double c0 = f(std::vector<double>(d, 0.5), std::vector<double>(d, 0.5));
    const double inv_vol2 = std::pow(static_cast<double>(g.n()), 2.0 * g.d());
    return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N), c0 / inv_vol2);
  }
  Eigen::MatrixXd C = f.profile() ? detail::offset_covariance(f, g, m) : detail::midpoint_covariance(f, g, m);
  const double scale = C.cwiseAbs().maxCoeff();
  if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    throw Error(ErrorKind::kernel, "cell covariance of " + f.name() + " is not symmetric");
  return 0.5 * (C + C.transpose());
}

struct CovarianceFactor {
  Eigen::MatrixXd L;
  double jitter = 0.0;
};

inline constexpr double kJitterLadder[] = {0.0, 1e-14, 1e-12, 1e-10};

namespace detail {

// Plain Cholesky; false as soon as a pivot is not strictly positive.
inline bool try_cholesky(const Eigen::MatrixXd& C, double jitter, Eigen::MatrixXd& L) {
  const Eigen::Index N = C.rows();
  L = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    double pivot = C(j, j) + jitter;
    for (Eigen::Index k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
    if (!(pivot > 0.0)) return false;
    L(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < N; ++i) {
      double v = C(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / L(j, j);
    }
  }
  return true;
}

}  // namespace detail

/// Lower-triangular L with L L^T = C + eps I, eps the first rung of the
/// jitter ladder {0, 1e-14, 1e-12, 1e-10} at which Cholesky succeeds.
inline CovarianceFactor factorize(const Eigen::MatrixXd& C) {
  if (C.rows() != C.cols()) throw Error(ErrorKind::shape, "covariance matrix is not square");
  const double scale = C.size() ? C.cwiseAbs().maxCoeff() : 0.0;
  if (C.size() && (C - C.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    throw Error(ErrorKind::kernel, "covariance matrix is not symmetric");
  CovarianceFactor out;
  for (const double eps : kJitterLadder) {
    if (detail::try_cholesky(C, eps, out.L)) {
      out.jitter = eps;
      return out;
    }
  }
  throw Error(ErrorKind::not_psd,
              "Cholesky failed even with jitter 1e-10; the kernel does not define a covariance on this grid");
}

class NoiseModel {
 public:
  NoiseModel(GridSpec grid, Eigen::MatrixXd C, double sup_bound) : grid_(grid), C_(std::move(C)), sup_(sup_bound) {
    if (static_cast<std::size_t>(C_.rows()) != grid_.N())
      throw Error(ErrorKind::shape, "covariance size does not match the grid");
    auto factor = factorize(C_);
    L_ = std::move(factor.L);
    jitter_ = factor.jitter;
    const auto N = grid_.N();
    packed_.reserve(N * (N + 1) / 2);
    for (Eigen::Index i = 0; i < L_.rows(); ++i)
      for (Eigen::Index j = 0; j <= i; ++j) packed_.push_back(L_(i, j));
  }

  NoiseModel(const CorrelationKernel& f, GridSpec grid, int m = 4) : NoiseModel(grid, cell_covariance(f, grid, m), f.sup_bound()) {}

  const GridSpec& grid() const noexcept { return grid_; }
  const Eigen::MatrixXd& covariance() const noexcept { return C_; }
  const Eigen::MatrixXd& factor() const noexcept { return L_; }
  double jitter() const noexcept { return jitter_; }
  /// Rows of L, lower triangle only, row-major.
  std::span<const double> packed_factor() const noexcept { return packed_; }
  double sup_bound() const noexcept { return sup_; }

  /// Largest C_kk relative to sup f * n^(-2d); at most 1 for a valid model.
  double variance_bound_ratio() const {
    const double bound = sup_ / std::pow(static_cast<double>(grid_.n()), 2.0 * grid_.d());
    if (bound == 0.0) return C_.diagonal().maxCoeff() > 0.0 ? INFINITY : 0.0;
    return C_.diagonal().maxCoeff() / bound;
  }

 private:
  GridSpec grid_;
  Eigen::MatrixXd C_;
  Eigen::MatrixXd L_;
  std::vector<double> packed_;
  double jitter_ = 0.0;
  double sup_;
};

/// sqrt(dt) L z with z standard normal; `z` is caller-provided scratch.
inline void sample_increment(const NoiseModel& model, double dt, Rng& rng, std::span<double> out, std::span<double> z) {
  std::normal_distribution<double> normal;
  const auto N = out.size();
  for (std::size_t i = 0; i < N; ++i) z[i] = normal(rng);
  const double scale = std::sqrt(dt);
  const double* row = model.packed_factor().data();
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += row[j] * z[j];
    row += i + 1;
    out[i] = scale * acc;
  }
}

inline std::vector<double> sample_increment(const NoiseModel& model, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw Error(ErrorKind::parameter, "time step must be > 0");
  std::vector<double> out(model.grid().N()), z(model.grid().N());
  sample_increment(model, dt, rng, out, z);
  return out;
}

}  // namespace lattice_burgers
