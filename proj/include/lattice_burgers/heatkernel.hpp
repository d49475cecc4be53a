#pragma once

// Transition kernel of the continuous-time random walk generated by the
// discrete Dirichlet Laplacian, scaled by the inverse cell volume:
//
//   p^n_d(t, x, y) = n^d P(Y_t = y | Y_0 = x) = n^d exp(t A)_{xy}
//
// The one-dimensional factor comes from a symmetric tridiagonal eigensolve;
// the d-dimensional kernel is the product over axes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lattice_burgers/error.hpp"
#include "lattice_burgers/grid.hpp"
#include "lattice_burgers/numerics.hpp"

namespace lattice_burgers {

class HeatKernel1D {
 public:
  explicit HeatKernel1D(int n) : n_(n) {
    if (n < 2) throw Error(ErrorKind::parameter, "heat kernel resolution must be >= 2");
    const Eigen::Index m = n - 1;
    const double n2 = static_cast<double>(n) * n;
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(m, -2.0 * n2);
    Eigen::VectorXd sub = Eigen::VectorXd::Constant(std::max<Eigen::Index>(m - 1, 0), n2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::numerical_blowup, "tridiagonal eigensolve failed");
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  int n() const noexcept { return n_; }
  /// Ascending; the last entry is the least negative.
  const Eigen::VectorXd& eigenvalues() const noexcept { return values_; }
  const Eigen::MatrixXd& eigenvectors() const noexcept { return vectors_; }
  double least_negative_eigenvalue() const { return values_(values_.size() - 1); }

  /// max |V diag(lambda) V^T - A| / max |A|
  double reconstruction_error() const {
    const Eigen::MatrixXd a = vectors_ * values_.asDiagonal() * vectors_.transpose();
    const Eigen::Index m = values_.size();
    const double n2 = static_cast<double>(n_) * n_;
    Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      ref(i, i) = -2.0 * n2;
      if (i + 1 < m) ref(i, i + 1) = ref(i + 1, i) = n2;
    }
    return (a - ref).cwiseAbs().maxCoeff() / (2.0 * n2);
  }

 private:
  int n_;
  Eigen::VectorXd values_;
  Eigen::MatrixXd vectors_;
};

struct KernelMatrix {
  Eigen::MatrixXd p;
  /// Largest negative round-off entry that was set to zero.
  double clipped = 0.0;
};

/// (n-1) x (n-1) matrix of p^n_1(t, i, j) = n exp(t A^(1))_{ij}.
inline KernelMatrix kernel_1d(double t, const HeatKernel1D& hk) {
  if (!(t >= 0.0)) throw Error(ErrorKind::parameter, "kernel time must be >= 0");
  const Eigen::VectorXd decay = (hk.eigenvalues() * t).array().exp().matrix();
  KernelMatrix out;
  out.p = static_cast<double>(hk.n()) * (hk.eigenvectors() * decay.asDiagonal() * hk.eigenvectors().transpose());
  for (Eigen::Index i = 0; i < out.p.rows(); ++i)
    for (Eigen::Index j = 0; j < out.p.cols(); ++j)
      if (out.p(i, j) < 0.0) {
        out.clipped = std::max(out.clipped, -out.p(i, j));
        out.p(i, j) = 0.0;
      }
  return out;
}

/// p^n_d(t, x, y) as the product of one-dimensional factors.
inline double kernel_d(const KernelMatrix& p1, const MultiIndex& x, const MultiIndex& y) {
  if (x.size() != y.size()) throw Error(ErrorKind::invalid_index, "kernel arguments have different dimensions");
  double v = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const int a = x.components()[j];
    const int b = y.components()[j];
    if (a < 1 || b < 1 || a > p1.p.rows() || b > p1.p.rows())
      throw Error(ErrorKind::invalid_index, "kernel argument outside the lattice");
    v *= p1.p(a - 1, b - 1);
  }
  return v;
}

inline double kernel_d(double t, const MultiIndex& x, const MultiIndex& y, const HeatKernel1D& hk) {
  return kernel_d(kernel_1d(t, hk), x, y);
}

namespace detail {

inline Eigen::MatrixXd kron_dense(const Eigen::MatrixXd& outer, const Eigen::MatrixXd& inner) {
  Eigen::MatrixXd out(outer.rows() * inner.rows(), outer.cols() * inner.cols());
  for (Eigen::Index i = 0; i < outer.rows(); ++i)
    for (Eigen::Index j = 0; j < outer.cols(); ++j)
      out.block(i * inner.rows(), j * inner.cols(), inner.rows(), inner.cols()) = outer(i, j) * inner;
  return out;
}

}  // namespace detail

/// Full N x N matrix of p^n_d(t, ., .) in linear-index order.
inline Eigen::MatrixXd kernel_d_matrix(const KernelMatrix& p1, int d) {
  Eigen::MatrixXd p = p1.p;
  for (int j = 2; j <= d; ++j) p = detail::kron_dense(p1.p, p);
  return p;
}

inline Eigen::MatrixXd kernel_d_matrix(double t, const HeatKernel1D& hk, int d) {
  return kernel_d_matrix(kernel_1d(t, hk), d);
}

/// max_{x,y} | sum_z n^-d p(t,x,z) p(s,z,y) - p(t+s,x,y) |
inline double semigroup_check(double t, double s, const HeatKernel1D& hk, int d) {
  if (!(t >= 0.0 && s >= 0.0)) throw Error(ErrorKind::parameter, "semigroup times must be >= 0");
  const Eigen::MatrixXd pt = kernel_d_matrix(t, hk, d);
  const Eigen::MatrixXd ps = kernel_d_matrix(s, hk, d);
  const Eigen::MatrixXd pts = kernel_d_matrix(t + s, hk, d);
  const double vol = std::pow(static_cast<double>(hk.n()), -d);
  return (vol * pt * ps - pts).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Weighted norm  ||phi||_(alpha)^2 = int int |phi(x)| |x - y|^-alpha |phi(y)|
// for functions constant on the lattice cells.

namespace detail {

// int_{[0,h]^2} exp(-s (u - v + c)^2) du dv
inline double gauss_cell_pair(double s, double c, double h) {
  const double reach = std::abs(c) + h;
  if (s * reach * reach < 1e-4) {
    const double m2 = c * c + h * h / 6.0;
    const double m4 = c * c * c * c + c * c * h * h + h * h * h * h / 15.0;
    return h * h * (1.0 - s * m2 + 0.5 * s * s * m4);
  }
  const double rs = std::sqrt(s);
  auto F = [&](double r) { return r * std::sqrt(std::numbers::pi) / (2.0 * rs) * std::erf(rs * r) + std::exp(-s * r * r) / (2.0 * s); };
  return std::max(0.0, F(c + h) + F(c - h) - 2.0 * F(c));
}

}  // namespace detail

/// Gaussian-mixture route of alpha_cell_weight, valid for every d >= 1.
inline double alpha_cell_weight_mixture(std::span<const int> offset, double h, double alpha) {
  double reach = 0.0;
  int zero_axes = 0;
  int touching_axes = 0;
  for (int o : offset) {
    reach = std::max(reach, (std::abs(o) + 1) * h);
    if (o == 0) ++zero_axes;
    else if (std::abs(o) == 1) ++touching_axes;
  }
  const bool far = zero_axes + touching_axes < static_cast<int>(offset.size());
  auto product = [&](double s) {
    double v = 1.0;
    for (int o : offset) v *= detail::gauss_cell_pair(s, o * h, h);
    return v;
  };
  const double a = 0.5 * alpha;

  // Lower tail s < s0: analytic, from the two-term small-s expansion of the product.
  const double s0 = 1e-4 / (reach * reach);
  double m1 = 0.0;
  for (int o : offset) m1 += o * h * o * h + h * h / 6.0;
  const double hd2 = std::pow(h, 2.0 * static_cast<double>(offset.size()));
  const double lower = hd2 * (std::pow(s0, a) / a - m1 * std::pow(s0, a + 1.0) / (a + 1.0));

  // Upper tail s > s1: per axis, exact asymptotics h sqrt(pi/s) - 1/s
  // (coincident) and 1/(2s) (touching); farther axes are exponentially small.
  const double s1 = 40.0 / (h * h);
  double upper = 0.0;
  if (!far) {
    // Expand prod over coincident axes of (h sqrt(pi) s^-1/2 - s^-1) times (2s)^-touching.
    for (int r = 0; r <= zero_axes; ++r) {
      // r factors of (-1/s), zero_axes - r factors of h sqrt(pi) s^-1/2
      double binom = 1.0;
      for (int q = 0; q < r; ++q) binom = binom * (zero_axes - q) / (q + 1);
      const double coef = binom * std::pow(-1.0, r) * std::pow(h * std::sqrt(std::numbers::pi), zero_axes - r) *
                          std::pow(0.5, touching_axes);
      const double power = 0.5 * (zero_axes - r) + r + touching_axes;  // integrand ~ s^(a - 1 - power)
      upper += coef * std::pow(s1, a - power) / (power - a);
    }
  }

  // Middle: trapezoid in log s.
  const double lo = std::log(s0);
  const double hi = std::log(s1);
  const int steps = static_cast<int>(std::ceil((hi - lo) / 0.01));
  const double dtau = (hi - lo) / steps;
  NeumaierSum mid;
  for (int k = 0; k <= steps; ++k) {
    const double tau = lo + k * dtau;
    const double s = std::exp(tau);
    const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
    mid += w * std::pow(s, a) * product(s);
  }
  return (lower + mid.value() * dtau + upper) / std::tgamma(a);
}

/// int_{I_k} int_{I_j} |x - y|^-alpha for two cells of side h whose lower
/// corners differ by offset * h (integer offsets per axis), 0 < alpha < d.
/// In one dimension this is the closed form G(c+h) + G(c-h) - 2 G(c) with
/// G(r) = |r|^(2-alpha) / ((1-alpha)(2-alpha)). For d >= 2 it uses
/// |r|^-alpha = Gamma(alpha/2)^-1 int_0^inf s^(alpha/2 - 1) exp(-s |r|^2) ds,
/// which factorises over axes.
inline double alpha_cell_weight(std::span<const int> offset, double h, double alpha) {
  const auto d = offset.size();
  if (!(alpha > 0.0 && alpha < static_cast<double>(d) && alpha < 2.0))
    throw Error(ErrorKind::parameter, "alpha must lie in (0, min(2, d))");
  if (d == 1) {
    auto G = [alpha](double r) { return std::pow(std::abs(r), 2.0 - alpha) / ((1.0 - alpha) * (2.0 - alpha)); };
    const double c = offset[0] * h;
    return G(c + h) + G(c - h) - 2.0 * G(c);
  }
  return alpha_cell_weight_mixture(offset, h, alpha);
}

/// Cell weights W_kj for a grid, so that ||phi||_(alpha)^2 = sum |phi_k| W_kj |phi_j|.
inline Eigen::MatrixXd alpha_weights(const GridSpec& g, double alpha) {
  const auto N = static_cast<Eigen::Index>(g.N());
  Eigen::MatrixXd W(N, N);
  std::vector<int> offset(static_cast<std::size_t>(g.d()));
  // Weights depend only on |offset| per axis; cache by that key.
  const int side = g.side();
  std::vector<double> cache;
  std::size_t cache_size = 1;
  for (int j = 0; j < g.d(); ++j) cache_size *= static_cast<std::size_t>(side);
  cache.assign(cache_size, -1.0);
  for (std::size_t k = 0; k < g.N(); ++k) {
    const MultiIndex a = to_multi(k + 1, g);
    for (std::size_t j = 0; j < g.N(); ++j) {
      const MultiIndex b = to_multi(j + 1, g);
      std::size_t key = 0;
      std::size_t stride = 1;
      for (int ax = 1; ax <= g.d(); ++ax) {
        const int o = std::abs(a.at(ax) - b.at(ax));
        offset[static_cast<std::size_t>(ax - 1)] = o;
        key += static_cast<std::size_t>(o) * stride;
        stride *= static_cast<std::size_t>(side);
      }
      if (cache[key] < 0.0) cache[key] = alpha_cell_weight(offset, g.spacing(), alpha);
      W(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = cache[key];
    }
  }
  return W;
}

// ---------------------------------------------------------------------------
// Numerical report on the kernel estimates.

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::parameter, "least squares needs >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error(ErrorKind::parameter, "least squares abscissae are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

struct ExponentCheck {
  double bound_exponent = 0.0;
  double fitted_exponent = 0.0;
  /// max value / scale^bound over the sampled range.
  double constant = 0.0;
  /// Fitted exponent at least bound - 0.1.
  bool holds = false;
};

struct EstimateRow {
  char estimate;  // 'i', '2' (ii), '3' (iii), '4' (iv)
  double t;
  double scale;  // t for (i); |x - y| for (ii); h for (iii), (iv)
  double value;
};

struct EstimateReport {
  int n = 0;
  int d = 1;
  double alpha = 0.0;
  double least_negative_eigenvalue = 0.0;
  /// Slope of log sup_x ||p(t, x, .)||_1 over t >= 5 / |lambda|; NaN with fewer than two such t.
  double decay_slope = NAN;
  double max_clip = 0.0;
  std::vector<EstimateRow> rows;
  /// One entry per t in the grid.
  std::vector<ExponentCheck> pair_checks;
  std::vector<ExponentCheck> shift_checks;
  std::vector<ExponentCheck> alpha_checks;
};

namespace detail {

// Trapezoid of g(tau) over [0, t] with spacing at most 1 / (8 d n^2).
template <typename Fn>
double time_integral(double t, int n, int d, Fn&& g) {
  if (t <= 0.0) return 0.0;
  const int steps = std::max(64, static_cast<int>(std::ceil(t * 8.0 * d * n * n)));
  const double h = t / steps;
  NeumaierSum acc;
  for (int k = 0; k <= steps; ++k) acc += ((k == 0 || k == steps) ? 0.5 : 1.0) * g(k * h);
  return acc.value() * h;
}

template <typename Fn>
Eigen::VectorXd time_integral_vec(double t, int n, int d, std::size_t size, Fn&& g) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  if (t <= 0.0) return acc;
  const int steps = std::max(64, static_cast<int>(std::ceil(t * 8.0 * d * n * n)));
  const double h = t / steps;
  for (int k = 0; k <= steps; ++k) acc += ((k == 0 || k == steps) ? 0.5 : 1.0) * g(k * h);
  return acc * h;
}

inline ExponentCheck fit_exponent(std::span<const double> scale, std::span<const double> value, double bound) {
  ExponentCheck c;
  c.bound_exponent = bound;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < scale.size(); ++i) {
    c.constant = std::max(c.constant, value[i] / std::pow(scale[i], bound));
    if (value[i] > 0.0) {
      lx.push_back(std::log(scale[i]));
      ly.push_back(std::log(value[i]));
    }
  }
  if (lx.size() >= 2) {
    c.fitted_exponent = least_squares(lx, ly).slope;
    c.holds = c.fitted_exponent >= bound - 0.1;
  }
  return c;
}

}  // namespace detail

/// Left-hand sides of the four kernel estimates on a lattice of dimension d:
///  (i)   sup_x ||p_1(t, x, .)||_1
///  (ii)  int_0^t ( ||p_d(t-s, x, .) - p_d(t-s, y, .)||_1 )^2 ds along axis 1
///  (iii) sup_x int_0^t ||p_d(t-s, x, .) - p_d(t+h-s, x, .)||_1 ds
///  (iv)  as (iii) with the squared (alpha) norm
/// Norms integrate over the interior cells, i.e. ||phi||_1 = n^-d sum |phi_k|.
inline EstimateReport estimate_report(const HeatKernel1D& hk, int d, std::span<const double> t_grid,
                                      std::span<const double> h_grid, double alpha) {
  if (t_grid.empty() || h_grid.empty()) throw Error(ErrorKind::parameter, "estimate grids must be non-empty");
  if (!(alpha > 0.0 && alpha < std::min(2.0, static_cast<double>(d))))
    throw Error(ErrorKind::parameter, "alpha must lie in (0, min(2, d))");
  const int n = hk.n();
  const GridSpec g(d, n);
  const double vol = std::pow(static_cast<double>(n), -d);
  EstimateReport rep;
  rep.n = n;
  rep.d = d;
  rep.alpha = alpha;
  rep.least_negative_eigenvalue = hk.least_negative_eigenvalue();

  auto pd = [&](double tau) {
    const KernelMatrix k1 = kernel_1d(tau, hk);
    rep.max_clip = std::max(rep.max_clip, k1.clipped);
    return kernel_d_matrix(k1, d);
  };

  // (i)
  std::vector<double> decay_t, decay_log;
  for (double t : t_grid) {
    const KernelMatrix k1 = kernel_1d(t, hk);
    rep.max_clip = std::max(rep.max_clip, k1.clipped);
    const double sup = (k1.p.rowwise().sum() / static_cast<double>(n)).maxCoeff();
    rep.rows.push_back({'i', t, t, sup});
    if (t >= 5.0 / std::abs(rep.least_negative_eigenvalue) && sup > 0.0) {
      decay_t.push_back(t);
      decay_log.push_back(std::log(sup));
    }
  }
  if (decay_t.size() >= 2) rep.decay_slope = least_squares(decay_t, decay_log).slope;

  const Eigen::MatrixXd W = alpha_weights(g, alpha);
  const double pair_bound = d == 1 ? 0.5 : 1.0 / 1.5 - 0.5;  // 1/q - 1/2 with q = 1 (d = 1), q = 3/2 otherwise

  for (double t : t_grid) {
    // (ii): x = node 1, y = node 1 + (j-1) e_1.
    std::vector<double> dist, val;
    for (int j = 2; j <= g.side(); ++j) {
      const auto y = static_cast<Eigen::Index>(j - 1);
      const double v = detail::time_integral(t, n, d, [&](double tau) {
        const Eigen::MatrixXd p = pd(tau);
        const double l1 = vol * (p.row(0) - p.row(y)).cwiseAbs().sum();
        return l1 * l1;
      });
      dist.push_back(static_cast<double>(j - 1) / n);
      val.push_back(v);
      rep.rows.push_back({'2', t, dist.back(), v});
    }
    rep.pair_checks.push_back(dist.size() >= 2 ? detail::fit_exponent(dist, val, pair_bound)
                                               : ExponentCheck{pair_bound, 0.0, 0.0, false});

    // (iii), (iv): sup over starting nodes of the time-integrated norms.
    std::vector<double> shift_val, alpha_val;
    for (double h : h_grid) {
      const Eigen::VectorXd integrals = detail::time_integral_vec(t, n, d, 2 * g.N(), [&](double tau) {
        const Eigen::MatrixXd absdiff = (pd(tau) - pd(tau + h)).cwiseAbs();
        Eigen::VectorXd out(2 * absdiff.rows());
        out.head(absdiff.rows()) = vol * absdiff.rowwise().sum();
        out.tail(absdiff.rows()) = (absdiff * W).cwiseProduct(absdiff).rowwise().sum() * (vol * vol);
        return out;
      });
      const auto N = static_cast<Eigen::Index>(g.N());
      shift_val.push_back(integrals.head(N).maxCoeff());
      alpha_val.push_back(integrals.tail(N).maxCoeff());
      rep.rows.push_back({'3', t, h, shift_val.back()});
      rep.rows.push_back({'4', t, h, alpha_val.back()});
    }
    const bool fit = h_grid.size() >= 2;
    rep.shift_checks.push_back(fit ? detail::fit_exponent(h_grid, shift_val, 0.5) : ExponentCheck{0.5, 0.0, 0.0, false});
    const double abound = 1.0 - 0.5 * alpha;
    rep.alpha_checks.push_back(fit ? detail::fit_exponent(h_grid, alpha_val, abound)
                                   : ExponentCheck{abound, 0.0, 0.0, false});
  }
  return rep;
}

}  // namespace lattice_burgers
