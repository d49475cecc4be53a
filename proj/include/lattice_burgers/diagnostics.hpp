#pragma once

// Martingale-problem statistics and refinement diagnostics.
//
// Testing the scheme against a function phi vanishing on the boundary gives
//
//   M(t) = <u(t), phi> - <u(0), phi> - int_0^t <u, Delta^n phi> ds
//          - 1/2 int_0^t <u^2, B^T phi> ds
//
// with <a, b> = n^-d sum_k a_k b_k. B^T phi = sum_i n [phi(x - e_i/n) - phi(x)]
// is the summation-by-parts adjoint of the forward difference, so M equals
// sum_k phi_k int sigma(u_k) F(ds, I_k) exactly in continuous time, with
// quadratic variation int_0^t w^T C w ds, w_k = phi_k sigma(u_k).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lattice_burgers/coefficients.hpp"
#include "lattice_burgers/error.hpp"
#include "lattice_burgers/grid.hpp"
#include "lattice_burgers/integrator.hpp"
#include "lattice_burgers/noise.hpp"
#include "lattice_burgers/numerics.hpp"
#include "lattice_burgers/operators.hpp"
#include "lattice_burgers/rng.hpp"

namespace lattice_burgers {

class TestFunction {
 public:
  using Evaluator = std::function<double(std::span<const double>)>;

  TestFunction(std::string name, Evaluator eval) : name_(std::move(name)), eval_(std::move(eval)) {}

  const std::string& name() const noexcept { return name_; }
  double operator()(std::span<const double> x) const { return eval_(x); }

  /// prod_j sin(pi x_j)
  static TestFunction product_sine() {
    return {"sine", [](std::span<const double> x) {
              double v = 1.0;
              for (double xj : x) v *= std::sin(std::numbers::pi * xj);
              return v;
            }};
  }

  /// prod_j x_j (1 - x_j)
  static TestFunction product_quadratic() {
    return {"quadratic", [](std::span<const double> x) {
              double v = 1.0;
              for (double xj : x) v *= xj * (1.0 - xj);
              return v;
            }};
  }

  /// Rejects functions that do not vanish on sampled boundary points of [0,1]^d.
  static TestFunction custom(std::string name, Evaluator eval, int d) {
    TestFunction f(std::move(name), std::move(eval));
    f.require_boundary_zero(d);
    return f;
  }

  static TestFunction parse(const std::string& spec) {
    if (spec == "sine") return product_sine();
    if (spec == "quadratic") return product_quadratic();
    throw Error(ErrorKind::config, "unknown test function '" + spec + "' (expected sine or quadratic)");
  }

  void require_boundary_zero(int d, int samples = 11) const {
    // Faces x_j in {0, 1}, other coordinates on a regular grid.
    std::vector<double> x(static_cast<std::size_t>(d));
    std::size_t count = 1;
    for (int j = 1; j < d; ++j) count *= static_cast<std::size_t>(samples);
    for (int axis = 0; axis < d; ++axis) {
      for (double face : {0.0, 1.0}) {
        for (std::size_t c = 0; c < count; ++c) {
          std::size_t rest = c;
          for (int j = 0; j < d; ++j) {
            if (j == axis) {
              x[static_cast<std::size_t>(j)] = face;
              continue;
            }
            x[static_cast<std::size_t>(j)] = static_cast<double>(rest % static_cast<std::size_t>(samples)) / (samples - 1);
            rest /= static_cast<std::size_t>(samples);
          }
          if (std::abs(eval_(x)) > 1e-12)
            throw Error(ErrorKind::parameter, "test function " + name_ + " does not vanish on the boundary");
        }
      }
    }
  }

  LatticeField sample(const GridSpec& g) const {
    LatticeField v(g);
    std::vector<double> x(static_cast<std::size_t>(g.d()));
    for (std::size_t k = 0; k < g.N(); ++k) {
      node_point(k, g, x);
      v.values()[k] = eval_(x);
    }
    return v;
  }

 private:
  std::string name_;
  Evaluator eval_;
};

/// <a, b> = n^-d sum_k a_k b_k
inline double lattice_inner(std::span<const double> a, std::span<const double> b, const GridSpec& g) {
  NeumaierSum s;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s.value() / g.inv_cell_volume();
}

/// <u, phi>
inline double tested_mass(const LatticeField& u, const TestFunction& phi) {
  const LatticeField p = phi.sample(u.grid());
  return lattice_inner(u.values(), p.values(), u.grid());
}

namespace detail {

inline void require_dense_snapshots(const Trajectory& traj) {
  if (traj.times.empty()) throw Error(ErrorKind::resolution, "trajectory has no snapshots");
  const double T = traj.times.back();
  for (std::size_t s = 1; s < traj.times.size(); ++s)
    if (traj.times[s] - traj.times[s - 1] > T / 50.0 * (1.0 + 1e-9))
      throw Error(ErrorKind::resolution, "snapshot spacing exceeds t_end/50; lower record-stride");
}

template <typename Integrand>
std::vector<double> cumulative_trapezoid(const Trajectory& traj, Integrand&& g) {
  std::vector<double> out(traj.times.size(), 0.0);
  double prev = traj.states.empty() ? 0.0 : g(traj.states[0]);
  NeumaierSum acc;
  for (std::size_t s = 1; s < traj.times.size(); ++s) {
    const double cur = g(traj.states[s]);
    acc += 0.5 * (traj.times[s] - traj.times[s - 1]) * (prev + cur);
    out[s] = acc.value();
    prev = cur;
  }
  return out;
}

}  // namespace detail

/// M(t) at every snapshot of the trajectory.
inline std::vector<double> martingale_statistic(const Trajectory& traj, const TestFunction& phi) {
  detail::require_dense_snapshots(traj);
  const GridSpec& g = traj.grid;
  for (const auto& s : traj.states) detail::require_grid(s, g);
  const LatticeField p = phi.sample(g);
  const LatticeField lap = apply_laplacian(p);
  const LatticeField adj = apply_gradient_adjoint(p);
  std::vector<double> sq(g.N());

  const auto linear = detail::cumulative_trapezoid(
      traj, [&](const LatticeField& u) { return lattice_inner(u.values(), lap.values(), g); });
  const auto quadratic = detail::cumulative_trapezoid(traj, [&](const LatticeField& u) {
    for (std::size_t k = 0; k < g.N(); ++k) sq[k] = u.values()[k] * u.values()[k];
    return lattice_inner(sq, adj.values(), g);
  });
  const double start = lattice_inner(traj.states[0].values(), p.values(), g);
  std::vector<double> M(traj.times.size());
  M[0] = 0.0;
  for (std::size_t s = 1; s < M.size(); ++s)
    M[s] = (lattice_inner(traj.states[s].values(), p.values(), g) - start) - linear[s] - 0.5 * quadratic[s];
  return M;
}

/// int_0^t w^T C w ds with w_k = phi(x_k) sigma(u(s, x_k)).
inline std::vector<double> predicted_qv(const Trajectory& traj, const TestFunction& phi, const NoiseModel& noise,
                                        const SigmaCoefficient& sigma) {
  detail::require_dense_snapshots(traj);
  const GridSpec& g = traj.grid;
  if (!(noise.grid() == g)) throw Error(ErrorKind::shape, "noise model and trajectory use different grids");
  const LatticeField p = phi.sample(g);
  const Eigen::MatrixXd& C = noise.covariance();
  const double cscale = C.size() ? C.cwiseAbs().maxCoeff() : 0.0;
  Eigen::VectorXd w(static_cast<Eigen::Index>(g.N()));
  return detail::cumulative_trapezoid(traj, [&](const LatticeField& u) {
    for (std::size_t k = 0; k < g.N(); ++k) w(static_cast<Eigen::Index>(k)) = p.values()[k] * sigma(u.values()[k]);
    const double q = w.dot(C * w);
    if (q < -1e-12 * cscale * w.squaredNorm() * static_cast<double>(g.N()))
      throw Error(ErrorKind::not_psd, "quadratic-variation integrand is negative; covariance is not PSD");
    return std::max(q, 0.0);
  });
}

struct MartingaleReport {
  std::vector<double> times;
  std::vector<double> mean_M;
  std::vector<double> se_M;
  std::vector<double> qv_predicted;
  std::vector<double> qv_empirical;
  std::vector<double> z_scores;  // NaN where se = 0
  std::vector<double> qv_ratio;  // NaN where the predicted QV is 0
  std::size_t replicas = 0;
  /// Zero noise: z is undefined and QV consistency is trivial.
  bool degenerate = false;
  bool z_pass = false;
  bool qv_pass = false;
  bool pass() const { return z_pass && qv_pass; }
};

inline constexpr double kZLimit = 3.0;
inline constexpr double kQvLow = 0.8;
inline constexpr double kQvHigh = 1.2;

/// Ensemble test of E M(t) = 0 and E M(t)^2 = E <M>(t) at the checkpoints.
inline MartingaleReport martingale_test(const Ensemble& ens, const TestFunction& phi, const NoiseModel& noise,
                                        const SigmaCoefficient& sigma, std::span<const double> checkpoints) {
  const std::size_t R = ens.replicas.size();
  if (R < 100)
    throw Error(ErrorKind::statistical_power, "martingale test needs >= 100 replicas, got " + std::to_string(R));
  if (checkpoints.empty()) throw Error(ErrorKind::parameter, "no checkpoint times given");
  const auto& times = ens.replicas.front().times;
  const double T = times.back();
  std::vector<std::size_t> idx;
  for (double c : checkpoints) {
    const auto it = std::min_element(times.begin(), times.end(),
                                     [c](double a, double b) { return std::abs(a - c) < std::abs(b - c); });
    if (std::abs(*it - c) > 1e-9 * std::max(1.0, T))
      throw Error(ErrorKind::resolution, "checkpoint t = " + format_double(c) + " is not a snapshot time");
    idx.push_back(static_cast<std::size_t>(it - times.begin()));
  }

  const std::size_t K = idx.size();
  std::vector<NeumaierSum> sum(K), sum2(K), qv(K);
  for (const auto& traj : ens.replicas) {
    if (traj.times.size() != times.size()) throw Error(ErrorKind::shape, "replicas have different snapshot times");
    const auto M = martingale_statistic(traj, phi);
    const auto Q = predicted_qv(traj, phi, noise, sigma);
    for (std::size_t c = 0; c < K; ++c) {
      sum[c] += M[idx[c]];
      sum2[c] += M[idx[c]] * M[idx[c]];
      qv[c] += Q[idx[c]];
    }
  }

  MartingaleReport rep;
  rep.replicas = R;
  rep.degenerate = sigma.is_zero();
  rep.z_pass = true;
  rep.qv_pass = true;
  const double r = static_cast<double>(R);
  for (std::size_t c = 0; c < K; ++c) {
    const double mean = sum[c].value() / r;
    const double m2 = sum2[c].value() / r;
    const double var = std::max(0.0, (m2 - mean * mean) * r / (r - 1.0));
    const double se = std::sqrt(var / r);
    const double qvp = qv[c].value() / r;
    rep.times.push_back(times[idx[c]]);
    rep.mean_M.push_back(mean);
    rep.se_M.push_back(se);
    rep.qv_predicted.push_back(qvp);
    rep.qv_empirical.push_back(m2);
    rep.z_scores.push_back(se > 0.0 ? mean / se : NAN);
    rep.qv_ratio.push_back(qvp > 0.0 ? m2 / qvp : NAN);
    if (rep.degenerate) continue;
    if (!(std::abs(rep.z_scores.back()) <= kZLimit)) rep.z_pass = false;
    const double ratio = rep.qv_ratio.back();
    if (!(ratio >= kQvLow && ratio <= kQvHigh)) rep.qv_pass = false;
  }
  return rep;
}

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_refinement(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 200 || b.size() < 200)
    throw Error(ErrorKind::sample_size, "KS diagnostic needs >= 200 samples per set");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

struct RefinementConfig {
  SimConfig base;           // dim, dt, t_end, kernel, sigma, initial, seed, quadrature
  std::vector<int> levels{4, 8, 16};
  std::size_t replicas = 500;
  std::size_t batches = 10;
  std::string test_function = "sine";
};

struct RefinementReport {
  std::vector<int> levels;
  /// ks[b][p]: batch b, KS between levels p and p+1.
  std::vector<std::vector<double>> ks;
  std::vector<double> median_ks;  // per level pair
  /// Medians non-increasing along the refinement.
  bool pass = false;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorKind::sample_size, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Samples <u^n(T), phi> across replicas at each level, batch by batch, and
/// compares consecutive levels by KS distance.
inline RefinementReport run_refinement(const RefinementConfig& rc) {
  if (rc.levels.size() < 2) throw Error(ErrorKind::parameter, "refinement needs at least two levels");
  if (rc.batches < 1) throw Error(ErrorKind::parameter, "batches must be >= 1");
  const TestFunction phi = TestFunction::parse(rc.test_function);
  RefinementReport rep;
  rep.levels = rc.levels;
  std::vector<SimConfig> cfgs;
  std::vector<Model> models;
  for (int n : rc.levels) {
    SimConfig c = rc.base;
    c.n = n;
    c.replicas = rc.replicas;
    c.record_stride = std::max<std::size_t>(1, c.steps());
    c.validate();
    models.push_back(Model::build(c));
    cfgs.push_back(c);
  }
  for (std::size_t b = 0; b < rc.batches; ++b) {
    std::vector<std::vector<double>> samples;
    for (std::size_t l = 0; l < cfgs.size(); ++l) {
      SimConfig c = cfgs[l];
      c.seed = replica_seed(replica_seed(rc.base.seed, b), l);
      const Ensemble e = simulate(c, models[l]);
      const LatticeField p = phi.sample(c.grid());
      std::vector<double> v;
      v.reserve(e.replicas.size());
      for (const auto& t : e.replicas) v.push_back(lattice_inner(t.states.back().values(), p.values(), c.grid()));
      samples.push_back(std::move(v));
    }
    std::vector<double> row;
    for (std::size_t l = 0; l + 1 < samples.size(); ++l) row.push_back(ks_refinement(samples[l], samples[l + 1]));
    rep.ks.push_back(std::move(row));
  }
  for (std::size_t p = 0; p + 1 < rc.levels.size(); ++p) {
    std::vector<double> col;
    for (const auto& row : rep.ks) col.push_back(row[p]);
    rep.median_ks.push_back(median(col));
  }
  rep.pass = true;
  for (std::size_t p = 1; p < rep.median_ks.size(); ++p)
    if (rep.median_ks[p] > rep.median_ks[p - 1]) rep.pass = false;
  return rep;
}

}  // namespace lattice_burgers
