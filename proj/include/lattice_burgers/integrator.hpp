#pragma once

// Euler-Maruyama time stepping of the lattice system
//
//   du_i = [sum_j a_ij u_j + 1/2 sum_j b_ij u_j^2] dt + n^d sigma(u_i) F(dt, I_i)
//
// followed by a componentwise projection onto [0, 1]. Every projection is
// logged with the size of the pre-projection excursion.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lattice_burgers/coefficients.hpp"
#include "lattice_burgers/error.hpp"
#include "lattice_burgers/grid.hpp"
#include "lattice_burgers/noise.hpp"
#include "lattice_burgers/numerics.hpp"
#include "lattice_burgers/operators.hpp"
#include "lattice_burgers/rng.hpp"

namespace lattice_burgers {

class InitialCondition {
 public:
  using Evaluator = std::function<double(std::span<const double>)>;

  InitialCondition(std::string name, Evaluator eval) : name_(std::move(name)), eval_(std::move(eval)) {}

  const std::string& name() const noexcept { return name_; }
  double operator()(std::span<const double> x) const { return eval_(x); }

  static InitialCondition constant(double c) {
    if (!(c >= 0.0 && c <= 1.0)) throw Error(ErrorKind::parameter, "constant initial value must lie in [0, 1]");
    return {"constant:" + format_double(c), [c](std::span<const double>) { return c; }};
  }

  /// prod_j sin(pi x_j)
  static InitialCondition sine() {
    return {"sine", [](std::span<const double> x) {
              double v = 1.0;
              for (double xj : x) v *= std::sin(std::numbers::pi * xj);
              return v;
            }};
  }

  /// `constant:<c>` or `sine`.
  static InitialCondition parse(const std::string& spec) {
    if (spec == "sine") return sine();
    const std::string prefix = "constant:";
    if (spec.rfind(prefix, 0) == 0) return constant(parse_double(spec.substr(prefix.size()), "initial constant"));
    throw Error(ErrorKind::config, "unknown initial condition '" + spec + "' (expected constant:<c> or sine)");
  }

  /// Node samples, validated into [0, 1].
  LatticeField sample(const GridSpec& g) const {
    LatticeField u(g);
    std::vector<double> x(static_cast<std::size_t>(g.d()));
    auto vals = u.values();
    for (std::size_t k = 0; k < g.N(); ++k) {
      node_point(k, g, x);
      const double v = eval_(x);
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorKind::parameter, "initial condition " + name_ + " leaves [0, 1] at node " + std::to_string(k + 1));
      vals[k] = v;
    }
    return u;
  }

 private:
  std::string name_;
  Evaluator eval_;
};

struct SimConfig {
  int dim = 1;
  int n = 4;
  double dt = 1e-4;
  double t_end = 0.1;
  std::uint64_t seed = 1;
  std::size_t replicas = 1;
  std::string kernel = "constant:1";
  std::string sigma = "stepping-stone";
  std::string initial = "constant:0.5";
  std::size_t record_stride = 1;
  int quadrature = 4;
  /// Permit dt above the explicit stability ceiling 1/(4 d n^2).
  bool allow_unstable = false;
  /// Include the 1/2 B u^2 term. Switched off only for negative controls.
  bool burgers_term = true;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned workers = 0;

  GridSpec grid() const { return GridSpec(dim, n); }
  double stability_ceiling() const { return 1.0 / (4.0 * dim * static_cast<double>(n) * n); }
  bool exceeds_ceiling() const { return dt > stability_ceiling(); }

  void validate() const {
    grid();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::parameter, "dt must be > 0");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw Error(ErrorKind::parameter, "t-end must be >= 0");
    if (t_end > 0.0 && dt > t_end) throw Error(ErrorKind::parameter, "dt must not exceed t-end");
    if (replicas < 1) throw Error(ErrorKind::parameter, "replicas must be >= 1");
    if (record_stride < 1) throw Error(ErrorKind::parameter, "record-stride must be >= 1");
    if (quadrature < 1) throw Error(ErrorKind::parameter, "quadrature must be >= 1");
    if (exceeds_ceiling() && !allow_unstable)
      throw Error(ErrorKind::parameter, "dt = " + format_double(dt) + " exceeds the stability ceiling 1/(4 d n^2) = " +
                                            format_double(stability_ceiling()) + "; pass --allow-unstable to override");
  }

  std::size_t steps() const {
    if (t_end == 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  }

  /// Time after step k (1-based); the last step is shortened to land on t_end.
  double time_at(std::size_t k) const { return k >= steps() ? t_end : static_cast<double>(k) * dt; }

  bool records(std::size_t k) const { return k % record_stride == 0 || k == steps(); }

  std::size_t snapshots() const {
    const std::size_t s = steps();
    return 1 + s / record_stride + (s % record_stride != 0 ? 1 : 0);
  }

  /// Canonical one-line echo; also the input of the fingerprint.
  std::string echo() const {
    std::ostringstream os;
    os << "dim=" << dim << " n=" << n << " dt=" << format_double(dt) << " t-end=" << format_double(t_end)
       << " seed=" << seed << " replicas=" << replicas << " kernel=" << kernel << " sigma=" << sigma
       << " init=" << initial << " record-stride=" << record_stride << " quadrature=" << quadrature
       << " allow-unstable=" << allow_unstable << " burgers-term=" << burgers_term;
    return os.str();
  }

  std::string fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : echo()) h = (h ^ c) * 0x100000001b3ULL;
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }
};

/// Shared, immutable ingredients of a run.
struct Model {
  GridSpec grid;
  OperatorMatrix A;
  OperatorMatrix B;
  CorrelationKernel kernel;
  NoiseModel noise;
  SigmaCoefficient sigma;
  InitialCondition initial;

  static Model build(const SimConfig& cfg) {
    const GridSpec g = cfg.grid();
    auto kernel = CorrelationKernel::parse(cfg.kernel);
    NoiseModel noise(kernel, g, cfg.quadrature);
    return Model{g, build_A(g), build_B(g), std::move(kernel), std::move(noise), parse_sigma(cfg.sigma),
                 InitialCondition::parse(cfg.initial)};
  }

  /// n^d sqrt(max C_kk) / sqrt(sup f): the per-site noise amplitude per
  /// sqrt(dt), relative to its bound. At most 1.
  double noise_scale_ratio() const {
    const double sup = noise.sup_bound();
    const double amp = grid.inv_cell_volume() * std::sqrt(noise.covariance().diagonal().maxCoeff());
    return sup > 0.0 ? amp / std::sqrt(sup) : (amp > 0.0 ? INFINITY : 0.0);
  }
};

struct ClampStats {
  std::size_t count = 0;
  double max_magnitude = 0.0;
};

struct ClampEvent {
  std::size_t step;  // 1-based step index
  std::size_t count;
  double max_magnitude;
};

struct Trajectory {
  GridSpec grid;
  std::vector<double> times;
  std::vector<LatticeField> states;
  /// Steps with at least one projection; all other steps had none.
  std::vector<ClampEvent> clamp_log;
  std::size_t steps = 0;
  std::string fingerprint;

  std::size_t clamp_count() const {
    std::size_t c = 0;
    for (const auto& e : clamp_log) c += e.count;
    return c;
  }
  double max_excursion() const {
    double m = 0.0;
    for (const auto& e : clamp_log) m = std::max(m, e.max_magnitude);
    return m;
  }
  /// Fraction of steps with at least one projection.
  double clamp_step_fraction() const {
    return steps == 0 ? 0.0 : static_cast<double>(clamp_log.size()) / static_cast<double>(steps);
  }
};

struct Ensemble {
  std::vector<Trajectory> replicas;
  double jitter = 0.0;
  bool stability_override = false;
  double noise_scale_ratio = 0.0;
};

/// One Euler-Maruyama step, in place.
class EulerMaruyama {
 public:
  EulerMaruyama(const Model& model, bool burgers_term = true)
      : model_(&model),
        drift_(model.A, model.B, burgers_term),
        scale_(model.grid.inv_cell_volume()),
        f_(model.grid.N()),
        dF_(model.grid.N()),
        z_(model.grid.N()) {}

  ClampStats advance(std::span<double> u, double dt, Rng& rng) {
    drift_(u, f_);
    const bool noisy = !model_->sigma.is_zero();
    if (noisy) sample_increment(model_->noise, dt, rng, dF_, z_);
    ClampStats stats;
    for (std::size_t i = 0; i < u.size(); ++i) {
      double v = u[i] + f_[i] * dt;
      if (noisy) v += scale_ * model_->sigma(u[i]) * dF_[i];
      if (!std::isfinite(v)) {
        u[i] = v;
        continue;
      }
      double excursion = 0.0;
      if (v < 0.0) {
        excursion = -v;
        v = 0.0;
      } else if (v > 1.0) {
        excursion = v - 1.0;
        v = 1.0;
      }
      if (excursion > 0.0) {
        ++stats.count;
        stats.max_magnitude = std::max(stats.max_magnitude, excursion);
      }
      u[i] = v;
    }
    return stats;
  }

 private:
  const Model* model_;
  DriftEvaluator drift_;
  double scale_;
  std::vector<double> f_;
  std::vector<double> dF_;
  std::vector<double> z_;
};

struct StepResult {
  LatticeField state;
  ClampStats clamp;
};

inline void require_finite(std::span<const double> u, std::size_t step, double t) {
  for (double v : u)
    if (!std::isfinite(v))
      throw Error(ErrorKind::numerical_blowup, "non-finite state at step " + std::to_string(step) + " (t = " +
                                                   format_double(t) + "); dt is likely too large");
}

inline StepResult step(const LatticeField& u, const Model& model, double dt, Rng& rng, bool burgers_term = true) {
  if (!(dt > 0.0)) throw Error(ErrorKind::parameter, "dt must be > 0");
  detail::require_grid(u, model.grid);
  EulerMaruyama em(model, burgers_term);
  StepResult r{u, {}};
  r.clamp = em.advance(r.state.values(), dt, rng);
  require_finite(r.state.values(), 1, dt);
  return r;
}

namespace detail {

inline void check_capacity(const SimConfig& cfg, std::size_t replicas) {
  const double bytes = static_cast<double>(replicas) * static_cast<double>(cfg.snapshots()) *
                       static_cast<double>(cfg.grid().N()) * sizeof(double);
  if (bytes > 4.0 * (1ULL << 30))
    throw Error(ErrorKind::capacity, "recording would need " + format_double(bytes / (1ULL << 30)) +
                                         " GiB; raise record-stride or reduce replicas");
}

inline Trajectory run_replica(const SimConfig& cfg, const Model& model, std::size_t replica) {
  Trajectory traj{model.grid, {}, {}, {}, cfg.steps(), cfg.fingerprint()};
  traj.times.reserve(cfg.snapshots());
  traj.states.reserve(cfg.snapshots());
  LatticeField u = model.initial.sample(model.grid);
  traj.times.push_back(0.0);
  traj.states.push_back(u);
  Rng rng = make_replica_rng(cfg.seed, replica);
  EulerMaruyama em(model, cfg.burgers_term);
  const std::size_t steps = cfg.steps();
  for (std::size_t k = 1; k <= steps; ++k) {
    const double h = cfg.time_at(k) - cfg.time_at(k - 1);
    const ClampStats c = em.advance(u.values(), h, rng);
    require_finite(u.values(), k, cfg.time_at(k));
    if (c.count > 0) traj.clamp_log.push_back({k, c.count, c.max_magnitude});
    if (cfg.records(k)) {
      traj.times.push_back(cfg.time_at(k));
      traj.states.push_back(u);
    }
  }
  return traj;
}

}  // namespace detail

/// Runs `fn(r)` for r in [0, count) over a pool of worker threads. The first
/// exception by replica order is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t r = 0; r < count; ++r) {
      try {
        fn(r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < count; r = next++) {
          try {
            fn(r);
          } catch (...) {
            errors[r] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline Ensemble simulate(const SimConfig& cfg, const Model& model) {
  cfg.validate();
  if (!(model.grid == cfg.grid())) throw Error(ErrorKind::shape, "model grid does not match the configuration");
  detail::check_capacity(cfg, cfg.replicas);
  Ensemble ens;
  ens.jitter = model.noise.jitter();
  ens.stability_override = cfg.exceeds_ceiling();
  ens.noise_scale_ratio = model.noise_scale_ratio();
  if (ens.noise_scale_ratio > 1.0 + 1e-12)
    throw Error(ErrorKind::kernel, "per-site noise amplitude exceeds sqrt(sup f) sqrt(dt)");
  std::vector<std::optional<Trajectory>> slots(cfg.replicas);
  parallel_for(cfg.replicas, cfg.workers, [&](std::size_t r) { slots[r].emplace(detail::run_replica(cfg, model, r)); });
  ens.replicas.reserve(cfg.replicas);
  for (auto& s : slots) ens.replicas.push_back(std::move(*s));
  return ens;
}

inline Ensemble simulate(const SimConfig& cfg) {
  cfg.validate();
  return simulate(cfg, Model::build(cfg));
}

/// Deterministic reference for sigma == 0: classical RK4 on
/// u' = A u + 1/2 B u^2 with step dt/100, recorded at the same times as
/// simulate(). `linear_only` drops the quadratic term.
inline Trajectory mild_oracle(const SimConfig& cfg, bool linear_only = false) {
  cfg.validate();
  if (!parse_sigma(cfg.sigma).is_zero())
    throw Error(ErrorKind::parameter, "mild_oracle requires sigma = zero, got " + cfg.sigma);
  const GridSpec g = cfg.grid();
  const OperatorMatrix A = build_A(g);
  const OperatorMatrix B = build_B(g);
  DriftEvaluator rhs(A, B, !linear_only && cfg.burgers_term);
  const std::size_t N = g.N();
  std::vector<double> k1(N), k2(N), k3(N), k4(N), tmp(N);

  Trajectory traj{g, {}, {}, {}, cfg.steps(), cfg.fingerprint()};
  LatticeField u = InitialCondition::parse(cfg.initial).sample(g);
  traj.times.push_back(0.0);
  traj.states.push_back(u);
  constexpr int kSub = 100;
  auto x = u.values();
  for (std::size_t k = 1; k <= cfg.steps(); ++k) {
    const double h = (cfg.time_at(k) - cfg.time_at(k - 1)) / kSub;
    for (int s = 0; s < kSub; ++s) {
      rhs(x, k1);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
      rhs(tmp, k2);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
      rhs(tmp, k3);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = x[i] + h * k3[i];
      rhs(tmp, k4);
      for (std::size_t i = 0; i < N; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    require_finite(x, k, cfg.time_at(k));
    if (cfg.records(k)) {
      traj.times.push_back(cfg.time_at(k));
      traj.states.push_back(u);
    }
  }
  return traj;
}

/// max over recorded times and nodes of |a - b|.
inline double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.states.size() != b.states.size()) throw Error(ErrorKind::shape, "trajectories have different snapshot counts");
  double m = 0.0;
  for (std::size_t s = 0; s < a.states.size(); ++s) {
    const auto x = a.states[s].values();
    const auto y = b.states[s].values();
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  }
  return m;
}

}  // namespace lattice_burgers
