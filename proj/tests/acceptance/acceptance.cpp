// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "lattice_burgers/cli.hpp"
#include "lattice_burgers/lattice_burgers.hpp"

namespace lb = lattice_burgers;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Stencils written against the multi-index neighbor API.
double at(const lb::LatticeField& u, const std::optional<lb::MultiIndex>& k) { return k ? u(*k) : 0.0; }

lb::LatticeField stencil_laplacian(const lb::LatticeField& u) {
  const lb::GridSpec& g = u.grid();
  lb::LatticeField out(g);
  const double n2 = static_cast<double>(g.n()) * g.n();
  for (std::size_t i = 1; i <= g.N(); ++i) {
    const lb::MultiIndex k = lb::to_multi(i, g);
    double acc = 0.0;
    for (int a = 1; a <= g.d(); ++a) acc += at(u, lb::neighbor(k, a, +1, g)) + at(u, lb::neighbor(k, a, -1, g)) - 2.0 * u(k);
    out(i) = n2 * acc;
  }
  return out;
}

lb::LatticeField stencil_gradient_sq(const lb::LatticeField& u) {
  const lb::GridSpec& g = u.grid();
  lb::LatticeField out(g);
  for (std::size_t i = 1; i <= g.N(); ++i) {
    const lb::MultiIndex k = lb::to_multi(i, g);
    double acc = 0.0;
    for (int a = 1; a <= g.d(); ++a) {
      const double up = at(u, lb::neighbor(k, a, +1, g));
      acc += up * up - u(k) * u(k);
    }
    out(i) = g.n() * acc;
  }
  return out;
}

double rel_err(const lb::LatticeField& a, const lb::LatticeField& b) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b.values()[i]));
    diff = std::max(diff, std::abs(a.values()[i] - b.values()[i]));
  }
  return scale == 0.0 ? diff : diff / scale;
}

Outcome c1_operator_equivalence() {
  constexpr double tol = 1e-12;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  for (int d = 1; d <= 3; ++d)
    for (int n = 3; n <= 8; ++n) {
      const lb::GridSpec g(d, n);
      const lb::OperatorMatrix A = lb::build_A(g), B = lb::build_B(g);
      for (int trial = 0; trial < 100; ++trial) {
        lb::LatticeField u(g), sq(g);
        for (std::size_t k = 0; k < g.N(); ++k) {
          u.values()[k] = unif(rng);
          sq.values()[k] = u.values()[k] * u.values()[k];
        }
        worst = std::max(worst, rel_err(A.apply(u), stencil_laplacian(u)));
        worst = std::max(worst, rel_err(B.apply(sq), stencil_gradient_sq(u)));
      }
    }
  return {worst <= tol, "max relative error " + sci(worst) + " <= " + sci(tol)};
}

Outcome c2_matrix_ground_truth() {
  Eigen::MatrixXd a1(2, 2), b1(2, 2), b2(4, 4);
  a1 << -18, 9, 9, -18;
  b1 << -3, 3, 0, -3;
  b2 << -6, 3, 3, 0, 0, -6, 0, 3, 0, 0, -6, 3, 0, 0, 0, -6;
  const bool ok_a1 = lb::build_A(lb::GridSpec(1, 3)).dense() == a1;
  const bool ok_b1 = lb::build_B(lb::GridSpec(1, 3)).dense() == b1;
  const bool ok_b2 = lb::build_B(lb::GridSpec(2, 3)).dense() == b2;
  return {ok_a1 && ok_b1 && ok_b2, std::string("A(1,3) ") + (ok_a1 ? "exact" : "differs") + ", B(1,3) " +
                                       (ok_b1 ? "exact" : "differs") + ", B(2,3) " + (ok_b2 ? "exact" : "differs")};
}

Outcome c3_noise_covariance() {
  constexpr double z_tol = 3.0;
  constexpr std::size_t draws = 100000;
  bool bound_ok = true;
  double worst_z = 0.0;
  std::uint64_t seed = 31;
  for (const std::string spec : {"constant:1", "exp:1"}) {
    for (const lb::GridSpec g : {lb::GridSpec(1, 4), lb::GridSpec(2, 3)}) {
      const lb::NoiseModel model(lb::CorrelationKernel::parse(spec), g);
      const Eigen::MatrixXd& C = model.covariance();
      const auto N = C.rows();
      const double bound = model.sup_bound() * std::pow(static_cast<double>(g.n()), -2 * g.d());
      for (Eigen::Index k = 0; k < N; ++k) bound_ok = bound_ok && C(k, k) <= bound;

      lb::Rng rng(seed++);
      Eigen::MatrixXd S = Eigen::MatrixXd::Zero(N, N);
      std::vector<double> x(static_cast<std::size_t>(N)), z(static_cast<std::size_t>(N));
      for (std::size_t m = 0; m < draws; ++m) {
        lb::sample_increment(model, 1.0, rng, x, z);
        const Eigen::Map<Eigen::VectorXd> v(x.data(), N);
        S.noalias() += v * v.transpose();
      }
      S /= static_cast<double>(draws);
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
          const double se = std::sqrt((C(i, i) * C(j, j) + C(i, j) * C(i, j)) / static_cast<double>(draws));
          worst_z = std::max(worst_z, std::abs(S(i, j) - C(i, j)) / se);
        }
    }
  }
  return {bound_ok && worst_z <= z_tol, std::string("diagonal bound ") + (bound_ok ? "holds" : "violated") +
                                            ", max |z| " + sci(worst_z) + " <= " + sci(z_tol) +
                                            " (1e5 draws, f=1 and exp, d=1 n=4 and d=2 n=3)"};
}

Outcome c4_semigroup() {
  constexpr double semi_tol = 1e-10, oracle_tol = 1e-9;
  const std::vector<double> ts{0.01, 0.02, 0.05};
  double worst_semi = 0.0, worst_oracle = 0.0;
  for (int n = 2; n <= 6; ++n) {
    const lb::HeatKernel1D hk(n);
    const Eigen::MatrixXd A = lb::build_A(lb::GridSpec(1, n)).dense();
    for (double t : ts) {
      const Eigen::MatrixXd ref = static_cast<double>(n) * (t * A).exp();
      worst_oracle = std::max(worst_oracle, (lb::kernel_1d(t, hk).p - ref).cwiseAbs().maxCoeff());
      for (double s : ts)
        for (int d = 1; d <= 2; ++d) worst_semi = std::max(worst_semi, lb::semigroup_check(t, s, hk, d));
    }
  }
  return {worst_semi <= semi_tol && worst_oracle <= oracle_tol,
          "semigroup deviation " + sci(worst_semi) + " <= " + sci(semi_tol) + ", exponential oracle " +
              sci(worst_oracle) + " <= " + sci(oracle_tol)};
}

Outcome c5_row_sums() {
  constexpr double slope_tol = 0.05;
  bool range_ok = true;
  double worst_slope = 0.0;
  for (int n : {4, 8, 16}) {
    const lb::HeatKernel1D hk(n);
    const double lam = hk.least_negative_eigenvalue();
    const double t_max = 20.0 / std::abs(lam);
    std::vector<double> tt, lr;
    for (int k = 1; k <= 50; ++k) {
      const double t = t_max * k / 50.0;
      const Eigen::VectorXd rows = lb::kernel_1d(t, hk).p.rowwise().sum() / static_cast<double>(n);
      range_ok = range_ok && rows.minCoeff() >= 0.0 && rows.maxCoeff() <= 1.0;
      if (t >= 5.0 / std::abs(lam)) {
        tt.push_back(t);
        lr.push_back(std::log(rows.maxCoeff()));
      }
    }
    const double slope = lb::least_squares(tt, lr).slope;
    worst_slope = std::max(worst_slope, std::abs(slope / lam - 1.0));
  }
  return {range_ok && worst_slope <= slope_tol, std::string("row sums in [0,1] ") + (range_ok ? "yes" : "no") +
                                                    ", max |slope/lambda - 1| " + sci(worst_slope) + " <= " +
                                                    sci(slope_tol) + " (n = 4, 8, 16)"};
}

Outcome c6_range_trend() {
  lb::SimConfig c;
  c.dim = 1;
  c.n = 4;
  c.kernel = "constant:1";
  c.sigma = "stepping-stone";
  c.initial = "constant:0.5";
  c.replicas = 100;
  c.t_end = 0.2;
  c.seed = 6;
  c.record_stride = 1;
  bool in_range = true, monotone = true;
  double prev = INFINITY;
  std::string medians;
  for (double dt : {4e-4, 2e-4, 1e-4}) {
    c.dt = dt;
    const lb::Ensemble e = lb::simulate(c);
    std::vector<double> mags;
    for (const auto& t : e.replicas) {
      for (const auto& ev : t.clamp_log) mags.push_back(ev.max_magnitude);
      for (const auto& s : t.states)
        for (double v : s.values()) in_range = in_range && v >= 0.0 && v <= 1.0;
    }
    const double med = mags.empty() ? 0.0 : lb::median(mags);
    monotone = monotone && med <= prev;
    prev = med;
    medians += (medians.empty() ? "" : ", ") + sci(med) + " (" + std::to_string(mags.size()) + " events)";
  }
  return {in_range && monotone, "median excursion by dt 4e-4/2e-4/1e-4: " + medians + "; non-increasing " +
                                    (monotone ? "yes" : "no") + ", states in [0,1] " + (in_range ? "yes" : "no")};
}

Outcome c7_deterministic_convergence() {
  constexpr double lo = 1.5, hi = 2.5;
  lb::SimConfig c;
  c.dim = 1;
  c.n = 3;
  c.sigma = "zero";
  c.initial = "constant:0.5";
  c.t_end = 0.1;
  std::vector<double> errs;
  for (int k = 0; k < 4; ++k) {
    c.dt = 1e-3 / std::pow(2.0, k);
    errs.push_back(lb::sup_distance(lb::simulate(c).replicas[0], lb::mild_oracle(c)));
  }
  bool ok = true;
  std::string ratios;
  for (std::size_t k = 1; k < errs.size(); ++k) {
    const double r = errs[k - 1] / errs[k];
    ok = ok && r >= lo && r <= hi;
    ratios += (ratios.empty() ? "" : ", ") + sci(r);
  }
  return {ok, "error ratios " + ratios + " in [" + sci(lo) + ", " + sci(hi) + "] (dt from 1e-3, 3 halvings)"};
}

Outcome c8_martingale() {
  lb::SimConfig c;
  c.dim = 1;
  c.n = 4;
  c.kernel = "constant:1";
  c.sigma = "stepping-stone";
  c.initial = "sine";
  c.dt = 1e-4;
  c.t_end = 0.5;
  c.replicas = 2000;
  c.seed = 1;
  c.record_stride = 10;
  const lb::Model m = lb::Model::build(c);
  const lb::TestFunction phi = lb::TestFunction::product_sine();
  const std::vector<double> cp{0.1, 0.2, 0.3, 0.4, 0.5};

  const lb::MartingaleReport pos = lb::martingale_test(lb::simulate(c, m), phi, m.noise, m.sigma, cp);
  double zmax = 0.0, qlo = INFINITY, qhi = 0.0;
  for (std::size_t k = 0; k < cp.size(); ++k) {
    zmax = std::max(zmax, std::abs(pos.z_scores[k]));
    qlo = std::min(qlo, pos.qv_ratio[k]);
    qhi = std::max(qhi, pos.qv_ratio[k]);
  }

  lb::SimConfig neg = c;
  neg.burgers_term = false;
  const lb::MartingaleReport ctl = lb::martingale_test(lb::simulate(neg, m), phi, m.noise, m.sigma, cp);
  const double z_neg = ctl.z_scores.back();
  const bool neg_fails = !(std::abs(z_neg) <= lb::kZLimit);

  return {pos.pass() && neg_fails,
          "max |z| " + sci(zmax) + " <= " + sci(lb::kZLimit) + ", qv ratio [" + sci(qlo) + ", " + sci(qhi) +
              "] within [" + sci(lb::kQvLow) + ", " + sci(lb::kQvHigh) + "]; negative control z(T) " + sci(z_neg) +
              (neg_fails ? " fails" : " does not fail") + " the z-test"};
}

Outcome c9_refinement() {
  lb::RefinementConfig rc;
  rc.base.dim = 1;
  rc.base.dt = 1e-4;
  rc.base.t_end = 0.2;
  rc.base.kernel = "constant:1";
  rc.base.sigma = "stepping-stone";
  rc.base.initial = "sine";
  rc.base.seed = 1;
  rc.levels = {4, 8, 16};
  rc.replicas = 500;
  rc.batches = 10;
  const lb::RefinementReport r = lb::run_refinement(rc);
  return {r.pass, "median KS(4,8) " + sci(r.median_ks[0]) + " >= median KS(8,16) " + sci(r.median_ks[1]) +
                      " (10 batches, 500 replicas, T = 0.2)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c10_reproducibility(const fs::path& dir) {
  struct Case {
    std::string name;
    std::vector<std::string> args;
  };
  const std::vector<Case> cases{
      {"simulate", {"simulate", "--n", "4", "--dt", "1e-4", "--t-end", "0.05", "--replicas", "4", "--kernel", "exp:0.5", "--seed", "3"}},
      {"martingale-test", {"martingale-test", "--n", "3", "--dt", "1e-3", "--t-end", "0.1", "--replicas", "200", "--seed", "3"}},
      {"converge", {"converge", "--levels", "2,3,4", "--dt", "1e-3", "--t-end", "0.05", "--replicas", "200", "--batches", "2", "--seed", "3"}},
      {"kernel-check", {"kernel-check", "--dim", "1", "--n", "6"}},
      {"matrix-dump", {"matrix-dump", "--dim", "2", "--n", "3", "--which", "C", "--kernel", "exp:1"}},
  };
  bool ok = true;
  std::string detail;
  std::ostringstream sink;
  for (const auto& cs : cases) {
    std::string out[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path p = dir / (cs.name + "_" + std::to_string(k) + ".out");
      std::vector<std::string> args = cs.args;
      args.insert(args.end(), {"-o", p.string(), "--workers", k == 0 ? "1" : "3"});
      if (cs.name == "kernel-check" || cs.name == "matrix-dump") args.resize(args.size() - 2);
      const int code = lb::cli::run(args, sink, sink);
      if (code != 0 && code != 3) {
        ok = false;
        detail += cs.name + " exited " + std::to_string(code) + "; ";
      }
      out[k] = slurp(p);
    }
    const bool same = !out[0].empty() && out[0] == out[1];
    ok = ok && same;
    detail += cs.name + (same ? " identical" : " differs") + "; ";
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("lburgers_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"operator-equivalence", c1_operator_equivalence},
      {"matrix-ground-truth", c2_matrix_ground_truth},
      {"noise-covariance", c3_noise_covariance},
      {"heat-kernel-semigroup", c4_semigroup},
      {"kernel-row-sums", c5_row_sums},
      {"range-invariant-trend", c6_range_trend},
      {"deterministic-convergence", c7_deterministic_convergence},
      {"martingale-test", c8_martingale},
      {"refinement-trend", c9_refinement},
      {"reproducibility", [&] { return c10_reproducibility(dir); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << i + 1 << " " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  fs::remove_all(dir);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
