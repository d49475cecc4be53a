#pragma once

// Command-line front end: config loading, subcommand pipelines, output files
// and metadata sidecars.
//
// Exit codes: 0 success, 1 validation/config/I-O error, 2 numerical error,
// 3 statistical test FAIL.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lattice_burgers/diagnostics.hpp"
#include "lattice_burgers/error.hpp"
#include "lattice_burgers/heatkernel.hpp"
#include "lattice_burgers/integrator.hpp"
#include "lattice_burgers/noise.hpp"
#include "lattice_burgers/numerics.hpp"
#include "lattice_burgers/operators.hpp"
#include "lattice_burgers/version.hpp"

namespace lattice_burgers::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 1, kNumerical = 2, kStatisticalFail = 3 };

struct ConfigEntry {
  std::string key;
  std::string value;
  int line;
};

/// Flat `key = value` text; `#` starts a comment, blank lines are skipped.
inline std::vector<ConfigEntry> load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config file '" + path + "'");
  std::vector<ConfigEntry> out;
  std::string raw;
  int line = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::config, path + ":" + std::to_string(line) + ": expected key=value, got '" + text + "'");
    ConfigEntry e{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line};
    if (e.key.empty()) throw Error(ErrorKind::config, path + ":" + std::to_string(line) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

/// Comma-separated reals.
inline std::vector<double> parse_real_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, what));
  if (out.empty()) throw Error(ErrorKind::config, what + " list is empty");
  return out;
}

struct Options {
  std::string config;
  std::string output = "-";
  SimConfig sim;
  std::string record_stride = "auto";
  std::string test_function = "sine";
  std::string checkpoints;
  bool negative_control = false;
  std::string levels = "4,8,16";
  std::size_t batches = 10;
  std::string which = "A";
  double alpha = 0.5;
  std::string t_grid = "0.01,0.02,0.05,0.1,0.2,0.5,1,1.5,2";
  std::string h_grid = "1e-4,3e-4,1e-3,3e-3,1e-2";
};

namespace detail {

class Output {
 public:
  explicit Output(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw Error(ErrorKind::io, "cannot open output file '" + path + "' for writing");
      os_ = file_.get();
    }
  }
  std::ostream& stream() { return *os_; }
  void close() {
    os_->flush();
    if (!*os_) throw Error(ErrorKind::io, "write to '" + path_ + "' failed");
    if (file_) file_->close();
  }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline void write_sidecar(const std::string& output, const nlohmann::ordered_json& meta) {
  if (output == "-") return;
  const std::string path = output + ".meta.json";
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::io, "cannot write metadata sidecar '" + path + "'");
  os << meta.dump(2) << '\n';
}

inline std::size_t resolve_stride(const Options& o, std::size_t steps) {
  if (o.record_stride == "auto") return std::max<std::size_t>(1, steps / 500);
  const long long v = parse_integer(o.record_stride, "record-stride");
  if (v < 1) throw Error(ErrorKind::parameter, "record-stride must be >= 1 or auto");
  return static_cast<std::size_t>(v);
}

inline nlohmann::ordered_json sim_meta(const SimConfig& c, const Model& m) {
  nlohmann::ordered_json j;
  j["echo"] = c.echo();
  j["fingerprint"] = c.fingerprint();
  j["steps"] = c.steps();
  j["stability_ceiling"] = c.stability_ceiling();
  j["stability_override"] = c.exceeds_ceiling();
  j["cholesky_jitter"] = m.noise.jitter();
  j["noise_scale_ratio"] = m.noise_scale_ratio();
  return j;
}

inline void add_sim_options(CLI::App* s, Options& o, bool with_replicas = true) {
  s->add_option("--dt", o.sim.dt, "time step");
  s->add_option("--t-end", o.sim.t_end, "final time");
  if (with_replicas) s->add_option("--replicas", o.sim.replicas, "number of replicas");
  s->add_option("--kernel", o.sim.kernel, "constant:<c0> | exp:<ell> | gaussian:<ell>");
  s->add_option("--sigma", o.sim.sigma, "stepping-stone | log-power:<gamma> | zero");
  s->add_option("--init", o.sim.initial, "constant:<c> | sine");
  s->add_option("--quadrature", o.sim.quadrature, "quadrature nodes per axis and cell for C");
  s->add_flag("--allow-unstable", o.sim.allow_unstable, "permit dt above 1/(4 d n^2)");
  s->add_option("--workers", o.sim.workers, "worker threads, 0 = all cores");
}

inline void add_grid_options(CLI::App* s, Options& o) {
  s->add_option("--config", o.config, "flat key=value config file");
  s->add_option("-o,--output", o.output, "output path, - for stdout");
  s->add_option("--dim", o.sim.dim, "lattice dimension d");
  s->add_option("--n", o.sim.n, "resolution n (nodes k/n, k = 1..n-1)");
  s->add_option("--seed", o.sim.seed, "64-bit master seed");
}

// ---- subcommands ------------------------------------------------------------

inline nlohmann::ordered_json cmd_simulate(Options& o, std::ostream& out) {
  SimConfig c = o.sim;
  c.validate();
  c.record_stride = resolve_stride(o, c.steps());
  c.validate();
  const Model model = Model::build(c);
  const Ensemble ens = simulate(c, model);

  Output file(o.output, out);
  auto& os = file.stream();
  os << "replica,t,i,value\n";
  std::size_t clamps = 0;
  double excursion = 0.0;
  for (std::size_t r = 0; r < ens.replicas.size(); ++r) {
    const auto& tr = ens.replicas[r];
    clamps += tr.clamp_count();
    excursion = std::max(excursion, tr.max_excursion());
    for (std::size_t s = 0; s < tr.times.size(); ++s) {
      const std::string t = format_double(tr.times[s]);
      const auto v = tr.states[s].values();
      for (std::size_t i = 0; i < v.size(); ++i) os << r << ',' << t << ',' << i + 1 << ',' << format_double(v[i]) << '\n';
    }
  }
  file.close();
  auto meta = sim_meta(c, model);
  meta["record_stride"] = c.record_stride;
  meta["clamp_count"] = clamps;
  meta["max_excursion"] = excursion;
  return meta;
}

inline nlohmann::ordered_json cmd_martingale(Options& o, std::ostream& out, bool& failed) {
  SimConfig c = o.sim;
  c.validate();
  c.record_stride = resolve_stride(o, c.steps());
  c.burgers_term = !o.negative_control;
  c.validate();
  const Model model = Model::build(c);
  const Ensemble ens = simulate(c, model);
  const TestFunction phi = TestFunction::parse(o.test_function);
  std::vector<double> cps;
  if (o.checkpoints.empty()) {
    // Five evenly spaced record times ending at t_end.
    const std::size_t snaps = ens.replicas.front().times.size();
    for (int k = 1; k <= 5; ++k) cps.push_back(ens.replicas.front().times[(snaps - 1) * k / 5]);
  } else {
    cps = parse_real_list(o.checkpoints, "checkpoints");
  }
  const MartingaleReport rep = martingale_test(ens, phi, model.noise, model.sigma, cps);

  Output file(o.output, out);
  auto& os = file.stream();
  os << "# martingale-test\n";
  os << "# config: " << c.echo() << " test-function=" << phi.name() << '\n';
  os << "# replicas=" << rep.replicas << " degenerate=" << (rep.degenerate ? "yes" : "no") << '\n';
  os << "t,mean_M,se_M,z,qv_predicted,qv_empirical,qv_ratio\n";
  for (std::size_t k = 0; k < rep.times.size(); ++k)
    os << format_double(rep.times[k]) << ',' << format_double(rep.mean_M[k]) << ',' << format_double(rep.se_M[k]) << ','
       << format_double(rep.z_scores[k]) << ',' << format_double(rep.qv_predicted[k]) << ','
       << format_double(rep.qv_empirical[k]) << ',' << format_double(rep.qv_ratio[k]) << '\n';
  os << "z_test: " << (rep.z_pass ? "PASS" : "FAIL") << '\n';
  os << "qv_test: " << (rep.qv_pass ? "PASS" : "FAIL") << '\n';
  os << "RESULT: " << (rep.pass() ? "PASS" : "FAIL") << '\n';
  file.close();
  failed = !rep.pass();
  auto meta = sim_meta(c, model);
  meta["record_stride"] = c.record_stride;
  meta["test_function"] = phi.name();
  meta["negative_control"] = o.negative_control;
  meta["result"] = rep.pass() ? "PASS" : "FAIL";
  return meta;
}

inline nlohmann::ordered_json cmd_converge(Options& o, std::ostream& out, bool& failed) {
  RefinementConfig rc;
  rc.base = o.sim;
  rc.replicas = o.sim.replicas;
  rc.batches = o.batches;
  rc.test_function = o.test_function;
  rc.levels.clear();
  for (double v : parse_real_list(o.levels, "levels")) {
    if (v != std::floor(v)) throw Error(ErrorKind::config, "levels must be integers");
    rc.levels.push_back(static_cast<int>(v));
  }
  const RefinementReport rep = run_refinement(rc);

  Output file(o.output, out);
  auto& os = file.stream();
  os << "# converge\n";
  os << "# config: " << o.sim.echo() << " levels=" << o.levels << " batches=" << rc.batches
     << " test-function=" << rc.test_function << '\n';
  os << "batch";
  for (std::size_t p = 0; p + 1 < rep.levels.size(); ++p)
    os << ",ks_" << rep.levels[p] << '_' << rep.levels[p + 1];
  os << '\n';
  for (std::size_t b = 0; b < rep.ks.size(); ++b) {
    os << b;
    for (double v : rep.ks[b]) os << ',' << format_double(v);
    os << '\n';
  }
  os << "median";
  for (double v : rep.median_ks) os << ',' << format_double(v);
  os << '\n';
  os << "RESULT: " << (rep.pass ? "PASS" : "FAIL") << '\n';
  file.close();
  failed = !rep.pass;
  nlohmann::ordered_json meta;
  meta["echo"] = o.sim.echo();
  meta["levels"] = rep.levels;
  meta["batches"] = rc.batches;
  meta["result"] = rep.pass ? "PASS" : "FAIL";
  return meta;
}

inline nlohmann::ordered_json cmd_kernel_check(Options& o, std::ostream& out) {
  if (o.sim.dim < 1 || o.sim.dim > 3) throw Error(ErrorKind::parameter, "kernel-check supports dim 1..3");
  const HeatKernel1D hk(o.sim.n);
  const auto ts = parse_real_list(o.t_grid, "t-grid");
  const auto hs = parse_real_list(o.h_grid, "h-grid");
  const EstimateReport rep = estimate_report(hk, o.sim.dim, ts, hs, o.alpha);

  Output file(o.output, out);
  auto& os = file.stream();
  os << "# kernel-check n=" << rep.n << " d=" << rep.d << " alpha=" << format_double(rep.alpha) << '\n';
  os << "# least_negative_eigenvalue=" << format_double(rep.least_negative_eigenvalue) << '\n';
  os << "# decay_slope=" << format_double(rep.decay_slope) << '\n';
  os << "# max_clip=" << format_double(rep.max_clip) << '\n';
  os << "estimate,t,scale,value\n";
  for (const auto& r : rep.rows) {
    const char* tag = r.estimate == 'i' ? "l1" : r.estimate == '2' ? "pair" : r.estimate == '3' ? "shift" : "alpha";
    os << tag << ',' << format_double(r.t) << ',' << format_double(r.scale) << ',' << format_double(r.value) << '\n';
  }
  os << "check,t,bound_exponent,fitted_exponent,constant,holds\n";
  auto checks = [&](const char* tag, const std::vector<ExponentCheck>& v) {
    for (std::size_t k = 0; k < v.size(); ++k)
      os << tag << ',' << format_double(ts[k]) << ',' << format_double(v[k].bound_exponent) << ','
         << format_double(v[k].fitted_exponent) << ',' << format_double(v[k].constant) << ',' << (v[k].holds ? 1 : 0)
         << '\n';
  };
  checks("pair", rep.pair_checks);
  checks("shift", rep.shift_checks);
  checks("alpha", rep.alpha_checks);
  file.close();
  nlohmann::ordered_json meta;
  meta["n"] = rep.n;
  meta["dim"] = rep.d;
  meta["alpha"] = rep.alpha;
  meta["t_grid"] = ts;
  meta["h_grid"] = hs;
  meta["max_clip"] = rep.max_clip;
  meta["reconstruction_error"] = hk.reconstruction_error();
  return meta;
}

inline nlohmann::ordered_json cmd_matrix_dump(Options& o, std::ostream& out) {
  const GridSpec g(o.sim.dim, o.sim.n);
  Output file(o.output, out);
  auto& os = file.stream();
  if (o.which == "A") {
    write_coordinate(os, build_A(g));
  } else if (o.which == "B") {
    write_coordinate(os, build_B(g));
  } else if (o.which == "C") {
    const Eigen::MatrixXd C = cell_covariance(CorrelationKernel::parse(o.sim.kernel), g, o.sim.quadrature);
    for (Eigen::Index i = 0; i < C.rows(); ++i)
      for (Eigen::Index j = 0; j < C.cols(); ++j)
        if (C(i, j) != 0.0) os << i + 1 << ' ' << j + 1 << ' ' << format_double(C(i, j)) << '\n';
  } else {
    throw Error(ErrorKind::config, "--which must be A, B or C, got '" + o.which + "'");
  }
  file.close();
  nlohmann::ordered_json meta;
  meta["which"] = o.which;
  meta["dim"] = g.d();
  meta["n"] = g.n();
  if (o.which == "C") {
    meta["kernel"] = o.sim.kernel;
    meta["quadrature"] = o.sim.quadrature;
  }
  return meta;
}

inline nlohmann::ordered_json option_echo(const CLI::App* sub) {
  nlohmann::ordered_json j;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const auto& res = opt->results();
    j[opt->get_lnames().front()] = res.empty() ? opt->get_default_str() : res.back();
  }
  return j;
}

// Token position of --config in argv, or the value of --config=.
inline std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace detail

/// Runs one subcommand. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  // Per-subcommand defaults.
  if (!args.empty() && args[0] == "simulate") {
    o.record_stride = "1";
  } else if (!args.empty() && args[0] == "martingale-test") {
    o.sim.n = 4;
    o.sim.t_end = 0.5;
    o.sim.replicas = 2000;
    o.sim.initial = "sine";
  } else if (!args.empty() && args[0] == "converge") {
    o.sim.t_end = 0.2;
    o.sim.replicas = 500;
    o.sim.initial = "sine";
  }

  CLI::App app{"Lattice discretization of a stochastic Burgers-type equation with correlated noise", "lburgers"};
  app.set_version_flag("--version", std::string(kVersion));
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Euler-Maruyama ensemble; CSV trajectory records");
  detail::add_grid_options(sim, o);
  detail::add_sim_options(sim, o);
  sim->add_option("--record-stride", o.record_stride, "record every k-th step, or auto");

  auto* mart = app.add_subcommand("martingale-test", "ensemble test of the tested martingale");
  detail::add_grid_options(mart, o);
  detail::add_sim_options(mart, o);
  mart->add_option("--record-stride", o.record_stride, "record every k-th step, or auto");
  mart->add_option("--test-function", o.test_function, "sine | quadratic");
  mart->add_option("--checkpoints", o.checkpoints, "comma-separated record times");
  mart->add_flag("--negative-control", o.negative_control, "simulate without the 1/2 B u^2 drift term");

  auto* conv = app.add_subcommand("converge", "KS distances between consecutive refinement levels");
  detail::add_grid_options(conv, o);
  detail::add_sim_options(conv, o);
  conv->add_option("--levels", o.levels, "comma-separated resolutions");
  conv->add_option("--batches", o.batches, "independent seed batches");
  conv->add_option("--test-function", o.test_function, "sine | quadratic");

  auto* kc = app.add_subcommand("kernel-check", "discrete heat-kernel estimate report");
  detail::add_grid_options(kc, o);
  kc->add_option("--alpha", o.alpha, "order of the weighted norm");
  kc->add_option("--t-grid", o.t_grid, "comma-separated times");
  kc->add_option("--h-grid", o.h_grid, "comma-separated time shifts");

  auto* md = app.add_subcommand("matrix-dump", "coordinate-format dump of A, B or C");
  detail::add_grid_options(md, o);
  md->add_option("--which", o.which, "A | B | C");
  md->add_option("--kernel", o.sim.kernel, "kernel for C");
  md->add_option("--quadrature", o.sim.quadrature, "quadrature nodes per axis and cell for C");

  try {
    std::vector<std::string> tokens;
    if (!args.empty()) tokens.push_back(args[0]);
    const std::string config_path = detail::find_config_path(args);
    if (!config_path.empty() && !args.empty()) {
      CLI::App* target = nullptr;
      for (auto* s : app.get_subcommands(nullptr))
        if (s->get_name() == args[0]) target = s;
      if (target != nullptr) {
        for (const auto& e : load_config(config_path)) {
          if (e.key == "config" || target->get_option_no_throw("--" + e.key) == nullptr)
            throw Error(ErrorKind::config, config_path + ":" + std::to_string(e.line) + ": unknown key '" + e.key +
                                               "' for " + args[0]);
          tokens.push_back("--" + e.key + "=" + e.value);
        }
      }
    }
    tokens.insert(tokens.end(), args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(tokens.begin(), tokens.end());
    app.parse(tokens);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "lburgers: " << e.what() << " (see --help)\n";
    return kValidation;
  } catch (const Error& e) {
    err << "lburgers: " << e.what() << '\n';
    return kValidation;
  }

  CLI::App* active = app.get_subcommands().front();
  const auto start = std::chrono::steady_clock::now();
  try {
    bool failed = false;
    nlohmann::ordered_json meta;
    const std::string name = active->get_name();
    if (name == "simulate") meta = detail::cmd_simulate(o, out);
    else if (name == "martingale-test") meta = detail::cmd_martingale(o, out, failed);
    else if (name == "converge") meta = detail::cmd_converge(o, out, failed);
    else if (name == "kernel-check") meta = detail::cmd_kernel_check(o, out);
    else meta = detail::cmd_matrix_dump(o, out);

    nlohmann::ordered_json side;
    side["subcommand"] = name;
    side["version"] = std::string(kVersion);
    side["seed"] = o.sim.seed;
    side["config"] = detail::option_echo(active);
    side["details"] = meta;
    side["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    detail::write_sidecar(o.output, side);
    return failed ? kStatisticalFail : kSuccess;
  } catch (const Error& e) {
    err << "lburgers: " << e.what() << '\n';
    return is_numerical(e.kind()) ? kNumerical : kValidation;
  } catch (const std::exception& e) {
    err << "lburgers: " << e.what() << '\n';
    return kValidation;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace lattice_burgers::cli
