// Command-line front end: check, decouple, simulate, convergence.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdae/sdae.hpp"

namespace {

using namespace sdae;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumerical = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

void print_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << name << " =\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << "  [";
    for (std::size_t j = 0; j < m.cols(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s% .10g", j ? ", " : "", m(i, j));
      out << buf;
    }
    out << "]\n";
  }
}

void print_vector(std::ostream& out, const std::string& name, const Vector& v) {
  out << name << " = (";
  for (std::size_t i = 0; i < v.dim(); ++i) out << (i ? ", " : "") << format_double(v[i]);
  out << ")\n";
}

// Number of uniform steps covering [0, t_end] with spacing at most dt.
std::size_t steps_for(double t_end, double dt) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw UsageError("--t-end must be finite and > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("--dt must be finite and > 0");
  const double ratio = t_end / dt;
  if (ratio > 1e8) throw UsageError("--dt too small for --t-end (more than 1e8 steps)");
  return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
}

int run_check(const std::string& source, double p, std::size_t samples, double box, std::uint64_t seed,
              std::ostream& out) {
  const SdaeProblem prob = load_problem(source);
  SampleSpec spec;
  spec.state_points = samples;
  spec.box_lo = -box;
  spec.box_hi = box;
  spec.seed = seed;
  const AssumptionReport rep = assess(prob, spec, p);
  out << "problem: " << prob.name << " (n = " << prob.n << ", m = " << prob.m << ", T = " << format_double(prob.horizon)
      << ")\n";
  out << "samples: " << spec.describe() << "\n";
  out << "index-1: " << (rep.index1.ok ? "OK" : "FAILED") << " (max |R g|_F = " << format_double(rep.index1.max_residual)
      << ")\n";
  out << "monotone: p = " << format_double(p) << ", k = " << format_double(rep.monotone.k)
      << ", projected K = " << format_double(rep.monotone.projected_k) << "\n";
  for (const auto& [q, est] : rep.lipschitz)
    out << "lipschitz: q = " << format_double(q) << ", L_q >= " << format_double(est.value) << " (" << est.pairs
        << " pairs)\n";
  out << "growth: |g|_F^2 <= c (1 + |X|^r2) with c = " << format_double(rep.growth.c)
      << ", r2 = " << format_double(rep.growth.r2) << "\n";
  out << "smoothness: max |P''| (divided differences) = " << format_double(rep.smoothness.max_second_difference)
      << ", rank changes = " << rep.smoothness.rank_changes.size() << "\n";
  for (const RankChange& rc : rep.smoothness.rank_changes)
    out << "  rank " << rc.rank_before << " -> " << rc.rank_after << " between t = " << format_double(rc.t_before)
        << " and t = " << format_double(rc.t_after) << "\n";
  if (rep.jacobian.any_singular) {
    const SamplePoint& sp = rep.jacobian.points[rep.jacobian.worst];
    out << "jacobian: SINGULAR at t = " << format_double(sp.t);
    print_vector(out, ", X", sp.x);
  } else {
    const double n = rep.jacobian.bound;
    out << "jacobian: N = max |J^-1|_F = " << format_double(n) << ", N^2 = " << format_double(n * n) << "\n";
  }
  return rep.index1.ok && !rep.jacobian.any_singular ? kOk : kNumerical;
}

int run_decouple(const std::string& source, double t, const std::vector<double>& u_in, std::ostream& out) {
  const SdaeProblem prob = load_problem(source);
  if (t < 0.0 || t > prob.horizon) throw UsageError("--t must lie in [0, T]");
  InherentSde sde(prob);
  const ProjectorFamily& fam = sde.family(t);
  Vector u = u_in.empty() ? fam.p * prob.x0 : Vector(u_in);
  if (u.dim() != prob.n) throw UsageError("--u must have " + std::to_string(prob.n) + " components");
  u = fam.p * u;
  out << "problem: " << prob.name << "\nt = " << format_double(t) << "\nrank A(t) = " << fam.rank << "\n";
  print_matrix(out, "A", fam.a);
  print_matrix(out, "Q", fam.q);
  print_matrix(out, "P", fam.p);
  print_matrix(out, "R", fam.r);
  print_matrix(out, "A^-", fam.a_minus);
  print_matrix(out, "D", fam.d);
  out << "max identity residual = " << format_double(max_residual(verify_family(fam))) << "\n";
  const ConstraintSolution sol =
      solve_constraint(prob, fam, t, u, Vector(prob.n), sde.newton_options(), /*with_jacobian=*/true);
  print_vector(out, "u", sol.u);
  print_vector(out, "v", sol.v);
  print_vector(out, "X", sol.x);
  out << "constraint residual = " << format_double(sol.residual) << " (" << sol.iterations << " iterations)\n";
  print_matrix(out, "dv/du", sol.vhat_jacobian);
  const InherentState st = sde.evaluate(t, u);
  print_vector(out, "drift", st.drift);
  print_matrix(out, "diffusion", st.diffusion);
  return kOk;
}

struct SimulateArgs {
  std::string problem;
  std::optional<double> t_end;
  double dt = 1e-3;
  std::size_t paths = 1000;
  std::uint64_t seed = 42;
  std::vector<double> orders;
  std::string scheme = "tamed-euler";
  std::string out = "-";
  unsigned threads = 0;
  std::optional<double> d;
};

std::ostream& open_output(const std::string& path, std::unique_ptr<std::ofstream>& file) {
  if (path == "-") return std::cout;
  file = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*file) throw UsageError("cannot open output file '" + path + "'");
  return *file;
}

Scheme scheme_from(const std::string& s) {
  const auto sch = parse_scheme(s);
  if (!sch) throw UsageError("unknown scheme '" + s + "' (expected euler or tamed-euler)");
  return *sch;
}

int run_simulate(const SimulateArgs& a) {
  SdaeProblem prob = load_problem(a.problem);
  const double t_end = a.t_end.value_or(prob.horizon);
  const std::size_t steps = steps_for(t_end, a.dt);
  std::vector<double> orders = a.orders.empty() ? std::vector<double>{2.0} : a.orders;
  for (double p : orders)
    if (!(p >= 2.0)) throw UsageError("--p values must be >= 2");
  if (a.paths == 0) throw UsageError("--paths must be >= 1");
  const Scheme scheme = scheme_from(a.scheme);
  prob.horizon = t_end;

  if (a.d) {
    const GrowthReport growth = check_growth(prob, SampleSpec{});
    for (double p : orders)
      if (!sup_moment_covered(p, *a.d, growth.r2))
        std::cerr << "warning: p = " << format_double(p) << " exceeds d - r2 + 2 = "
                  << format_double(sup_moment_order(*a.d, growth.r2))
                  << "; the sup-moment bound does not cover this order\n";
  }

  const InherentSde sde(prob);
  const ConsistentInitialValue init = sde.consistent_initial_value();
  if (!init.consistent)
    std::cerr << "warning: X0 violates the constraint by " << format_double(init.mismatch)
              << "; using the projected and re-solved initial value\n";

  EnsembleOptions opt;
  opt.scheme = scheme;
  opt.orders = orders;
  opt.paths = a.paths;
  opt.seed = a.seed;
  opt.threads = a.threads;
  const EnsembleResult r = run_ensemble(sde, step_grid(t_end, steps), opt);

  std::unique_ptr<std::ofstream> file;
  std::ostream& out = open_output(a.out, file);
  write_ensemble_csv(out, r,
                     {{"command", "simulate"},
                      {"problem", prob.name},
                      {"source", a.problem},
                      {"t_end", format_double(t_end)},
                      {"dt", format_double(t_end / static_cast<double>(steps))},
                      {"steps", std::to_string(steps)},
                      {"paths", std::to_string(a.paths)},
                      {"seed", std::to_string(a.seed)},
                      {"scheme", std::string(scheme_name(scheme))},
                      {"orders", join(orders)},
                      {"divergent_paths", std::to_string(r.divergent)},
                      {"max_constraint_residual", format_double(r.max_constraint_residual)}});
  out.flush();
  if (!out) throw UsageError("failed writing output");
  return kOk;
}

struct ConvergenceArgs {
  std::string problem;
  std::optional<double> t_end;
  std::vector<int> levels{6, 7, 8, 9, 10};
  int reference = 14;
  std::size_t paths = 1000;
  std::uint64_t seed = 42;
  std::string scheme = "tamed-euler";
  std::string out = "-";
  unsigned threads = 0;
};

int run_convergence(const ConvergenceArgs& a) {
  SdaeProblem prob = load_problem(a.problem);
  const double t_end = a.t_end.value_or(prob.horizon);
  if (!(t_end > 0.0)) throw UsageError("--t-end must be > 0");
  if (a.paths == 0) throw UsageError("--paths must be >= 1");
  for (int l : a.levels)
    if (l < 0 || l >= a.reference) throw UsageError("--levels must be below --reference");
  if (a.reference > 24) throw UsageError("--reference must be <= 24");
  const Scheme scheme = scheme_from(a.scheme);
  prob.horizon = t_end;
  const InherentSde sde(prob);
  const ConvergenceResult r = self_convergence(sde, scheme, t_end, a.levels, a.reference, a.paths, a.seed, a.threads);
  std::unique_ptr<std::ofstream> file;
  std::ostream& out = open_output(a.out, file);
  std::string levels;
  for (std::size_t i = 0; i < a.levels.size(); ++i) levels += (i ? "," : "") + std::to_string(a.levels[i]);
  write_convergence_csv(out, r,
                        {{"command", "convergence"},
                         {"problem", prob.name},
                         {"source", a.problem},
                         {"t_end", format_double(t_end)},
                         {"levels", levels},
                         {"paths", std::to_string(a.paths)},
                         {"seed", std::to_string(a.seed)},
                         {"scheme", std::string(scheme_name(scheme))}});
  out.flush();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Index-1 SDAE toolkit: decoupling, diagnostics, simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sdae::kVersion));

  std::string builtins;
  for (const auto& n : sdae::builtin_problem_names()) builtins += (builtins.empty() ? "" : ", ") + n;
  const std::string problem_help = "builtin name (" + builtins + ") or path to a problem file";

  // check
  std::string check_problem;
  double check_p = 2.0;
  std::size_t check_samples = 4096;
  double check_box = 10.0;
  std::uint64_t check_seed = sdae::SampleSpec{}.seed;
  auto* check = app.add_subcommand("check", "Run assumption diagnostics and print a report");
  check->add_option("--problem", check_problem, problem_help)->required();
  check->add_option("--p", check_p, "moment order for the monotone condition")->check(CLI::Range(2.0, 1e6));
  check->add_option("--samples", check_samples, "state samples")->check(CLI::PositiveNumber);
  check->add_option("--box", check_box, "sample box half-width")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "sampling seed");

  // decouple
  std::string dec_problem;
  double dec_t = 0.0;
  std::vector<double> dec_u;
  auto* decouple = app.add_subcommand("decouple", "Print the projector family and constraint solution at (t, u)");
  decouple->add_option("--problem", dec_problem, problem_help)->required();
  decouple->add_option("--t", dec_t, "time");
  decouple->add_option("--u", dec_u, "state u (comma separated; default P(t) X0)")->delimiter(',');

  // simulate
  SimulateArgs sim;
  std::size_t sim_steps = 0;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo moment estimates, written as CSV");
  simulate->add_option("--problem", sim.problem, problem_help)->required();
  simulate->add_option("--t-end", sim.t_end, "final time (default: the problem horizon)");
  auto* dt_opt = simulate->add_option("--dt", sim.dt, "step size (default 1e-3)");
  auto* steps_opt = simulate->add_option("--steps", sim_steps, "number of steps (alternative to --dt)")
                        ->check(CLI::PositiveNumber);
  dt_opt->excludes(steps_opt);
  simulate->add_option("--paths", sim.paths, "number of paths");
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--p", sim.orders, "moment order, repeatable (default 2)");
  simulate->add_option("--scheme", sim.scheme, "euler or tamed-euler (default)");
  simulate->add_option("--out", sim.out, "output CSV path ('-' for stdout)");
  simulate->add_option("--threads", sim.threads, "worker threads (0: all cores); output does not depend on it");
  simulate->add_option("--d", sim.d, "flag moment orders above d - r2 + 2");

  // convergence
  ConvergenceArgs conv;
  auto* convergence = app.add_subcommand("convergence", "Strong self-convergence table, written as CSV");
  convergence->add_option("--problem", conv.problem, problem_help)->required();
  convergence->add_option("--t-end", conv.t_end, "final time (default: the problem horizon)");
  convergence->add_option("--levels", conv.levels, "coarse levels l (dt = T / 2^l)")->delimiter(',');
  convergence->add_option("--reference", conv.reference, "reference level");
  convergence->add_option("--paths", conv.paths, "number of coupled paths");
  convergence->add_option("--seed", conv.seed, "master seed");
  convergence->add_option("--scheme", conv.scheme, "euler or tamed-euler (default)");
  convergence->add_option("--out", conv.out, "output CSV path ('-' for stdout)");
  convergence->add_option("--threads", conv.threads, "worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*check) return run_check(check_problem, check_p, check_samples, check_box, check_seed, std::cout);
    if (*decouple) return run_decouple(dec_problem, dec_t, dec_u, std::cout);
    if (*simulate) {
      if (sim_steps > 0) {
        const double t_end = sim.t_end.value_or(sdae::load_problem(sim.problem).horizon);
        sim.dt = t_end / static_cast<double>(sim_steps);
      }
      return run_simulate(sim);
    }
    if (*convergence) return run_convergence(conv);
  } catch (const sdae::UnknownProblem& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const sdae::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const sdae::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
