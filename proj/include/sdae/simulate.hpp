#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <tuple>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sdae/inherent.hpp"
#include "sdae/linalg.hpp"
#include "sdae/rng.hpp"

namespace sdae {

enum class Scheme { Euler, TamedEuler };

inline std::string_view scheme_name(Scheme s) { return s == Scheme::Euler ? "euler" : "tamed-euler"; }

inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "euler") return Scheme::Euler;
  if (s == "tamed-euler") return Scheme::TamedEuler;
  return std::nullopt;
}

// Uniform grid 0 = t_0 < ... < t_steps = t_end.
inline std::vector<double> step_grid(double t_end, std::size_t steps) {
  if (!(t_end > 0.0) || steps == 0) throw std::invalid_argument("step_grid: need t_end > 0 and at least one step");
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) g[k] = t_end * static_cast<double>(k) / static_cast<double>(steps);
  g[steps] = t_end;
  return g;
}

inline void require_increasing(std::span<const double> grid) {
  if (grid.size() < 2) throw std::invalid_argument("time grid needs at least two points");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      throw std::invalid_argument("time grid must be strictly increasing (step " + std::to_string(k) + ")");
}

// Brownian increments, one row of m components per grid step.
struct WienerIncrements {
  std::size_t steps = 0;
  std::size_t m = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t k) const { return {data.data() + k * m, m}; }

  // Sums consecutive groups of `factor` steps: the increments of the same Brownian
  // path on a grid `factor` times coarser.
  WienerIncrements coarsen(std::size_t factor) const {
    if (factor == 0 || steps % factor != 0) throw std::invalid_argument("coarsen: factor must divide the step count");
    WienerIncrements c{steps / factor, m, std::vector<double>(steps / factor * m, 0.0)};
    for (std::size_t k = 0; k < steps; ++k)
      for (std::size_t j = 0; j < m; ++j) c.data[(k / factor) * m + j] += data[k * m + j];
    return c;
  }
};

// Path `path` of master seed `seed` owns its own counter-based stream, so increments
// are reproducible per (seed, path) regardless of evaluation order.
inline WienerIncrements wiener_increments(std::size_t m, std::span<const double> grid, std::uint64_t seed,
                                          std::uint64_t path = 0) {
  require_increasing(grid);
  const RandomStream stream(seed, streams::kWienerBase + path);
  const std::size_t steps = grid.size() - 1;
  const std::uint64_t pairs_per_step = (m + 1) / 2;
  WienerIncrements w{steps, m, std::vector<double>(steps * m)};
  for (std::size_t k = 0; k < steps; ++k) {
    const double sd = std::sqrt(grid[k + 1] - grid[k]);
    for (std::size_t j = 0; j < m; j += 2) {
      const auto [z1, z2] = stream.normal_pair(k * pairs_per_step + j / 2);
      w.data[k * m + j] = sd * z1;
      if (j + 1 < m) w.data[k * m + j + 1] = sd * z2;
    }
  }
  return w;
}

class PathError : public NumericalError {
 public:
  PathError(std::size_t step, const std::string& what)
      : NumericalError("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

inline constexpr double kDivergenceGuard = 1e12;

struct StepView {
  std::size_t index;
  double t;
  const Vector& u;
  const Vector& x;
  double constraint_residual;
};

struct PathSummary {
  bool divergent = false;
  std::size_t steps_completed = 0;
  double max_constraint_residual = 0.0;
  double max_subspace_deviation = 0.0;  // max ||u - P(t) u|| after re-projection
};

// Integrates the inherent SDE along `grid` and hands every accepted state (including the
// initial one) to `observe`. Euler:  u+ = P(t+)(u + f dt + g dW).  Tamed Euler scales the
// increment by 1 / (1 + sqrt(dt) ||f|| + sqrt(dt) ||g||_F). A path whose ||u|| exceeds
// 1e12 stops and is marked divergent.
template <class Observer>
PathSummary integrate_path(const InherentSde& sde, Scheme scheme, std::span<const double> grid,
                           const WienerIncrements& dw, const Vector& u0, Observer&& observe) {
  require_increasing(grid);
  if (dw.steps != grid.size() - 1 || dw.m != sde.problem().m)
    throw std::invalid_argument("integrate: increments do not match the grid or noise dimension");
  PathSummary summary;
  InherentState state;
  try {
    state = sde.evaluate(grid[0], sde.family(grid[0]).p * u0);
  } catch (const Error& e) {
    throw PathError(0, e.what());
  }
  Vector u = state.constraint.u;
  summary.max_constraint_residual = state.constraint.residual;
  observe(StepView{0, grid[0], u, state.constraint.x, state.constraint.residual});

  const std::size_t n = sde.problem().n;
  const std::size_t m = sde.problem().m;
  Vector noise(n);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double dt = grid[k + 1] - grid[k];
    const std::span<const double> inc = dw.row(k);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += state.diffusion(i, j) * inc[j];
      noise[i] = s;
    }
    double scale = 1.0;
    if (scheme == Scheme::TamedEuler) {
      const double root = std::sqrt(dt);
      scale = 1.0 / (1.0 + root * state.drift.norm() + root * state.diffusion.frobenius_norm());
    }
    Vector next = u;
    for (std::size_t i = 0; i < n; ++i) next[i] += scale * (state.drift[i] * dt + noise[i]);
    const ProjectorFamily& fam = sde.family(grid[k + 1]);
    next = fam.p * next;
    if (!next.all_finite() || next.norm() > kDivergenceGuard) {
      summary.divergent = true;
      return summary;
    }
    summary.max_subspace_deviation = std::max(summary.max_subspace_deviation, (fam.p * next - next).norm());
    try {
      state = sde.evaluate(grid[k + 1], next, state.constraint.v);
    } catch (const Error& e) {
      throw PathError(k + 1, e.what());
    }
    u = std::move(next);
    summary.max_constraint_residual = std::max(summary.max_constraint_residual, state.constraint.residual);
    summary.steps_completed = k + 1;
    observe(StepView{k + 1, grid[k + 1], u, state.constraint.x, state.constraint.residual});
  }
  return summary;
}

struct PathResult {
  std::vector<double> times;
  std::vector<Vector> u;
  std::vector<Vector> x;
  std::vector<double> constraint_residuals;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  PathSummary summary;
};

inline PathResult integrate(const InherentSde& sde, Scheme scheme, std::span<const double> grid, std::uint64_t seed,
                            std::uint64_t path = 0) {
  const WienerIncrements dw = wiener_increments(sde.problem().m, grid, seed, path);
  PathResult r;
  r.seed = seed;
  r.path = path;
  const Vector u0 = sde.consistent_initial_value().u0;
  r.summary = integrate_path(sde, scheme, grid, dw, u0, [&](const StepView& s) {
    r.times.push_back(s.t);
    r.u.push_back(s.u);
    r.x.push_back(s.x);
    r.constraint_residuals.push_back(s.constraint_residual);
  });
  return r;
}

namespace detail {

// Count / mean / sum of squared deviations; merged pairwise in a fixed order so the
// totals are bit-identical however the work was scheduled.
struct RunningMoments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    count += 1.0;
    const double d = v - mean;
    mean += d / count;
    m2 += d * (v - mean);
  }
  void merge(const RunningMoments& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    const double total = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / total;
    m2 += o.m2 + d * d * count * o.count / total;
    count = total;
  }
  double std_error() const { return count > 1.0 ? std::sqrt(m2 / (count - 1.0) / count) : 0.0; }
};

// Runs `work(index)` for index in [0, count) on up to `threads` workers, each with its
// own copy of `context`.
template <class Context, class Work>
void parallel_for(std::size_t count, unsigned threads, const Context& context, Work&& work) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    Context local = context;
    for (std::size_t i = next++; i < count; i = next++) work(local, i);
  };
  if (threads <= 1) {
    run();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < threads; ++k) pool.emplace_back(run);
  for (auto& th : pool) th.join();
}

}  // namespace detail

struct EnsembleOptions {
  Scheme scheme = Scheme::TamedEuler;
  std::vector<double> orders{2.0};
  std::size_t paths = 1000;
  std::uint64_t seed = 42;
  double max_divergent_fraction = 0.01;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct MomentSeries {
  double p = 2.0;
  std::vector<double> mean;        // E ||X(t_k)||^p
  std::vector<double> std_error;
  std::vector<double> sup_mean;    // E max_{j<=k} ||X(t_j)||^p (grid maximum)
  std::vector<double> sup_std_error;
};

struct EnsembleResult {
  std::vector<double> times;
  std::size_t paths = 0;
  std::size_t divergent = 0;
  std::vector<std::size_t> divergent_by_step;  // paths diverged at or before step k
  std::vector<MomentSeries> moments;
  double max_constraint_residual = 0.0;
  double max_subspace_deviation = 0.0;
};

class EnsembleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline EnsembleResult run_ensemble(const InherentSde& sde, std::span<const double> grid, const EnsembleOptions& opt) {
  require_increasing(grid);
  if (opt.paths == 0) throw std::invalid_argument("run_ensemble: paths must be >= 1");
  for (double p : opt.orders)
    if (!(p >= 2.0)) throw std::invalid_argument("run_ensemble: moment orders must be >= 2");

  const std::size_t points = grid.size();
  const std::size_t orders = opt.orders.size();
  constexpr std::size_t kChunk = 32;
  const std::size_t chunks = (opt.paths + kChunk - 1) / kChunk;
  const Vector u0 = sde.consistent_initial_value().u0;

  struct ChunkResult {
    std::vector<detail::RunningMoments> value;  // [order][step]
    std::vector<detail::RunningMoments> sup;
    std::vector<std::size_t> divergence_steps;  // first missing step per divergent path
    double max_residual = 0.0;
    double max_deviation = 0.0;
    std::string error;
  };
  std::vector<ChunkResult> results(chunks);

  detail::parallel_for(chunks, opt.threads, sde, [&](const InherentSde& local, std::size_t c) {
    ChunkResult& out = results[c];
    out.value.resize(orders * points);
    out.sup.resize(orders * points);
    std::vector<double> norms(points);
    try {
      for (std::size_t path = c * kChunk; path < std::min(opt.paths, (c + 1) * kChunk); ++path) {
        const WienerIncrements dw = wiener_increments(local.problem().m, grid, opt.seed, path);
        const PathSummary s = integrate_path(local, opt.scheme, grid, dw, u0,
                                             [&](const StepView& v) { norms[v.index] = v.x.norm(); });
        if (s.divergent) {
          out.divergence_steps.push_back(s.steps_completed + 1);
          continue;
        }
        out.max_residual = std::max(out.max_residual, s.max_constraint_residual);
        out.max_deviation = std::max(out.max_deviation, s.max_subspace_deviation);
        for (std::size_t o = 0; o < orders; ++o) {
          double running = 0.0;
          for (std::size_t k = 0; k < points; ++k) {
            const double v = std::pow(norms[k], opt.orders[o]);
            running = std::max(running, v);
            out.value[o * points + k].add(v);
            out.sup[o * points + k].add(running);
          }
        }
      }
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  EnsembleResult r;
  r.times.assign(grid.begin(), grid.end());
  r.paths = opt.paths;
  r.divergent_by_step.assign(points, 0);
  std::vector<detail::RunningMoments> value(orders * points), sup(orders * points);
  std::size_t failed = 0;
  std::string first_error;
  for (const ChunkResult& c : results) {
    if (!c.error.empty()) {
      ++failed;
      if (first_error.empty()) first_error = c.error;
      continue;
    }
    for (std::size_t k = 0; k < orders * points; ++k) {
      value[k].merge(c.value[k]);
      sup[k].merge(c.sup[k]);
    }
    for (std::size_t step : c.divergence_steps)
      for (std::size_t k = std::min(step, points - 1); k < points; ++k) ++r.divergent_by_step[k];
    r.divergent += c.divergence_steps.size();
    r.max_constraint_residual = std::max(r.max_constraint_residual, c.max_residual);
    r.max_subspace_deviation = std::max(r.max_subspace_deviation, c.max_deviation);
  }
  if (failed > 0) throw EnsembleError(std::to_string(failed) + " path chunk(s) failed; first error: " + first_error);
  if (static_cast<double>(r.divergent) > opt.max_divergent_fraction * static_cast<double>(opt.paths))
    throw EnsembleError(std::to_string(r.divergent) + " of " + std::to_string(opt.paths) +
                        " paths diverged (threshold " + std::to_string(opt.max_divergent_fraction * 100.0) + "%)");

  for (std::size_t o = 0; o < orders; ++o) {
    MomentSeries s;
    s.p = opt.orders[o];
    for (std::size_t k = 0; k < points; ++k) {
      const auto& v = value[o * points + k];
      const auto& w = sup[o * points + k];
      s.mean.push_back(v.mean);
      s.std_error.push_back(v.std_error());
      s.sup_mean.push_back(w.mean);
      s.sup_std_error.push_back(w.std_error());
    }
    r.moments.push_back(std::move(s));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Strong self-convergence: coarse levels reuse the summed increments of a fine reference
// path, and the RMS gap of X(T) is regressed on log dt.

struct ConvergenceLevel {
  int level = 0;
  double dt = 0.0;
  double rms_error = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergenceLevel> levels;
  int reference_level = 0;
  std::size_t paths_used = 0;
  std::size_t paths_excluded = 0;
  double order = 0.0;
  double log_constant = 0.0;
};

// Least-squares slope and intercept of y against x.
inline std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

inline ConvergenceResult self_convergence(const InherentSde& sde, Scheme scheme, double t_end, std::vector<int> levels,
                                          int reference_level, std::size_t paths, std::uint64_t seed,
                                          unsigned threads = 0) {
  if (levels.empty() || paths == 0) throw std::invalid_argument("self_convergence: need levels and paths");
  for (int l : levels)
    if (l < 0 || l >= reference_level) throw std::invalid_argument("self_convergence: levels must be below the reference level");
  if (reference_level > 24) throw std::invalid_argument("self_convergence: reference level too fine");
  const std::vector<double> fine = step_grid(t_end, std::size_t{1} << reference_level);
  const Vector u0 = sde.consistent_initial_value().u0;

  struct PathGaps {
    bool ok = false;
    std::vector<double> squared;
    std::string error;
  };
  std::vector<PathGaps> gaps(paths);
  detail::parallel_for(paths, threads, sde, [&](const InherentSde& local, std::size_t path) {
    PathGaps& g = gaps[path];
    try {
      const WienerIncrements dw = wiener_increments(local.problem().m, fine, seed, path);
      Vector reference;
      const PathSummary ref = integrate_path(local, scheme, fine, dw, u0, [&](const StepView& s) {
        if (s.index + 1 == fine.size()) reference = s.x;
      });
      if (ref.divergent) return;
      for (int l : levels) {
        const std::vector<double> coarse = step_grid(t_end, std::size_t{1} << l);
        Vector end;
        const PathSummary s = integrate_path(local, scheme, coarse, dw.coarsen(std::size_t{1} << (reference_level - l)),
                                             u0, [&](const StepView& v) {
                                               if (v.index + 1 == coarse.size()) end = v.x;
                                             });
        if (s.divergent) return;
        g.squared.push_back((end - reference).squared_norm());
      }
      g.ok = true;
    } catch (const std::exception& e) {
      g.error = e.what();
    }
  });

  ConvergenceResult r;
  r.reference_level = reference_level;
  std::vector<double> sums(levels.size(), 0.0);
  for (const PathGaps& g : gaps) {
    if (!g.error.empty()) throw EnsembleError("self_convergence: " + g.error);
    if (!g.ok) {
      ++r.paths_excluded;
      continue;
    }
    ++r.paths_used;
    for (std::size_t i = 0; i < levels.size(); ++i) sums[i] += g.squared[i];
  }
  if (r.paths_used == 0) throw EnsembleError("self_convergence: every path diverged");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    ConvergenceLevel lv;
    lv.level = levels[i];
    lv.dt = t_end / static_cast<double>(std::size_t{1} << levels[i]);
    lv.rms_error = std::sqrt(sums[i] / static_cast<double>(r.paths_used));
    r.levels.push_back(lv);
    if (lv.rms_error > 0.0) {
      lx.push_back(std::log(lv.dt));
      ly.push_back(std::log(lv.rms_error));
    }
  }
  if (lx.size() >= 2) std::tie(r.order, r.log_constant) = fit_line(lx, ly);
  return r;
}

}  // namespace sdae
