#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdae/linalg.hpp"
#include "sdae/problem.hpp"
#include "sdae/projectors.hpp"
#include "sdae/rng.hpp"

namespace sdae {

// Sampled diagnostics: every constant below is certified on the sample set only.
struct SampleSpec {
  double t_begin = 0.0;
  std::optional<double> t_end;  // defaults to the problem horizon
  std::size_t t_points = 64;
  double box_lo = -10.0;
  double box_hi = 10.0;
  std::size_t state_points = 4096;
  // false: state sample i is paired with grid time i mod t_points.
  // true: every state sample is paired with every grid time.
  bool product = false;
  std::uint64_t seed = 20240901;

  std::string describe() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "t in [%g, %s] (%zu points), box [%g, %g]^n, %zu states%s, seed %llu", t_begin,
                  t_end ? std::to_string(*t_end).c_str() : "T", t_points, box_lo, box_hi, state_points,
                  product ? " x all times" : "", static_cast<unsigned long long>(seed));
    return buf;
  }
};

struct SamplePoint {
  double t;
  Vector x;
};

inline std::vector<double> uniform_grid(double begin, double end, std::size_t points) {
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = begin;
    return g;
  }
  for (std::size_t k = 0; k < points; ++k)
    g[k] = k + 1 == points ? end : begin + (end - begin) * static_cast<double>(k) / static_cast<double>(points - 1);
  return g;
}

inline std::vector<double> time_grid(const SdaeProblem& p, const SampleSpec& s) {
  if (s.t_points == 0) throw std::invalid_argument("sample spec: t_points must be >= 1");
  return uniform_grid(s.t_begin, s.t_end.value_or(p.horizon), s.t_points);
}

namespace detail {
// Uniform state vector in the box; draw i depends on (seed, i) only, so a larger
// sample set always extends a smaller one.
inline Vector box_sample(const RandomStream& stream, std::uint64_t i, std::size_t n, double lo, double hi) {
  Vector x(n);
  const std::uint64_t blocks = (n + 1) / 2;
  for (std::size_t k = 0; k < n; k += 2) {
    const auto [a, b] = stream.uniform_pair(i * blocks + k / 2);
    x[k] = lo + (hi - lo) * a;
    if (k + 1 < n) x[k + 1] = lo + (hi - lo) * b;
  }
  return x;
}

// Uniform point in the Euclidean ball of radius q.
inline Vector ball_sample(const RandomStream& stream, std::uint64_t i, std::size_t n, double q) {
  const std::uint64_t blocks = (n + 1) / 2 + 1;
  Vector x(n);
  for (std::size_t k = 0; k < n; k += 2) {
    const auto [a, b] = stream.normal_pair(i * blocks + k / 2);
    x[k] = a;
    if (k + 1 < n) x[k + 1] = b;
  }
  const double u = stream.uniform_pair(i * blocks + blocks - 1).first;
  const double norm = x.norm();
  return x * (q * std::pow(u, 1.0 / static_cast<double>(n)) / (norm > 0.0 ? norm : 1.0));
}
}  // namespace detail

inline std::vector<SamplePoint> sample_points(const SdaeProblem& p, const SampleSpec& s) {
  const std::vector<double> times = time_grid(p, s);
  const RandomStream stream(s.seed, streams::kDiagnosticsBase + 16);
  std::vector<SamplePoint> out;
  out.reserve(s.product ? s.state_points * times.size() : s.state_points);
  for (std::size_t i = 0; i < s.state_points; ++i) {
    Vector x = detail::box_sample(stream, i, p.n, s.box_lo, s.box_hi);
    if (s.product) {
      for (double t : times) out.push_back({t, x});
    } else {
      out.push_back({times[i % times.size()], std::move(x)});
    }
  }
  return out;
}

// Projector families keyed by the exact time value.
class FamilyTable {
 public:
  explicit FamilyTable(const SdaeProblem& p) : problem_(&p) {}
  const ProjectorFamily& at(double t) {
    auto it = table_.find(t);
    if (it == table_.end()) it = table_.emplace(t, family_at(problem_->a_at(t), t)).first;
    return it->second;
  }

 private:
  const SdaeProblem* problem_;
  std::map<double, ProjectorFamily> table_;
};

// ---------------------------------------------------------------------------
// Index-1 structure: the noise must vanish under R(t), i.e. Im g(t,X) within Im A(t).

struct Index1Report {
  bool ok = true;
  double max_residual = 0.0;  // max ||R(t) g(t,X)||_F
  double tolerance = 1e-10;
  std::optional<SamplePoint> worst;
};

inline Index1Report check_index1(const SdaeProblem& p, const std::vector<SamplePoint>& points,
                                 double tolerance = 1e-10) {
  FamilyTable families(p);
  Index1Report rep;
  rep.tolerance = tolerance;
  for (const SamplePoint& s : points) {
    const double r = (families.at(s.t).r * p.g_at(s.t, s.x)).frobenius_norm();
    if (!rep.worst || r > rep.max_residual) {
      rep.max_residual = r;
      rep.worst = s;
    }
  }
  rep.ok = rep.max_residual <= tolerance;
  return rep;
}

inline Index1Report check_index1(const SdaeProblem& p, const SampleSpec& s) {
  return check_index1(p, sample_points(p, s));
}

// ---------------------------------------------------------------------------
// Monotone condition:
//   <P X, A^- f> + (p-1)/2 |A^- g|_F^2 <= k (1 + ||X||^2)
// and the projected variant with right-hand side K (1 + ||P X||^2).

struct MonotoneReport {
  double p = 2.0;
  double k = 0.0;         // smallest k valid on the samples (clamped at 0)
  double projected_k = 0.0;  // same ratio against 1 + ||P X||^2
  std::optional<SamplePoint> worst;
};

inline double monotone_lhs(const SdaeProblem& prob, const ProjectorFamily& fam, double t, const Vector& x, double p) {
  const Vector drift = fam.a_minus * prob.f_at(t, x);
  const double diffusion = (fam.a_minus * prob.g_at(t, x)).frobenius_norm();
  return (fam.p * x).dot(drift) + 0.5 * (p - 1.0) * diffusion * diffusion;
}

inline MonotoneReport check_monotone(const SdaeProblem& prob, double p, const std::vector<SamplePoint>& points) {
  if (!(p >= 2.0)) throw std::invalid_argument("check_monotone: p must be >= 2");
  FamilyTable families(prob);
  MonotoneReport rep;
  rep.p = p;
  double best = -std::numeric_limits<double>::infinity();
  for (const SamplePoint& s : points) {
    const ProjectorFamily& fam = families.at(s.t);
    const double lhs = monotone_lhs(prob, fam, s.t, s.x, p);
    const double ratio = lhs / (1.0 + s.x.squared_norm());
    if (ratio > best) {
      best = ratio;
      rep.worst = s;
    }
    rep.projected_k = std::max(rep.projected_k, lhs / (1.0 + (fam.p * s.x).squared_norm()));
  }
  rep.k = std::max(0.0, best);
  return rep;
}

inline MonotoneReport check_monotone(const SdaeProblem& prob, double p, const SampleSpec& s) {
  return check_monotone(prob, p, sample_points(prob, s));
}

// ---------------------------------------------------------------------------
// Local Lipschitz constant on the ball of radius q. The sampled difference quotient
// is a lower bound on the true constant and is nondecreasing in the sample count.

struct LipschitzEstimate {
  double radius = 0.0;
  double value = 0.0;
  std::size_t pairs = 0;
};

inline LipschitzEstimate estimate_local_lipschitz(const SdaeProblem& prob, double q, const SampleSpec& s) {
  if (!(q > 0.0)) throw std::invalid_argument("estimate_local_lipschitz: radius must be > 0");
  const std::vector<double> times = time_grid(prob, s);
  const RandomStream stream(s.seed, streams::kDiagnosticsBase + 32);
  LipschitzEstimate est;
  est.radius = q;
  for (std::size_t i = 0; i < s.state_points; ++i) {
    const double t = times[i % times.size()];
    const Vector x = detail::ball_sample(stream, 2 * i, prob.n, q);
    const Vector y = detail::ball_sample(stream, 2 * i + 1, prob.n, q);
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    const double df = (prob.f_at(t, x) - prob.f_at(t, y)).norm();
    const double dg = (prob.g_at(t, x) - prob.g_at(t, y)).frobenius_norm();
    est.value = std::max(est.value, std::max(df, dg) / dist);
    ++est.pairs;
  }
  return est;
}

// ---------------------------------------------------------------------------
// Diffusion growth |g|_F^2 <= c (1 + ||X||^r2). r2 is the largest per-direction
// least-squares slope of log |g|_F^2 against log ||X|| along rays of large radius.

struct GrowthReport {
  double c = 0.0;
  double r2 = 0.0;
  std::size_t directions = 0;
};

inline GrowthReport check_growth(const SdaeProblem& prob, const SampleSpec& s, std::size_t directions = 64,
                                 std::size_t radii = 16, double r_min = 10.0, double r_max = 1e4) {
  const std::vector<double> times = time_grid(prob, s);
  const RandomStream stream(s.seed, streams::kDiagnosticsBase + 48);
  struct Sample {
    double norm;
    double g2;
  };
  std::vector<Sample> all;
  GrowthReport rep;
  double slope_max = -std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < directions; ++d) {
    const double t = times[d % times.size()];
    Vector dir = detail::ball_sample(stream, d, prob.n, 1.0);
    const double dn = dir.norm();
    if (dn == 0.0) continue;
    dir *= 1.0 / dn;
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < radii; ++k) {
      const double r = r_min * std::pow(r_max / r_min, static_cast<double>(k) / static_cast<double>(radii - 1));
      const double g2 = std::pow(prob.g_at(t, dir * r).frobenius_norm(), 2);
      all.push_back({r, g2});
      if (g2 > 0.0) {
        lx.push_back(std::log(r));
        ly.push_back(std::log(g2));
      }
    }
    if (lx.size() < 2) continue;
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
      sxy += (lx[k] - mx) * (ly[k] - my);
      sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    slope_max = std::max(slope_max, sxy / sxx);
    ++rep.directions;
  }
  if (rep.directions == 0) return rep;  // g vanishes on every sample
  rep.r2 = slope_max < 1e-6 ? 0.0 : slope_max;
  for (const SamplePoint& sp : sample_points(prob, s))
    all.push_back({sp.x.norm(), std::pow(prob.g_at(sp.t, sp.x).frobenius_norm(), 2)});
  for (const Sample& smp : all) rep.c = std::max(rep.c, smp.g2 / (1.0 + std::pow(smp.norm, rep.r2)));
  return rep;
}

// ---------------------------------------------------------------------------
// Constraint Jacobian J(t,X) = A(t) + R(t) f_x(t,X) and its inverse bound N.

struct JacobianReport {
  std::vector<SamplePoint> points;
  std::vector<double> determinants;
  std::vector<double> inverse_norms;  // ||J^{-1}||_F, infinity where singular
  std::vector<bool> singular;
  std::size_t worst = 0;
  double bound = 0.0;  // N = max ||J^{-1}||_F over nonsingular samples
  bool any_singular = false;
};

inline Matrix constraint_jacobian(const SdaeProblem& prob, const ProjectorFamily& fam, double t, const Vector& x) {
  return fam.a + fam.r * prob.f_jacobian_at(t, x);
}

inline JacobianReport jacobian_report(const SdaeProblem& prob, std::vector<SamplePoint> points) {
  FamilyTable families(prob);
  JacobianReport rep;
  for (const SamplePoint& s : points) {
    const Matrix j = constraint_jacobian(prob, families.at(s.t), s.t, s.x);
    const LuDecomposition lu(j);
    rep.determinants.push_back(lu.determinant());
    rep.singular.push_back(lu.singular());
    if (lu.singular()) {
      rep.inverse_norms.push_back(std::numeric_limits<double>::infinity());
      if (!rep.any_singular) rep.worst = rep.inverse_norms.size() - 1;
      rep.any_singular = true;
      continue;
    }
    const double norm = lu.inverse().frobenius_norm();
    rep.inverse_norms.push_back(norm);
    if (!rep.any_singular && norm >= rep.bound) {
      rep.bound = norm;
      rep.worst = rep.inverse_norms.size() - 1;
    }
  }
  rep.points = std::move(points);
  return rep;
}

inline JacobianReport jacobian_report(const SdaeProblem& prob, const SampleSpec& s) {
  return jacobian_report(prob, sample_points(prob, s));
}

// ---------------------------------------------------------------------------
// Smoothness of P(t): max second divided difference on the grid, and the places where
// the numerical rank of A(t) changes (P cannot be continuous across those).

struct RankChange {
  double t_before;
  double t_after;
  std::size_t rank_before;
  std::size_t rank_after;
};

struct SmoothnessReport {
  double max_second_difference = 0.0;
  std::vector<RankChange> rank_changes;
};

inline SmoothnessReport smoothness_report(const SdaeProblem& prob, const std::vector<double>& grid) {
  if (grid.size() < 2) throw std::invalid_argument("smoothness_report: grid needs at least two points");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("smoothness_report: grid must be strictly increasing");
  std::vector<ProjectorFamily> fams;
  fams.reserve(grid.size());
  for (double t : grid) fams.push_back(family_at(prob.a_at(t), t));
  SmoothnessReport rep;
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (fams[k].rank != fams[k - 1].rank)
      rep.rank_changes.push_back({grid[k - 1], grid[k], fams[k - 1].rank, fams[k].rank});
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    const double h0 = grid[k] - grid[k - 1], h1 = grid[k + 1] - grid[k];
    // Second divided difference on a possibly nonuniform grid.
    const Matrix dd = ((fams[k + 1].p - fams[k].p) * (1.0 / h1) - (fams[k].p - fams[k - 1].p) * (1.0 / h0)) *
                      (2.0 / (h0 + h1));
    rep.max_second_difference = std::max(rep.max_second_difference, dd.frobenius_norm());
  }
  return rep;
}

// ---------------------------------------------------------------------------

struct AssumptionReport {
  Index1Report index1;
  MonotoneReport monotone;
  std::map<double, LipschitzEstimate> lipschitz;
  GrowthReport growth;
  SmoothnessReport smoothness;
  JacobianReport jacobian;
  SampleSpec sample_spec;
};

inline AssumptionReport assess(const SdaeProblem& prob, const SampleSpec& s, double p = 2.0,
                               const std::vector<double>& radii = {1.0, 2.0, 5.0}) {
  AssumptionReport rep;
  rep.sample_spec = s;
  const std::vector<SamplePoint> points = sample_points(prob, s);
  rep.index1 = check_index1(prob, points);
  rep.monotone = check_monotone(prob, p, points);
  for (double q : radii) rep.lipschitz[q] = estimate_local_lipschitz(prob, q, s);
  rep.growth = check_growth(prob, s);
  rep.smoothness = smoothness_report(prob, time_grid(prob, s));
  rep.jacobian = jacobian_report(prob, points);
  return rep;
}

}  // namespace sdae
