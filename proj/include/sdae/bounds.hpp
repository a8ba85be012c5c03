#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sdae/constraint.hpp"
#include "sdae/inherent.hpp"
#include "sdae/linalg.hpp"
#include "sdae/model.hpp"
#include "sdae/rng.hpp"

namespace sdae {

// Constants entering the moment majorant C(t).
struct BoundConstants {
  double p = 2.0;
  double k = 0.0;              // monotone constant
  double lvhat = 0.0;          // Lipschitz constant of v(t, .)
  double vhat_zero_sup = 0.0;  // sup_t ||v(t, 0)||
  double p_prime_sup = 0.0;    // sup_t ||P'(t)||_F
  double u0_moment = 0.0;      // E ||u0||^p
};

// K = k max(1 + 4 ||v(.,0)||^2, 2 (2 + L_v)^2): the constant of the monotone condition
// restated in terms of the P-component.
inline double projected_monotone_constant(double k, double lvhat, double vhat_zero_sup) {
  return k * std::max(1.0 + 4.0 * vhat_zero_sup * vhat_zero_sup, 2.0 * (2.0 + lvhat) * (2.0 + lvhat));
}

struct MomentBound {
  BoundConstants constants;
  double big_k = 0.0;
  double w = 0.0;

  // C(t) = 2^{p-1} [ (1+L_v)^p 2^{(p-2)/2} (1 + E||u0||^p) e^{wt} + ||v(.,0)||^p ]
  double operator()(double t) const {
    const BoundConstants& c = constants;
    return std::pow(2.0, c.p - 1.0) * (std::pow(1.0 + c.lvhat, c.p) * std::pow(2.0, (c.p - 2.0) / 2.0) *
                                           (1.0 + c.u0_moment) * std::exp(w * t) +
                                       std::pow(c.vhat_zero_sup, c.p));
  }
};

inline MomentBound theoretical_bound(const BoundConstants& c) {
  if (!(c.p >= 2.0)) throw std::invalid_argument("theoretical_bound: p must be >= 2");
  MomentBound b;
  b.constants = c;
  b.big_k = projected_monotone_constant(c.k, c.lvhat, c.vhat_zero_sup);
  b.w = c.p * b.big_k + 1.0 + c.lvhat + c.vhat_zero_sup * c.p_prime_sup;
  return b;
}

// sup over a time grid of ||v(t, 0)|| and ||P'(t)||_F.
struct TimeSups {
  double vhat_zero = 0.0;
  double p_prime = 0.0;
};

inline TimeSups measure_time_sups(const InherentSde& sde, std::size_t t_points = 65) {
  TimeSups s;
  const std::size_t n = sde.problem().n;
  for (double t : uniform_grid(0.0, sde.problem().horizon, t_points)) {
    const ConstraintSolution sol = solve_constraint(sde.problem(), sde.family(t), t, Vector(n), Vector(n),
                                                    sde.newton_options());
    s.vhat_zero = std::max(s.vhat_zero, sol.v.norm());
    s.p_prime = std::max(s.p_prime, sde.p_prime(t).frobenius_norm());
  }
  return s;
}

// Assembles C(t) from a diagnostics report, a measured L_v and the (deterministic)
// initial value of the problem.
inline MomentBound theoretical_bound(const InherentSde& sde, const AssumptionReport& report, double lvhat, double p,
                                     std::size_t t_points = 65) {
  const TimeSups sups = measure_time_sups(sde, t_points);
  BoundConstants c;
  c.p = p;
  c.k = report.monotone.k;
  c.lvhat = lvhat;
  c.vhat_zero_sup = sups.vhat_zero;
  c.p_prime_sup = sups.p_prime;
  c.u0_moment = std::pow(sde.consistent_initial_value().u0.norm(), p);
  return theoretical_bound(c);
}

// Lipschitz constants of the inherent coefficients on the q-ball:
//   L_fq = (1 + L_v)(||P'||_inf + L_q ||A^-||_inf),  L_gq = L_q (1 + L_v) ||A^-||_inf.
struct InherentLipschitz {
  double drift = 0.0;
  double diffusion = 0.0;
};

inline InherentLipschitz inherent_lipschitz(double lq, double lvhat, double p_prime_sup, double a_minus_sup) {
  return {(1.0 + lvhat) * (p_prime_sup + lq * a_minus_sup), lq * (1.0 + lvhat) * a_minus_sup};
}

inline double a_minus_sup(const InherentSde& sde, std::size_t t_points = 65) {
  double s = 0.0;
  for (double t : uniform_grid(0.0, sde.problem().horizon, t_points))
    s = std::max(s, sde.family(t).a_minus.frobenius_norm());
  return s;
}

// Order d - r2 + 2 up to which the sup-moment bound is asserted.
inline double sup_moment_order(double d, double r2) { return d - r2 + 2.0; }
inline bool sup_moment_covered(double p, double d, double r2) { return p <= sup_moment_order(d, r2) + 1e-12; }

// h^{p-2} v <= (p-2)/p h^p + 2/p v^{p/2} for h, v >= 0.
inline bool young_holds(double h, double v, double p) {
  const double lhs = std::pow(h, p - 2.0) * v;
  const double rhs = (p - 2.0) / p * std::pow(h, p) + 2.0 / p * std::pow(v, p / 2.0);
  return lhs <= rhs + 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

// Samples h, v log-uniformly over [1e-3, 1e3] (plus exact zeros and the equality
// diagonal v = h^2) and counts violations. p is fixed when given, else drawn from [2, 8].
inline std::size_t young_check(std::optional<double> p, std::size_t samples, std::uint64_t seed = 7) {
  if (p && !(*p >= 2.0)) throw std::invalid_argument("young_check: p must be >= 2");
  const RandomStream stream(seed, streams::kDiagnosticsBase + 0x59);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto [a, b] = stream.uniform_pair(2 * i);
    const auto [c, d] = stream.uniform_pair(2 * i + 1);
    double h = std::pow(10.0, -3.0 + 6.0 * a);
    double v = std::pow(10.0, -3.0 + 6.0 * b);
    const double order = p ? *p : 2.0 + 6.0 * c;
    switch (i % 16) {
      case 0: h = 0.0; break;
      case 1: v = 0.0; break;
      case 2: v = h * h * (0.999 + 0.002 * d); break;
      default: break;
    }
    if (!young_holds(h, v, order)) ++violations;
  }
  return violations;
}

}  // namespace sdae
