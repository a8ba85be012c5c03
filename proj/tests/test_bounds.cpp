#include <gtest/gtest.h>

#include <cmath>

#include "sdae/bounds.hpp"

#ifndef SDAE_PROBLEMS_DIR
#define SDAE_PROBLEMS_DIR "problems"
#endif

using namespace sdae;

namespace {
BoundConstants circuit_constants() {
  BoundConstants c;
  c.p = 2;
  c.k = 3;
  c.lvhat = 1;
  c.vhat_zero_sup = 0;
  c.p_prime_sup = 0;
  c.u0_moment = 1;
  return c;
}
}  // namespace

TEST(Bound, CircuitConstants) {
  const MomentBound b = theoretical_bound(circuit_constants());
  EXPECT_EQ(b.big_k, 54.0);
  EXPECT_EQ(b.w, 110.0);
  for (double t : {0.0, 0.01, 0.1, 1.0}) EXPECT_NEAR(b(t) / (16.0 * std::exp(110.0 * t)), 1.0, 1e-14);
}

TEST(Bound, ValueAtZeroAndMonotone) {
  BoundConstants c;
  c.p = 3;
  c.k = 0.5;
  c.lvhat = 0.7;
  c.vhat_zero_sup = 0.4;
  c.p_prime_sup = 2;
  c.u0_moment = 1.5;
  const MomentBound b = theoretical_bound(c);
  EXPECT_NEAR(b.big_k, 0.5 * std::max(1 + 4 * 0.16, 2 * 2.7 * 2.7), 1e-14);
  EXPECT_NEAR(b.w, 3 * b.big_k + 1 + 0.7 + 0.4 * 2, 1e-12);
  const double c0 = 4.0 * (std::pow(1.7, 3) * std::sqrt(2.0) * 2.5 + std::pow(0.4, 3));
  EXPECT_NEAR(b(0.0), c0, 1e-12);
  double prev = b(0.0);
  for (int i = 1; i <= 50; ++i) {
    const double v = b(i * 0.02);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Bound, RejectsSmallOrder) {
  BoundConstants c = circuit_constants();
  c.p = 1.5;
  EXPECT_THROW(theoretical_bound(c), std::invalid_argument);
}

TEST(Bound, AssembledFromDiagnostics) {
  const InherentSde sde(load_problem("cubic-circuit"));
  SampleSpec s;
  s.state_points = 2048;
  const AssumptionReport rep = assess(sde.problem(), s);
  const MomentBound b = theoretical_bound(sde, rep, 1.0, 2.0);
  EXPECT_EQ(b.constants.vhat_zero_sup, 0.0);
  EXPECT_EQ(b.constants.p_prime_sup, 0.0);
  EXPECT_EQ(b.constants.u0_moment, 1.0);
  EXPECT_LE(b.constants.k, 3.0);
  EXPECT_LE(b.big_k, 54.0);
  EXPECT_LE(b(1.0), 16.0 * std::exp(110.0));
}

TEST(TimeSups, RotatingKernelProjectorDerivative) {
  const InherentSde sde(load_problem(SDAE_PROBLEMS_DIR "/rotating-kernel.sdae"));
  const TimeSups s = measure_time_sups(sde);
  // ||k c^T + c k^T||_F = sqrt(2) for orthonormal c, k.
  EXPECT_NEAR(s.p_prime, std::sqrt(2.0), 1e-4);
  EXPECT_EQ(s.vhat_zero, 0.0);
}

TEST(Young, EqualityAndKnownCases) {
  EXPECT_TRUE(young_holds(1, 1, 2));
  EXPECT_TRUE(young_holds(1, 1, 4));
  EXPECT_TRUE(young_holds(0, 0, 3));
  EXPECT_TRUE(young_holds(2, 4, 5));  // v = h^2 is the equality case
  EXPECT_TRUE(young_holds(3, 1, 6));
}

TEST(Young, NoViolationsOnSamples) {
  for (double p : {2.0, 3.0, 4.0, 6.0}) EXPECT_EQ(young_check(p, 1000000), 0u) << p;
  EXPECT_EQ(young_check(std::nullopt, 200000), 0u);
  EXPECT_THROW(young_check(1.0, 10), std::invalid_argument);
}

TEST(SupMoment, OrderCoverage) {
  EXPECT_EQ(sup_moment_order(2, 0), 4.0);
  EXPECT_TRUE(sup_moment_covered(4, 2, 0));
  EXPECT_FALSE(sup_moment_covered(4.5, 2, 0));
  EXPECT_TRUE(sup_moment_covered(2, 0, 0));
  EXPECT_FALSE(sup_moment_covered(3, 1, 0.5));
}

TEST(InherentLipschitz, Formula) {
  const InherentLipschitz l = inherent_lipschitz(2.0, 1.0, 0.5, 3.0);
  EXPECT_EQ(l.drift, 2.0 * (0.5 + 6.0));
  EXPECT_EQ(l.diffusion, 2.0 * 2.0 * 3.0);
  const InherentSde sde(load_problem("cubic-circuit"));
  // A^- = [[0, 1/(t^2+1)], [0, 0]], largest at t = 0.
  EXPECT_NEAR(a_minus_sup(sde), 1.0, 1e-14);
}
