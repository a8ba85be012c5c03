#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdae/inherent.hpp"
#include "support.hpp"

using namespace sdae;
using testing_support::dist;

#ifndef SDAE_PROBLEMS_DIR
#define SDAE_PROBLEMS_DIR "problems"
#endif

namespace {
SdaeProblem rotating() { return load_problem(SDAE_PROBLEMS_DIR "/rotating-kernel.sdae"); }

// P(t) = c c^T with c = (cos t, sin t); P'(t) = k c^T + c k^T with k = (-sin t, cos t).
Matrix rotating_p_prime(double t) {
  const Vector c{std::cos(t), std::sin(t)}, k{-std::sin(t), std::cos(t)};
  return outer(k, c) + outer(c, k);
}
}  // namespace

TEST(PPrime, ConstantProjectorIsZero) {
  const InherentSde sde(load_problem("cubic-circuit"));
  EXPECT_TRUE(sde.projector_constant());
  for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(sde.p_prime(t).frobenius_norm(), 0.0);
  const InherentSde diag(parse_problem("n = 2\nm = 1\na[1][1] = 1+t^2\n"));
  EXPECT_TRUE(diag.projector_constant());
  EXPECT_EQ(diag.p_prime(0.5).frobenius_norm(), 0.0);
}

TEST(PPrime, RotatingKernelMatchesAnalytic) {
  const InherentSde sde(rotating());
  EXPECT_FALSE(sde.projector_constant());
  for (double t : {0.1, 0.35, 0.5, 0.8}) EXPECT_LE(dist(sde.p_prime(t), rotating_p_prime(t)), 1e-8) << t;
  // One-sided at the ends: first order in h.
  EXPECT_LE(dist(sde.p_prime(0.0), rotating_p_prime(0.0)), 1e-4);
  EXPECT_LE(dist(sde.p_prime(1.0), rotating_p_prime(1.0)), 1e-4);
}

TEST(PPrime, SecondOrderInStep) {
  const double t = 0.4;
  const double e1 = dist(InherentSde(rotating(), 1e-2).p_prime(t), rotating_p_prime(t));
  const double e2 = dist(InherentSde(rotating(), 5e-3).p_prime(t), rotating_p_prime(t));
  EXPECT_NEAR(e1 / e2, 4.0, 0.1);
}

TEST(PPrime, RankChangeRaises) {
  const InherentSde sde(parse_problem("n = 2\nm = 1\na[1][1] = t - 0.5\na[2][2] = 1\n"));
  EXPECT_THROW(sde.p_prime(0.5), RankChangeError);
  EXPECT_NO_THROW(sde.p_prime(0.2));
}

TEST(Coefficients, CircuitGoldenValues) {
  const InherentSde sde(load_problem("cubic-circuit"));
  const InherentState s = sde.evaluate(0.0, Vector{1, 0});
  EXPECT_LE(s.constraint.v.norm(), 1e-15);
  EXPECT_LE(dist(s.drift, Vector{-2, 0}), 1e-12);
  EXPECT_LE(dist(s.diffusion, Matrix{{0, 3}, {0, 0}}), 1e-12);
}

// Hand formulas on Im P: drift = (-(u1+u1^3)/c^2, 0), diffusion = [[0, (u1^2+2u1)/c], [0, 0]].
TEST(Coefficients, CircuitClosedFormsAlongTime) {
  const InherentSde sde(load_problem("cubic-circuit"));
  for (double t : {0.0, 0.25, 0.7, 1.0})
    for (double u1 : {-2.0, -0.3, 0.5, 3.0}) {
      const double c = t * t + 1;
      EXPECT_LE(dist(sde.drift(t, Vector{u1, 0}), Vector{-(u1 + u1 * u1 * u1) / (c * c), 0}), 1e-12);
      EXPECT_LE(dist(sde.diffusion(t, Vector{u1, 0}), Matrix{{0, (u1 * u1 + 2 * u1) / c}, {0, 0}}), 1e-12);
    }
}

TEST(Coefficients, VanishForTrivialProblem) {
  const InherentSde sde(parse_problem("n = 2\nm = 2\na[1][1] = 1\n"));
  const InherentState s = sde.evaluate(0.3, Vector{4, 0});
  EXPECT_EQ(s.drift.norm(), 0.0);
  EXPECT_EQ(s.diffusion.frobenius_norm(), 0.0);
}

// On the rotating-kernel problem the u-dynamics reduce to da = -1.5 a dt + 0.3 dW for
// a = c^T X, u = a c, so drift = a k - 1.5 a c and diffusion = 0.3 c.
TEST(Coefficients, RotatingKernelIncludesPPrimeTerm) {
  const InherentSde sde(rotating());
  for (double t : {0.2, 0.6})
    for (double a : {-1.0, 0.4, 2.0}) {
      const Vector c{std::cos(t), std::sin(t)}, k{-std::sin(t), std::cos(t)};
      const InherentState s = sde.evaluate(t, c * a);
      EXPECT_LE(dist(s.constraint.v, k * (-0.5 * a)), 1e-10);
      EXPECT_LE(dist(s.drift, k * a - c * (1.5 * a)), 1e-7);
      EXPECT_LE(dist(s.diffusion, Matrix{{0.3 * c[0]}, {0.3 * c[1]}}), 1e-12);
    }
}

TEST(Recompose, Examples) {
  const InherentSde sde(load_problem("cubic-circuit"));
  EXPECT_LE(dist(sde.recompose(0.4, Vector{1.7, 0}), Vector{1.7, 0}), 1e-15);
  EXPECT_LE(sde.recompose(0.4, Vector{0, 0}).norm(), 0.0);
}

TEST(Recompose, DecomposeRoundTrip) {
  const InherentSde sde(rotating());
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ut(0, 1), ua(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const double t = ut(rng);
    const Vector u = sde.family(t).p * Vector{ua(rng), ua(rng)};
    const Vector x = sde.recompose(t, u);
    const auto [pu, qv] = sde.decompose(t, x);
    EXPECT_LE(dist(pu, u), 1e-10);
    // The recomposed state satisfies the constraint.
    const ProjectorFamily& fam = sde.family(t);
    EXPECT_LE((fam.a * qv + fam.r * sde.problem().f_at(t, x)).norm(), 1e-10);
  }
}

TEST(InitialValue, ConsistentAndInconsistent) {
  const InherentSde ok(load_problem("cubic-circuit"));
  const ConsistentInitialValue a = ok.consistent_initial_value();
  EXPECT_TRUE(a.consistent);
  EXPECT_LE(dist(a.u0, Vector{1, 0}), 0.0);

  EXPECT_TRUE(InherentSde(rotating()).consistent_initial_value().consistent);

  SdaeProblem p = load_problem("cubic-circuit");
  p.x0 = Vector{1, 0.5};
  const ConsistentInitialValue b = InherentSde(p).consistent_initial_value();
  EXPECT_FALSE(b.consistent);
  EXPECT_NEAR(b.mismatch, 0.5, 1e-15);
  EXPECT_LE(dist(b.x0, Vector{1, 0}), 1e-15);
}

TEST(Cache, ResultsIndependentOfCacheState) {
  const InherentSde fresh(rotating());
  const InherentSde warmed(rotating());
  for (double t : {0.1, 0.2, 0.3}) warmed.evaluate(t, Vector{1, 0});
  const InherentState a = fresh.evaluate(0.2, Vector{0.5, 0.1});
  const InherentState b = warmed.evaluate(0.2, Vector{0.5, 0.1});
  EXPECT_EQ(a.drift, b.drift);
}
