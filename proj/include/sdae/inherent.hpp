#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

#include "sdae/constraint.hpp"
#include "sdae/linalg.hpp"
#include "sdae/problem.hpp"
#include "sdae/projectors.hpp"

namespace sdae {

class RankChangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct InherentState {
  ConstraintSolution constraint;
  Vector drift;      // P'(t)(u + v) + A^-(t) f(t, u + v)
  Matrix diffusion;  // A^-(t) g(t, u + v)
};

struct ConsistentInitialValue {
  Vector u0;           // P(0) X0
  Vector x0;           // u0 + v(0, u0)
  double mismatch = 0.0;  // ||x0 - X0||; nonzero means the given X0 violated the constraint
  bool consistent = true;
};

// The regular SDE satisfied by u = P(t) X:
//   du = [P'(t)(u + v(t,u)) + A^-(t) f(t, u + v(t,u))] dt + A^-(t) g(t, u + v(t,u)) dW.
//
// Projector families are cached per exact time value. An instance is not meant to be
// shared between threads; copy it per worker (results do not depend on cache state).
class InherentSde {
 public:
  explicit InherentSde(SdaeProblem problem, std::optional<double> derivative_step = std::nullopt,
                       NewtonOptions newton = {})
      : problem_(std::make_shared<const SdaeProblem>(std::move(problem))), newton_(newton) {
    h_ = derivative_step.value_or(1e-5 * (1.0 + problem_->horizon));
    if (!(h_ > 0.0)) throw std::invalid_argument("InherentSde: derivative step must be > 0");
    p_constant_ = detect_constant_projector();
  }

  const SdaeProblem& problem() const noexcept { return *problem_; }
  double derivative_step() const noexcept { return h_; }
  bool projector_constant() const noexcept { return p_constant_; }
  const NewtonOptions& newton_options() const noexcept { return newton_; }

  const ProjectorFamily& family(double t) const { return entry(t).family; }

  // Central difference of P with step h_p, one-sided where t -/+ h_p leaves [0, T].
  const Matrix& p_prime(double t) const {
    Entry& e = entry(t);
    if (!e.p_prime) e.p_prime = p_constant_ ? Matrix(problem_->n, problem_->n) : compute_p_prime(t, e.family);
    return *e.p_prime;
  }

  InherentState evaluate(double t, const Vector& u, const Vector& guess) const {
    const ProjectorFamily& fam = family(t);
    InherentState s;
    s.constraint = solve_constraint(*problem_, fam, t, u, guess, newton_);
    s.drift = fam.a_minus * s.constraint.f_at_x;
    if (!p_constant_) s.drift += p_prime(t) * s.constraint.x;
    s.diffusion = fam.a_minus * problem_->g_at(t, s.constraint.x);
    return s;
  }
  InherentState evaluate(double t, const Vector& u) const { return evaluate(t, u, Vector(problem_->n)); }

  Vector drift(double t, const Vector& u) const { return evaluate(t, u).drift; }
  Matrix diffusion(double t, const Vector& u) const { return evaluate(t, u).diffusion; }

  // X = u + v(t, u).
  Vector recompose(double t, const Vector& u) const {
    return solve_constraint(*problem_, family(t), t, u, Vector(problem_->n), newton_).x;
  }
  // (P(t) X, Q(t) X).
  std::pair<Vector, Vector> decompose(double t, const Vector& x) const {
    const ProjectorFamily& fam = family(t);
    return {fam.p * x, fam.q * x};
  }

  // Projects X0 onto Im P(0) and re-solves the constraint; reports how far the given
  // initial value was from the constraint manifold.
  ConsistentInitialValue consistent_initial_value(double tolerance = 1e-10) const {
    ConsistentInitialValue c;
    c.u0 = family(0.0).p * problem_->x0;
    c.x0 = recompose(0.0, c.u0);
    c.mismatch = (c.x0 - problem_->x0).norm();
    c.consistent = c.mismatch <= tolerance * (1.0 + problem_->x0.norm());
    return c;
  }

 private:
  struct Entry {
    ProjectorFamily family;
    std::optional<Matrix> p_prime;
  };

  Entry& entry(double t) const {
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    if (cache_.size() >= kCacheLimit) cache_.clear();
    return cache_.emplace(t, Entry{family_at(problem_->a_at(t), t), std::nullopt}).first->second;
  }

  Matrix compute_p_prime(double t, const ProjectorFamily& at_t) const {
    const double horizon = problem_->horizon;
    const bool backward_ok = t - h_ >= 0.0;
    const bool forward_ok = t + h_ <= horizon;
    const double lo = backward_ok || !forward_ok ? t - h_ : t;
    const double hi = forward_ok || !backward_ok ? t + h_ : t;
    const ProjectorFamily f_lo = lo == t ? at_t : family_at(problem_->a_at(lo), lo);
    const ProjectorFamily f_hi = hi == t ? at_t : family_at(problem_->a_at(hi), hi);
    if (f_lo.rank != at_t.rank || f_hi.rank != at_t.rank)
      throw RankChangeError("rank of A(t) changes near t = " + std::to_string(t) + " (ranks " +
                            std::to_string(f_lo.rank) + ", " + std::to_string(at_t.rank) + ", " +
                            std::to_string(f_hi.rank) + "); P(t) is not differentiable there");
    return (f_hi.p - f_lo.p) * (1.0 / (hi - lo));
  }

  bool detect_constant_projector() const {
    const double horizon = problem_->horizon;
    const Matrix p0 = family_at(problem_->a_at(0.0), 0.0).p;
    for (int k = 1; k <= 64; ++k) {
      const double t = horizon * k / 64.0;
      if ((family_at(problem_->a_at(t), t).p - p0).max_abs() > 1e-13) return false;
    }
    return true;
  }

  static constexpr std::size_t kCacheLimit = 1u << 16;

  std::shared_ptr<const SdaeProblem> problem_;
  NewtonOptions newton_;
  double h_ = 0.0;
  bool p_constant_ = false;
  mutable std::unordered_map<double, Entry> cache_;
};

}  // namespace sdae
