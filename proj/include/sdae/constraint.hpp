#pragma once

#include <cmath>
#include <string>

#include "sdae/linalg.hpp"
#include "sdae/model.hpp"
#include "sdae/problem.hpp"
#include "sdae/projectors.hpp"

namespace sdae {

class ConstraintNonConvergence : public NumericalError {
 public:
  ConstraintNonConvergence(double t, int iterations, double best_residual)
      : NumericalError("constraint solve at t = " + std::to_string(t) + " did not converge in " +
                       std::to_string(iterations) + " iterations (best residual " + std::to_string(best_residual) + ")"),
        best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

class SingularJacobian : public NumericalError {
 public:
  SingularJacobian(double t, const Vector& x) : NumericalError(describe(t, x)), t_(t), x_(x) {}
  double t() const noexcept { return t_; }
  const Vector& x() const noexcept { return x_; }

 private:
  static std::string describe(double t, const Vector& x) {
    std::string s = "constraint Jacobian is singular at t = " + std::to_string(t) + ", X = (";
    for (std::size_t i = 0; i < x.dim(); ++i) s += (i ? ", " : "") + std::to_string(x[i]);
    return s + ")";
  }
  double t_;
  Vector x_;
};

struct NewtonOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_iterations = 50;
  int max_halvings = 8;
};

// Root v of h(t,u,v) = A(t) v + R(t) f(t, u+v) = 0 on Im Q(t).
struct ConstraintSolution {
  double t = 0.0;
  Vector u;
  Vector v;
  Vector x;       // u + v
  Vector f_at_x;  // f(t, u + v), reused by callers assembling the drift
  double residual = 0.0;
  double tolerance = 0.0;
  int iterations = 0;
  Matrix vhat_jacobian;  // empty unless requested
};

namespace detail {
struct ConstraintResidual {
  Vector h;
  Vector f;
  double norm;
  double scale;
};

inline ConstraintResidual constraint_residual(const SdaeProblem& prob, const ProjectorFamily& fam, double t,
                                              const Vector& u, const Vector& v) {
  Vector f = prob.f_at(t, u + v);
  Vector av = fam.a * v;
  Vector rf = fam.r * f;
  // R f carries rounding of order eps ||f||, so the relative part is measured against ||f||.
  const double scale = av.norm() + f.norm();
  Vector h = av + rf;
  const double norm = h.norm();
  return {std::move(h), std::move(f), norm, scale};
}
}  // namespace detail

// v_u = -J^{-1} R f_x, the derivative of the implicit solution v(t,u) with respect to u.
// Its restriction to Im P is v_u P.
inline Matrix vhat_jacobian(const SdaeProblem& prob, const ProjectorFamily& fam, double t, const Vector& u,
                            const Vector& v) {
  const Vector x = u + v;
  const Matrix fx = prob.f_jacobian_at(t, x);
  const LuDecomposition lu(fam.a + fam.r * fx);
  if (lu.singular()) throw SingularJacobian(t, x);
  const Matrix rfx = fam.r * fx;
  Matrix out(prob.n, prob.n);
  for (std::size_t j = 0; j < prob.n; ++j) {
    const Vector col = lu.solve(rfx.column(j));
    for (std::size_t i = 0; i < prob.n; ++i) out(i, j) = -col[i];
  }
  return out;
}

// Damped Newton restricted to Im Q(t): v <- v - Q J^{-1} h, halving the step while
// ||h|| fails to decrease.
inline ConstraintSolution solve_constraint(const SdaeProblem& prob, const ProjectorFamily& fam, double t,
                                           const Vector& u, const Vector& initial_guess,
                                           const NewtonOptions& opt = {}, bool with_jacobian = false) {
  ConstraintSolution sol;
  sol.t = t;
  sol.u = u;
  Vector v = fam.q * initial_guess;
  auto res = detail::constraint_residual(prob, fam, t, u, v);
  int iter = 0;
  for (;;) {
    const double tol = opt.abs_tol + opt.rel_tol * res.scale;
    if (res.norm <= tol) {
      sol.tolerance = tol;
      break;
    }
    if (iter == opt.max_iterations) throw ConstraintNonConvergence(t, iter, res.norm);
    ++iter;
    const Vector x = u + v;
    const LuDecomposition lu(fam.a + fam.r * prob.f_jacobian_at(t, x));
    if (lu.singular()) throw SingularJacobian(t, x);
    const Vector step = fam.q * lu.solve(res.h);
    double scale = 1.0;
    Vector trial = v - step;
    auto trial_res = detail::constraint_residual(prob, fam, t, u, trial);
    for (int k = 0; k < opt.max_halvings && !(trial_res.norm < res.norm); ++k) {
      scale *= 0.5;
      trial = v - step * scale;
      trial_res = detail::constraint_residual(prob, fam, t, u, trial);
    }
    v = std::move(trial);
    res = std::move(trial_res);
  }
  sol.iterations = iter;
  sol.residual = res.norm;
  sol.x = u + v;
  sol.v = std::move(v);
  sol.f_at_x = std::move(res.f);
  if (with_jacobian) sol.vhat_jacobian = vhat_jacobian(prob, fam, t, sol.u, sol.v);
  return sol;
}

// Lipschitz constant of v(t,.): the measured sup of ||v_u||_F over samples, next to
// the a-priori value N ||A||_inf + n built from the Jacobian inverse bound N.
struct LvhatEstimate {
  double measured = 0.0;
  double formula = 0.0;
  double jacobian_bound = 0.0;  // N
  double a_sup_norm = 0.0;      // sup_t ||A(t)||_F
};

inline double lvhat_formula(double jacobian_bound, double a_sup_norm, std::size_t n) {
  return jacobian_bound * a_sup_norm + static_cast<double>(n);
}

inline LvhatEstimate estimate_lvhat(const SdaeProblem& prob, const SampleSpec& s, const NewtonOptions& opt = {}) {
  FamilyTable families(prob);
  LvhatEstimate est;
  for (double t : time_grid(prob, s)) est.a_sup_norm = std::max(est.a_sup_norm, families.at(t).a.frobenius_norm());
  const std::vector<SamplePoint> points = sample_points(prob, s);
  for (const SamplePoint& sp : points) {
    const ProjectorFamily& fam = families.at(sp.t);
    const Vector u = fam.p * sp.x;
    const ConstraintSolution sol = solve_constraint(prob, fam, sp.t, u, Vector(prob.n), opt, true);
    est.measured = std::max(est.measured, sol.vhat_jacobian.frobenius_norm());
  }
  est.jacobian_bound = jacobian_report(prob, points).bound;
  est.formula = lvhat_formula(est.jacobian_bound, est.a_sup_norm, prob.n);
  return est;
}

}  // namespace sdae
