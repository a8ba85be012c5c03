#pragma once

#include <map>
#include <string>
#include <vector>

#include "sdae/linalg.hpp"

namespace sdae {

// Projector family of a square leading matrix A at one time t:
//   Q onto Ker A, P = I - Q, R along Im A (R A = 0), the Moore-Penrose inverse A^-,
//   and a nonsingular completion D with D A = P and D (I - R) = A^-.
// Q and R are the orthogonal projectors, which makes A^- the unique pseudo-inverse.
struct ProjectorFamily {
  double t = 0.0;
  Matrix a;
  Matrix q;
  Matrix p;
  Matrix r;
  Matrix a_minus;
  Matrix d;
  std::size_t rank = 0;
  std::map<std::string, double> residuals;
};

namespace detail {
inline Matrix outer_sum(std::size_t n, const std::vector<Vector>& left, const std::vector<Vector>& right) {
  Matrix m(n, n);
  for (std::size_t k = 0; k < left.size(); ++k) m += outer(left[k], right[k]);
  return m;
}
}  // namespace detail

// Frobenius residuals of every identity a projector family must satisfy, plus the
// four Penrose axioms for a_minus. Pass/fail is the caller's decision.
inline std::map<std::string, double> verify_family(const ProjectorFamily& f) {
  const std::size_t n = f.a.rows();
  const Matrix eye = Matrix::identity(n);
  std::map<std::string, double> res;
  res["q_idempotent"] = (f.q * f.q - f.q).frobenius_norm();
  res["p_idempotent"] = (f.p * f.p - f.p).frobenius_norm();
  res["r_idempotent"] = (f.r * f.r - f.r).frobenius_norm();
  res["p_complements_q"] = (f.p - (eye - f.q)).frobenius_norm();
  res["q_annihilated_by_a"] = (f.a * f.q).frobenius_norm();
  res["r_annihilates_a"] = (f.r * f.a).frobenius_norm();
  res["a_minus_a_is_p"] = (f.a_minus * f.a - f.p).frobenius_norm();
  res["a_a_minus_is_i_minus_r"] = (f.a * f.a_minus - (eye - f.r)).frobenius_norm();
  res["d_a_is_p"] = (f.d * f.a - f.p).frobenius_norm();
  res["d_i_minus_r_is_a_minus"] = (f.d * (eye - f.r) - f.a_minus).frobenius_norm();
  res["d_nonsingular"] = f.d.rows() == n && !LuDecomposition(f.d).singular() ? 0.0 : 1.0;
  res["penrose_aga"] = (f.a * f.a_minus * f.a - f.a).frobenius_norm();
  res["penrose_gag"] = (f.a_minus * f.a * f.a_minus - f.a_minus).frobenius_norm();
  res["penrose_ag_symmetric"] = asymmetry(f.a * f.a_minus);
  res["penrose_ga_symmetric"] = asymmetry(f.a_minus * f.a);
  return res;
}

inline double max_residual(const std::map<std::string, double>& residuals) {
  double m = 0.0;
  for (const auto& [name, value] : residuals) m = std::max(m, value);
  return m;
}

// D = A^- + K C^T with K an orthonormal basis of Ker A and C one of Ker A^T.
inline Matrix complete_to_nonsingular(const Matrix& a_minus, const SvdResult& a_svd) {
  const std::size_t n = a_minus.rows();
  Matrix d = a_minus + detail::outer_sum(n, kernel_basis(a_svd), cokernel_basis(a_svd));
  if (LuDecomposition(d).singular())
    throw SingularMatrix("complete_to_nonsingular: completion is singular (rank bookkeeping mismatch)");
  return d;
}

inline Matrix complete_to_nonsingular(const Matrix& a_minus, const Matrix& a) {
  if (!a.is_square()) throw std::invalid_argument("complete_to_nonsingular: matrix must be square");
  return complete_to_nonsingular(a_minus, svd(a));
}

inline ProjectorFamily family_at(const Matrix& a, double t) {
  if (!a.is_square()) throw std::invalid_argument("family_at: leading matrix must be square");
  const std::size_t n = a.rows();
  const Matrix eye = Matrix::identity(n);
  const SvdResult s = svd(a);

  ProjectorFamily f;
  f.t = t;
  f.a = a;
  f.rank = s.rank();
  f.a_minus = pseudo_inverse(s);
  f.q = eye - f.a_minus * a;
  f.p = eye - f.q;
  f.r = eye - a * f.a_minus;
  f.d = complete_to_nonsingular(f.a_minus, s);
  f.residuals = verify_family(f);
  return f;
}

// Constructive completion for a singular B whose kernel and image are complementary:
// L acts as the identity on Ker B and as B on Im B, and D = L^{-1} satisfies D B = P,
// the (generally oblique) projector onto Im B along Ker B.
struct AppendixConstruction {
  Matrix l;
  Matrix d;
  Matrix p;  // D * B
};

inline AppendixConstruction appendix_construction_full(const Matrix& b) {
  if (!b.is_square()) throw std::invalid_argument("appendix_construction: matrix must be square");
  const std::size_t n = b.rows();
  const SvdResult s = svd(b);
  const std::vector<Vector> ker = kernel_basis(s);
  const std::vector<Vector> img = image_basis(s);

  std::vector<Vector> split = ker;
  split.insert(split.end(), img.begin(), img.end());
  const Matrix e = Matrix::from_columns(n, split);
  const std::size_t split_rank = svd(e).rank();
  if (split_rank < n) {
    const std::size_t dim = n - split_rank;
    throw PreconditionViolated("appendix_construction: Ker B and Im B intersect in a subspace of dimension " +
                                   std::to_string(dim),
                               dim);
  }

  std::vector<Vector> mapped = ker;
  for (const Vector& w : img) mapped.push_back(b * w);
  const Matrix image_of_split = Matrix::from_columns(n, mapped);

  AppendixConstruction out;
  const LuDecomposition e_lu(e);
  out.l = image_of_split * e_lu.inverse();
  out.d = e * LuDecomposition(image_of_split).inverse();
  out.p = out.d * b;
  return out;
}

inline Matrix appendix_construction(const Matrix& b) { return appendix_construction_full(b).d; }

}  // namespace sdae
