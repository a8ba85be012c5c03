#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sdae/linalg.hpp"

namespace testing_support {

using sdae::Matrix;
using sdae::Vector;

// Haar-ish random orthogonal matrix: Gram-Schmidt on Gaussian columns.
inline Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::vector<Vector> cols;
  while (cols.size() < n) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = z(rng);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& c : cols) v -= c * c.dot(v);
    const double norm = v.norm();
    if (norm < 1e-8) continue;
    cols.push_back(v * (1.0 / norm));
  }
  return Matrix::from_columns(n, cols);
}

struct Factored {
  Matrix a;
  Matrix u;
  Matrix v;
  std::vector<double> sigma;  // only the nonzero ones, length = rank
};

// A = U diag(sigma) V^T with prescribed rank and singular values in [0.5, 4].
inline Factored random_with_rank(std::size_t rows, std::size_t cols, std::size_t rank, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> s(0.5, 4.0);
  Factored f{Matrix(rows, cols), random_orthogonal(rows, rng), random_orthogonal(cols, rng), {}};
  for (std::size_t k = 0; k < rank; ++k) f.sigma.push_back(s(rng));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < rank; ++k) acc += f.u(i, k) * f.sigma[k] * f.v(j, k);
      f.a(i, j) = acc;
    }
  return f;
}

// Moore-Penrose inverse from known factors: V diag(1/sigma) U^T.
inline Matrix pinv_from_factors(const Factored& f) {
  Matrix out(f.a.cols(), f.a.rows());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < f.sigma.size(); ++k) acc += f.v(i, k) * f.u(j, k) / f.sigma[k];
      out(i, j) = acc;
    }
  return out;
}

inline double dist(const Matrix& a, const Matrix& b) { return (a - b).frobenius_norm(); }
inline double dist(const Vector& a, const Vector& b) { return (a - b).norm(); }

}  // namespace testing_support
