#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdae/errors.hpp"

namespace sdae {

namespace detail {
inline void require_finite(std::span<const double> values, const char* who) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite entry");
  }
}
}  // namespace detail

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim) : data_(dim, 0.0) {}
  Vector(std::initializer_list<double> values) : data_(values) {
    detail::require_finite(data_, "Vector");
  }
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {
    detail::require_finite(data_, "Vector");
  }

  std::size_t dim() const noexcept { return data_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& entries() const noexcept { return data_; }

  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  double dot(const Vector& other) const {
    assert(other.dim() == dim());
    double s = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) s += data_[i] * other.data_[i];
    return s;
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Vector& operator+=(const Vector& o) {
    assert(o.dim() == dim());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    assert(o.dim() == dim());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Vector& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(Vector a, double s) { return a *= s; }
  friend Vector operator*(double s, Vector a) { return a *= s; }
  friend Vector operator-(Vector a) { return a *= -1.0; }
  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

// Dense row-major real matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows * cols) throw std::invalid_argument("Matrix: entry count mismatch");
    detail::require_finite(data_, "Matrix");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
    detail::require_finite(data_, "Matrix");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }
  // Columns of the result are the given vectors.
  static Matrix from_columns(std::size_t rows, const std::vector<Vector>& cols) {
    Matrix m(rows, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      assert(cols[j].dim() == rows);
      for (std::size_t i = 0; i < rows; ++i) m(i, j) = cols[j][i];
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> values() const noexcept { return data_; }

  Vector column(std::size_t j) const {
    Vector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }
  Vector row(std::size_t i) const {
    Vector v(cols_);
    for (std::size_t j = 0; j < cols_; ++j) v[j] = (*this)(i, j);
    return v;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }
  double max_abs() const {
    double s = 0.0;
    for (double v : data_) s = std::max(s, std::abs(v));
    return s;
  }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix& operator+=(const Matrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    assert(a.cols_ == b.rows_);
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }
  friend Vector operator*(const Matrix& a, const Vector& x) {
    assert(a.cols_ == x.dim());
    Vector y(a.rows_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix outer(const Vector& a, const Vector& b) {
  Matrix m(a.dim(), b.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < b.dim(); ++j) m(i, j) = a[i] * b[j];
  return m;
}

// Largest entrywise deviation from symmetry, measured as ||M - M^T||_F.
inline double asymmetry(const Matrix& m) { return (m - m.transpose()).frobenius_norm(); }

struct SvdResult {
  Matrix u_factor;                     // rows x rows, orthogonal
  std::vector<double> singular_values; // min(rows, cols), nonincreasing
  Matrix v_factor;                     // cols x cols, orthogonal
  double rank_tolerance = 0.0;         // absolute threshold below which a value counts as zero
  int sweeps = 0;

  std::size_t rank() const {
    return static_cast<std::size_t>(
        std::count_if(singular_values.begin(), singular_values.end(),
                      [&](double s) { return s > rank_tolerance; }));
  }
  Matrix reconstruct() const {
    const std::size_t k = singular_values.size();
    Matrix out(u_factor.rows(), v_factor.rows());
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
          out(i, j) += u_factor(i, l) * singular_values[l] * v_factor(j, l);
    return out;
  }
};

namespace detail {

// Extends `basis` (orthonormal columns, possibly fewer than dim) to a full orthonormal
// basis of R^dim by orthogonalising unit vectors against it.
inline void complete_orthonormal(std::size_t dim, std::vector<Vector>& basis) {
  while (basis.size() < dim) {
    Vector best;
    double best_norm = -1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      Vector c(dim);
      c[i] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (const Vector& b : basis) c -= b * b.dot(c);
      const double nc = c.norm();
      if (nc > best_norm + 1e-12) {
        best_norm = nc;
        best = std::move(c);
      }
    }
    best *= 1.0 / best_norm;
    basis.push_back(std::move(best));
  }
}

// One-sided (Hestenes) Jacobi on the columns of `a`, which must have rows >= cols.
// Returns full U (rows x rows), singular values, and V (cols x cols).
inline SvdResult jacobi_svd_tall(const Matrix& a, int max_sweeps) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<Vector> w(n, Vector(m));
  for (std::size_t j = 0; j < n; ++j) w[j] = a.column(j);
  Matrix v = Matrix::identity(n);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  int sweep = 0;
  bool rotated = true;
  while (rotated) {
    if (sweep == max_sweeps) throw SvdNonConvergence(sweep);
    ++sweep;
    rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = w[p].squared_norm();
        const double beta = w[q].squared_norm();
        const double gamma = w[p].dot(w[q]);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w[p][i];
          const double wq = w[q][i];
          w[p][i] = c * wp - s * wq;
          w[q][i] = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = w[j].norm();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out;
  out.sweeps = sweep;
  out.singular_values.resize(n);
  out.v_factor = Matrix(n, n);
  std::vector<Vector> ucols;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v_factor(i, k) = v(i, j);
  }
  const double smax = n == 0 ? 0.0 : out.singular_values[0];
  out.rank_tolerance = static_cast<double>(std::max(m, n)) * eps * smax;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    if (sigma[j] <= out.rank_tolerance || sigma[j] == 0.0) break;
    ucols.push_back(w[j] * (1.0 / sigma[j]));
  }
  complete_orthonormal(m, ucols);
  out.u_factor = Matrix::from_columns(m, ucols);
  return out;
}

}  // namespace detail

inline constexpr int kDefaultSvdSweeps = 60;

// Full singular value decomposition a = U diag(s) V^T. Numerical rank uses the threshold
// max(rows, cols) * eps * s_max.
inline SvdResult svd(const Matrix& a, int max_sweeps = kDefaultSvdSweeps) {
  if (!a.all_finite()) throw std::invalid_argument("svd: non-finite input");
  if (a.rows() >= a.cols()) return detail::jacobi_svd_tall(a, max_sweeps);
  SvdResult t = detail::jacobi_svd_tall(a.transpose(), max_sweeps);
  std::swap(t.u_factor, t.v_factor);
  return t;
}

inline Matrix pseudo_inverse(const SvdResult& s) {
  const std::size_t rank = s.rank();
  Matrix p(s.v_factor.rows(), s.u_factor.rows());
  for (std::size_t l = 0; l < rank; ++l) {
    const double inv = 1.0 / s.singular_values[l];
    for (std::size_t i = 0; i < p.rows(); ++i) {
      const double vi = s.v_factor(i, l) * inv;
      if (vi == 0.0) continue;
      for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) += vi * s.u_factor(j, l);
    }
  }
  return p;
}

// Moore-Penrose inverse: the unique matrix satisfying all four Penrose identities.
inline Matrix pseudo_inverse(const Matrix& a) { return pseudo_inverse(svd(a)); }

// Orthonormal basis of Ker a, taken from the trailing right singular vectors.
inline std::vector<Vector> kernel_basis(const SvdResult& s) {
  std::vector<Vector> basis;
  for (std::size_t j = s.rank(); j < s.v_factor.cols(); ++j) basis.push_back(s.v_factor.column(j));
  return basis;
}
inline std::vector<Vector> kernel_basis(const Matrix& a) { return kernel_basis(svd(a)); }

// Orthonormal basis of Ker a^T (the orthogonal complement of Im a).
inline std::vector<Vector> cokernel_basis(const SvdResult& s) {
  std::vector<Vector> basis;
  for (std::size_t j = s.rank(); j < s.u_factor.cols(); ++j) basis.push_back(s.u_factor.column(j));
  return basis;
}
inline std::vector<Vector> cokernel_basis(const Matrix& a) { return kernel_basis(a.transpose()); }

// Orthonormal basis of Im a.
inline std::vector<Vector> image_basis(const SvdResult& s) {
  std::vector<Vector> basis;
  for (std::size_t j = 0; j < s.rank(); ++j) basis.push_back(s.u_factor.column(j));
  return basis;
}

inline std::size_t numerical_rank(const Matrix& a) { return svd(a).rank(); }

// LU factorisation with partial pivoting.
class LuDecomposition {
 public:
  explicit LuDecomposition(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.is_square()) throw std::invalid_argument("lu: matrix must be square");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), 0);
    const double scale = lu_.max_abs();
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
        sign_ = -sign_;
      }
      const double d = lu_(k, k);
      if (std::abs(d) <= 1e-14 * scale || d == 0.0) singular_ = true;
      if (d == 0.0) continue;
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) / d;
        lu_(i, k) = f;
        if (f == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  bool singular() const noexcept { return singular_; }

  double determinant() const {
    double d = sign_;
    for (std::size_t i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
  }

  Vector solve(const Vector& b) const {
    if (singular_) throw SingularMatrix("lu: matrix is numerically singular");
    const std::size_t n = lu_.rows();
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[perm_[i]];
      for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
      x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
      x[i] = s / lu_(i, i);
    }
    return x;
  }

  Matrix inverse() const {
    const std::size_t n = lu_.rows();
    Matrix inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      Vector e(n);
      e[j] = 1.0;
      const Vector c = solve(e);
      for (std::size_t i = 0; i < n; ++i) inv(i, j) = c[i];
    }
    return inv;
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double sign_ = 1.0;
  bool singular_ = false;
};

inline double determinant(const Matrix& a) { return LuDecomposition(a).determinant(); }
inline Matrix inverse(const Matrix& a) { return LuDecomposition(a).inverse(); }
inline Vector solve(const Matrix& a, const Vector& b) { return LuDecomposition(a).solve(b); }

}  // namespace sdae
