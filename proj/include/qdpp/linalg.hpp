#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace qdpp::linalg {

using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major real matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix transpose() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);

Matrix multiply(const Matrix& a, const Matrix& b);

// W Wᵀ (inner products of rows).
Matrix gram_rows(const Matrix& w);

// Wᵀ W (inner products of columns).
Matrix gram_cols(const Matrix& w);

/// Component of `v` orthogonal to span(basis). Basis vectors must be mutually
/// orthogonal; zero-norm entries are skipped. Throws DimensionError when a
/// basis vector's length differs from v.
Vector project_orthogonal(std::span<const double> v, const std::vector<Vector>& basis);

/// Unnormalized Gram-Schmidt over the rows. A row whose residual vanishes is
/// emitted as a zero vector and is not used as a projection direction for
/// later rows. The product of squared output norms equals det(W Wᵀ).
Matrix gram_schmidt(const Matrix& rows);

// Determinant of a square matrix by LU with partial pivoting.
double lu_determinant(Matrix a);

/// det(W Wᵀ) through LU on the Gram matrix. Tiny negative results from
/// rounding (|det| < 1e-12) are clamped to zero. A matrix with no rows has
/// determinant 1.
double det_gram(const Matrix& w);

// Inverse of a square matrix; throws SingularMatrixError on a zero pivot.
Matrix inverse(Matrix a);

/// Singular values in non-increasing order, min(rows, cols) of them, by
/// one-sided Jacobi. Throws ConvergenceError if the sweep budget runs out.
Vector singular_values(const Matrix& w, int max_sweeps = 60);

struct SymmetricEigen {
  Vector values;  // non-increasing
  Matrix vectors;  // column k pairs with values[k]
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. `warm_start`, if
/// given, is an orthogonal matrix whose columns approximate the eigenvectors
/// (e.g. a previous decomposition of a nearby matrix).
SymmetricEigen symmetric_eigen(const Matrix& a, const Matrix* warm_start = nullptr,
                               int max_sweeps = 60);

}  // namespace qdpp::linalg
