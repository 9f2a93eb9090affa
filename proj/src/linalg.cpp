#include "qdpp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace qdpp::linalg {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows == 0 ? 0 : rows.begin()->size();
  Matrix m(n_rows, n_cols);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != n_cols) {
      throw DimensionError("Matrix::from_rows: ragged rows");
    }
    std::copy(row.begin(), row.end(), m.row(r).begin());
    ++r;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("multiply: inner dimensions differ");
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix gram_rows(const Matrix& w) {
  Matrix g(w.rows(), w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = dot(w.row(i), w.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

Matrix gram_cols(const Matrix& w) {
  const std::size_t n = w.cols();
  Matrix g(n, n);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = row[i];
      if (wi == 0.0) continue;
      auto grow = g.row(i);
      for (std::size_t j = i; j < n; ++j) grow[j] += wi * row[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  }
  return g;
}

Vector project_orthogonal(std::span<const double> v, const std::vector<Vector>& basis) {
  Vector r(v.begin(), v.end());
  for (const auto& u : basis) {
    if (u.size() != v.size()) {
      throw DimensionError("project_orthogonal: basis vector has length " +
                           std::to_string(u.size()) + ", expected " + std::to_string(v.size()));
    }
    const double uu = squared_norm(u);
    if (uu == 0.0) continue;
    const double coef = dot(r, u) / uu;
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= coef * u[k];
  }
  return r;
}

Matrix gram_schmidt(const Matrix& rows) {
  // Residuals below this fraction of the original row norm are treated as
  // exact linear dependence.
  constexpr double kDependentRel = 1e-12;

  Matrix out(rows.rows(), rows.cols());
  std::vector<Vector> basis;
  basis.reserve(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const double original = std::sqrt(squared_norm(rows.row(i)));
    Vector r = project_orthogonal(rows.row(i), basis);
    r = project_orthogonal(r, basis);  // second pass restores orthogonality lost to rounding
    if (std::sqrt(squared_norm(r)) <= kDependentRel * original || original == 0.0) {
      continue;  // emitted as zeros
    }
    std::copy(r.begin(), r.end(), out.row(i).begin());
    basis.push_back(std::move(r));
  }
  return out;
}

double lu_determinant(Matrix a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("lu_determinant: matrix is not square");
  }
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(a(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a(r, k)) > best) {
        best = std::abs(a(r, k));
        pivot = r;
      }
    }
    if (best == 0.0) return 0.0;
    if (pivot != k) {
      std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(pivot).begin());
      det = -det;
    }
    const double akk = a(k, k);
    det *= akk;
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = a(r, k) / akk;
      if (f == 0.0) continue;
      for (std::size_t c = k + 1; c < n; ++c) a(r, c) -= f * a(k, c);
    }
  }
  return det;
}

double det_gram(const Matrix& w) {
  if (w.rows() == 0) return 1.0;
  const double det = lu_determinant(gram_rows(w));
  if (det < 0.0 && -det < 1e-12) return 0.0;
  return det;
}

Matrix inverse(Matrix a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("inverse: matrix is not square");
  }
  const std::size_t n = a.rows();
  Matrix inv = Matrix::identity(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a(r, k)) > std::abs(a(pivot, k))) pivot = r;
    }
    if (a(pivot, k) == 0.0) {
      throw SingularMatrixError("inverse: singular matrix");
    }
    if (pivot != k) {
      std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(pivot).begin());
      std::swap_ranges(inv.row(k).begin(), inv.row(k).end(), inv.row(pivot).begin());
    }
    const double scale = 1.0 / a(k, k);
    for (std::size_t c = 0; c < n; ++c) {
      a(k, c) *= scale;
      inv(k, c) *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == k) continue;
      const double f = a(r, k);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(k, c);
        inv(r, c) -= f * inv(k, c);
      }
    }
  }
  return inv;
}

Vector singular_values(const Matrix& w, int max_sweeps) {
  // Orthogonalize the shorter family of vectors; their final norms are the
  // singular values.
  Matrix v = w.rows() >= w.cols() ? w.transpose() : w;
  const std::size_t n = v.rows();
  constexpr double kTol = 1e-15;
  // Vectors this small relative to ||W||_F are rounding noise with no direction.
  const double negligible = 1e-28 * squared_norm(w.data());

  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto vp = v.row(p);
        auto vq = v.row(q);
        const double alpha = squared_norm(vp);
        const double beta = squared_norm(vq);
        const double gamma = dot(vp, vq);
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        if (std::min(alpha, beta) <= negligible) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < vp.size(); ++k) {
          const double a = vp[k];
          const double b = vq[k];
          vp[k] = c * a - s * b;
          vq[k] = s * a + c * b;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw ConvergenceError("singular_values: no convergence after " +
                           std::to_string(max_sweeps) + " sweeps");
  }
  Vector sv(n);
  for (std::size_t i = 0; i < n; ++i) sv[i] = std::sqrt(squared_norm(v.row(i)));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

SymmetricEigen symmetric_eigen(const Matrix& input, const Matrix* warm_start, int max_sweeps) {
  if (input.rows() != input.cols()) {
    throw DimensionError("symmetric_eigen: matrix is not square");
  }
  const std::size_t n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::identity(n);
  if (warm_start != nullptr) {
    if (warm_start->rows() != n || warm_start->cols() != n) {
      throw DimensionError("symmetric_eigen: warm start has the wrong shape");
    }
    v = *warm_start;
    a = multiply(v.transpose(), multiply(input, v));
  }

  double frob = 0.0;
  for (double x : a.data()) frob += x * x;
  frob = std::sqrt(frob);

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };

  bool converged = off_diagonal() <= 1e-14 * frob;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_diagonal() <= 1e-14 * frob;
  }
  if (!converged) {
    throw ConvergenceError("symmetric_eigen: no convergence after " +
                           std::to_string(max_sweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

}  // namespace qdpp::linalg
