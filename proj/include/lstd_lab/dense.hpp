// Small dense linear algebra for LSTD-sized problems (d <= ~100).
//
// Row-major storage, partial-pivot elimination, rank-one updates and
// Sherman-Morrison inverse maintenance.  Everything here is a pure function
// of its inputs except the *_inplace variants used on hot paths.
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lstd_lab {

/// Pivot magnitude below which a system is reported singular.
inline constexpr double kPivotThreshold = 1e-12;
/// |1 + v' A^{-1} u| below which a Sherman-Morrison update is refused.
inline constexpr double kDenominatorThreshold = 1e-12;

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DenominatorNearZero : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  [[nodiscard]] std::span<double> span() noexcept { return data_; }
  [[nodiscard]] std::span<const double> span() const noexcept { return data_; }
  operator std::span<const double>() const noexcept { return data_; }  // NOLINT

  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  [[nodiscard]] auto begin() const noexcept { return data_.begin(); }
  [[nodiscard]] auto end() const noexcept { return data_.end(); }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) throw DimensionMismatch("Matrix: ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  [[nodiscard]] std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw DimensionMismatch(what);
}

}  // namespace detail

inline double dot(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

inline double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double norm_inf(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row_sum = 0.0;
    for (double v : a.row(i)) row_sum += std::abs(v);
    m = std::max(m, row_sum);
  }
  return m;
}

/// Largest absolute entry (elementwise max norm).
inline double max_abs(const Matrix& a) { return norm_inf(a.data()); }

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.rows(), "multiply: inner dimension mismatch");
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

inline Vector multiply(const Matrix& a, std::span<const double> x) {
  detail::require(a.cols() == x.size(), "multiply: dimension mismatch");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

/// x' A
inline Vector multiply_left(std::span<const double> x, const Matrix& a) {
  detail::require(a.rows() == x.size(), "multiply_left: dimension mismatch");
  Vector y(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    auto arow = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += xi * arow[j];
  }
  return y;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "subtract: shape mismatch");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

inline Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

/// A += scale * u v'
inline void rank_one_update_inplace(Matrix& a, std::span<const double> u, std::span<const double> v,
                                    double scale = 1.0) {
  detail::require(a.rows() == u.size() && a.cols() == v.size(),
                  "rank_one_update: dimension mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double ui = scale * u[i];
    auto arow = a.row(i);
    for (std::size_t j = 0; j < arow.size(); ++j) arow[j] += ui * v[j];
  }
}

/// Returns A + u v'.
inline Matrix rank_one_update(const Matrix& a, std::span<const double> u,
                              std::span<const double> v) {
  Matrix out = a;
  rank_one_update_inplace(out, u, v);
  return out;
}

/// Partial-pivot LU solver with reusable scratch, for solving (A + alpha I) x = b
/// repeatedly with the same dimension.
class RegularizedSolver {
 public:
  explicit RegularizedSolver(std::size_t dim = 0) { resize(dim); }

  void resize(std::size_t dim) {
    dim_ = dim;
    work_.assign(dim * dim, 0.0);
    rhs_.assign(dim, 0.0);
  }

  /// Solves (A + alpha I) x = b into `out`.  Throws SingularSystem when a
  /// pivot falls below kPivotThreshold.
  void solve(const Matrix& a, std::span<const double> b, double alpha, std::span<double> out) {
    detail::require(a.square() && a.rows() == b.size() && out.size() == b.size(),
                    "solve_regularized: dimension mismatch");
    if (a.rows() != dim_) resize(a.rows());
    const std::size_t n = dim_;
    std::copy(a.data().begin(), a.data().end(), work_.begin());
    std::copy(b.begin(), b.end(), rhs_.begin());
    for (std::size_t i = 0; i < n; ++i) work_[i * n + i] += alpha;

    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = std::abs(work_[k * n + k]);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double cand = std::abs(work_[i * n + k]);
        if (cand > best) {
          best = cand;
          piv = i;
        }
      }
      if (!(best >= kPivotThreshold)) {
        throw SingularSystem("solve_regularized: pivot " + std::to_string(best) +
                             " below threshold at column " + std::to_string(k));
      }
      if (piv != k) {
        std::swap_ranges(work_.begin() + static_cast<std::ptrdiff_t>(k * n),
                         work_.begin() + static_cast<std::ptrdiff_t>((k + 1) * n),
                         work_.begin() + static_cast<std::ptrdiff_t>(piv * n));
        std::swap(rhs_[k], rhs_[piv]);
      }
      const double inv_pivot = 1.0 / work_[k * n + k];
      const double* prow = &work_[k * n];
      for (std::size_t i = k + 1; i < n; ++i) {
        double* irow = &work_[i * n];
        const double f = irow[k] * inv_pivot;
        if (f == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) irow[j] -= f * prow[j];
        rhs_[i] -= f * rhs_[k];
      }
    }
    for (std::size_t ii = n; ii-- > 0;) {
      const double* irow = &work_[ii * n];
      double acc = rhs_[ii];
      for (std::size_t j = ii + 1; j < n; ++j) acc -= irow[j] * out[j];
      out[ii] = acc / irow[ii];
    }
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> work_;
  std::vector<double> rhs_;
};

/// Solves (A + alpha I) theta = b by partial-pivot elimination.
inline Vector solve_regularized(const Matrix& a, std::span<const double> b, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("solve_regularized: alpha must be >= 0");
  RegularizedSolver solver(a.rows());
  Vector theta(b.size());
  solver.solve(a, b, alpha, theta.span());
  return theta;
}

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix linear_system_inverse(const Matrix& a) {
  detail::require(a.square(), "linear_system_inverse: matrix must be square");
  const std::size_t n = a.rows();
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(work(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(work(i, k)) > best) {
        best = std::abs(work(i, k));
        piv = i;
      }
    }
    if (!(best >= kPivotThreshold)) {
      throw SingularSystem("linear_system_inverse: pivot " + std::to_string(best) +
                           " below threshold at column " + std::to_string(k));
    }
    if (piv != k) {
      std::swap_ranges(work.row(k).begin(), work.row(k).end(), work.row(piv).begin());
      std::swap_ranges(inv.row(k).begin(), inv.row(k).end(), inv.row(piv).begin());
    }
    const double inv_pivot = 1.0 / work(k, k);
    for (double& v : work.row(k)) v *= inv_pivot;
    for (double& v : inv.row(k)) v *= inv_pivot;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double f = work(i, k);
      if (f == 0.0) continue;
      auto wi = work.row(i);
      auto wk = work.row(k);
      auto vi = inv.row(i);
      auto vk = inv.row(k);
      for (std::size_t j = 0; j < n; ++j) {
        wi[j] -= f * wk[j];
        vi[j] -= f * vk[j];
      }
    }
  }
  return inv;
}

/// Scratch buffers for repeated Sherman-Morrison updates of one dimension.
struct ShermanMorrisonScratch {
  std::vector<double> ainv_u;
  std::vector<double> vt_ainv;
};

/// Ainv <- (A + u v')^{-1} given Ainv = A^{-1}.  Throws DenominatorNearZero and
/// leaves Ainv untouched when |1 + v' Ainv u| < kDenominatorThreshold.
inline void sherman_morrison_inplace(Matrix& ainv, std::span<const double> u,
                                     std::span<const double> v, ShermanMorrisonScratch& scratch) {
  detail::require(ainv.square() && ainv.rows() == u.size() && u.size() == v.size(),
                  "sherman_morrison: dimension mismatch");
  const std::size_t n = ainv.rows();
  scratch.ainv_u.assign(n, 0.0);
  scratch.vt_ainv.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ainv.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * u[j];
    scratch.ainv_u[i] = acc;
    const double vi = v[i];
    for (std::size_t j = 0; j < n; ++j) scratch.vt_ainv[j] += vi * row[j];
  }
  double denom = 1.0;
  for (std::size_t i = 0; i < n; ++i) denom += v[i] * scratch.ainv_u[i];
  if (!(std::abs(denom) >= kDenominatorThreshold)) {
    throw DenominatorNearZero("sherman_morrison: |1 + v'A^{-1}u| = " +
                              std::to_string(std::abs(denom)));
  }
  rank_one_update_inplace(ainv, scratch.ainv_u, scratch.vt_ainv, -1.0 / denom);
}

/// Returns (A + u v')^{-1} = Ainv - (Ainv u v' Ainv) / (1 + v' Ainv u).
inline Matrix sherman_morrison(const Matrix& ainv, std::span<const double> u,
                               std::span<const double> v) {
  Matrix out = ainv;
  ShermanMorrisonScratch scratch;
  sherman_morrison_inplace(out, u, v, scratch);
  return out;
}

}  // namespace lstd_lab
