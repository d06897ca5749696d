#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedrd/errors.hpp"

namespace fedrd {

using Vec = std::vector<double>;

// Dense square matrix, row-major. Sized for p x p problems with small p.
class Mat {
 public:
  Mat() = default;
  explicit Mat(int n) : n_(n), v_(static_cast<size_t>(n) * n, 0.0) {}

  int dim() const { return n_; }
  double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * n_ + j]; }

  Mat& operator+=(const Mat& o) {
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
  }

  const std::vector<double>& data() const { return v_; }

 private:
  int n_ = 0;
  std::vector<double> v_;
};

inline Vec operator*(const Mat& m, const Vec& x) {
  Vec y(m.dim(), 0.0);
  for (int i = 0; i < m.dim(); ++i)
    for (int j = 0; j < m.dim(); ++j) y[i] += m(i, j) * x[j];
  return y;
}

inline Mat operator*(const Mat& a, const Mat& b) {
  Mat c(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int k = 0; k < a.dim(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.dim(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline void add_outer(Mat& m, const Vec& x, double w = 1.0) {
  for (int i = 0; i < m.dim(); ++i)
    for (int j = 0; j < m.dim(); ++j) m(i, j) += w * x[i] * x[j];
}

inline Mat symmetrized(const Mat& m) {
  Mat s(m.dim());
  for (int i = 0; i < m.dim(); ++i)
    for (int j = 0; j < m.dim(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

namespace detail {

// LDL^T factorization of a symmetric matrix. Pivots below
// 1e-12 * max diagonal entry signal a rank deficiency.
struct Ldlt {
  explicit Ldlt(const Mat& m) : p_(m.dim()), lower_(m.dim()), d_(m.dim(), 0.0) {
    double maxd = 0.0;
    for (int i = 0; i < p_; ++i) maxd = std::max(maxd, std::fabs(m(i, i)));
    if (maxd == 0.0) throw SingularInformation("information matrix has zero diagonal");
    const double tol = 1e-12 * maxd;
    for (int j = 0; j < p_; ++j) {
      double dj = m(j, j);
      for (int k = 0; k < j; ++k) dj -= lower_(j, k) * lower_(j, k) * d_[k];
      if (std::fabs(dj) < tol)
        throw SingularInformation("information matrix is numerically singular (pivot " +
                                  std::to_string(dj) + ")");
      d_[j] = dj;
      lower_(j, j) = 1.0;
      for (int i = j + 1; i < p_; ++i) {
        double s = m(i, j);
        for (int k = 0; k < j; ++k) s -= lower_(i, k) * lower_(j, k) * d_[k];
        lower_(i, j) = s / dj;
      }
    }
  }

  Vec solve(Vec b) const {
    for (int i = 0; i < p_; ++i)
      for (int k = 0; k < i; ++k) b[i] -= lower_(i, k) * b[k];
    for (int i = 0; i < p_; ++i) b[i] /= d_[i];
    for (int i = p_ - 1; i >= 0; --i)
      for (int k = i + 1; k < p_; ++k) b[i] -= lower_(k, i) * b[k];
    return b;
  }

 private:
  int p_;
  Mat lower_;
  Vec d_;
};

}  // namespace detail

// Solve m z = rhs for symmetric m by direct LDL^T factorization.
// Throws SingularInformation when a pivot falls below 1e-12 x max diagonal.
inline Vec solve_spd(const Mat& m, const Vec& rhs) {
  return detail::Ldlt(m).solve(rhs);
}

inline Mat solve_spd(const Mat& m, const Mat& rhs) {
  detail::Ldlt f(m);
  Mat z(m.dim());
  Vec col(m.dim());
  for (int j = 0; j < m.dim(); ++j) {
    for (int i = 0; i < m.dim(); ++i) col[i] = rhs(i, j);
    Vec s = f.solve(col);
    for (int i = 0; i < m.dim(); ++i) z(i, j) = s[i];
  }
  return z;
}

}  // namespace fedrd
