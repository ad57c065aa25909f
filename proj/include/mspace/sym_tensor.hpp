#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <span>
#include <vector>

#include "mspace/common.hpp"

namespace mspace {

/// A symmetric n x n tensor value at one grid cell (metric, semimetric or
/// tangent), 1 <= n <= 4.  Only the upper triangle is stored, row-major.
class SymTensor {
 public:
  static constexpr int max_dim = 4;
  static constexpr int max_packed = max_dim * (max_dim + 1) / 2;

  SymTensor() = default;
  explicit SymTensor(int n) : n_(check_dim(n)) { a_.fill(0.0); }

  static SymTensor identity(int n) {
    SymTensor t(n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  static SymTensor diag(std::initializer_list<double> d) {
    SymTensor t(static_cast<int>(d.size()));
    int i = 0;
    for (double v : d) t.at(i, i) = v, ++i;
    return t;
  }

  static SymTensor from_packed(int n, std::span<const double> packed) {
    SymTensor t(n);
    if (packed.size() != static_cast<std::size_t>(packed_size(n)))
      throw invalid_input("SymTensor::from_packed: wrong entry count");
    std::copy(packed.begin(), packed.end(), t.a_.begin());
    return t;
  }

  static constexpr int packed_size(int n) { return n * (n + 1) / 2; }

  int dim() const { return n_; }
  int packed_size() const { return packed_size(n_); }
  std::span<const double> packed() const { return {a_.data(), static_cast<std::size_t>(packed_size())}; }
  std::span<double> packed() { return {a_.data(), static_cast<std::size_t>(packed_size())}; }

  double& at(int i, int j) { return a_[index(i, j)]; }
  double at(int i, int j) const { return a_[index(i, j)]; }
  double operator()(int i, int j) const { return at(i, j); }

  SymTensor& operator+=(const SymTensor& o) {
    for (int k = 0; k < packed_size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  SymTensor& operator-=(const SymTensor& o) {
    for (int k = 0; k < packed_size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }
  SymTensor& operator*=(double c) {
    for (int k = 0; k < packed_size(); ++k) a_[k] *= c;
    return *this;
  }
  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a -= b; }
  friend SymTensor operator*(SymTensor a, double c) { return a *= c; }
  friend SymTensor operator*(double c, SymTensor a) { return a *= c; }

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }

  double det() const {
    const auto& m = *this;
    switch (n_) {
      case 1:
        return m(0, 0);
      case 2:
        return m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
      case 3:
        return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(1, 2)) -
               m(0, 1) * (m(0, 1) * m(2, 2) - m(1, 2) * m(0, 2)) +
               m(0, 2) * (m(0, 1) * m(1, 2) - m(1, 1) * m(0, 2));
      case 4: {
        double d = 0.0;
        for (int j = 0; j < 4; ++j) {
          double minor3[3][3];
          for (int r = 1; r < 4; ++r) {
            int cc = 0;
            for (int c = 0; c < 4; ++c) {
              if (c == j) continue;
              minor3[r - 1][cc++] = m(r, c);
            }
          }
          double det3 = minor3[0][0] * (minor3[1][1] * minor3[2][2] - minor3[1][2] * minor3[2][1]) -
                        minor3[0][1] * (minor3[1][0] * minor3[2][2] - minor3[1][2] * minor3[2][0]) +
                        minor3[0][2] * (minor3[1][0] * minor3[2][1] - minor3[1][1] * minor3[2][0]);
          d += ((j % 2 == 0) ? 1.0 : -1.0) * m(0, j) * det3;
        }
        return d;
      }
      default:
        throw invalid_input("SymTensor::det: empty tensor");
    }
  }

  double max_abs() const {
    double m = 0.0;
    for (int k = 0; k < packed_size(); ++k) m = std::max(m, std::abs(a_[k]));
    return m;
  }

  /// Frobenius norm of the full (symmetric) matrix.
  double frobenius() const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) s += at(i, j) * at(i, j);
    return std::sqrt(s);
  }

  bool finite() const {
    for (int k = 0; k < packed_size(); ++k)
      if (!std::isfinite(a_[k])) return false;
    return true;
  }

  bool is_zero() const { return max_abs() == 0.0; }

 private:
  static int check_dim(int n) {
    if (n < 1 || n > max_dim) throw invalid_input("SymTensor: dimension must be in [1,4]");
    return n;
  }
  int index(int i, int j) const {
    if (i > j) std::swap(i, j);
    // row-major upper triangle: row i starts at i*n - i(i-1)/2
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }

  int n_ = 0;
  std::array<double, max_packed> a_{};
};

namespace detail {

/// Small dense matrix used internally for products and eigenvector frames.
struct Mat {
  int n = 0;
  std::array<double, 16> a{};

  Mat() = default;
  explicit Mat(int n_) : n(n_) { a.fill(0.0); }
  double& at(int i, int j) { return a[static_cast<std::size_t>(i * n + j)]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i * n + j)]; }

  static Mat identity(int n_) {
    Mat m(n_);
    for (int i = 0; i < n_; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static Mat from_sym(const SymTensor& s) {
    Mat m(s.dim());
    for (int i = 0; i < m.n; ++i)
      for (int j = 0; j < m.n; ++j) m.at(i, j) = s.at(i, j);
    return m;
  }
};

inline Mat mul(const Mat& x, const Mat& y) {
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int k = 0; k < x.n; ++k) {
      double xik = x.at(i, k);
      if (xik == 0.0) continue;
      for (int j = 0; j < x.n; ++j) r.at(i, j) += xik * y.at(k, j);
    }
  return r;
}

/// Inverse of a small matrix; adjugate closed forms up to n = 3,
/// Gauss-Jordan with partial pivoting for n = 4.  Throws on
/// (near-)singular input.  Kept separate from the spectral route: the
/// bilinear forms tr(g^{-1} h g^{-1} k) only need the inverse, not a
/// matrix function.
inline Mat inverse(const Mat& m) {
  const int n = m.n;
  if (n <= 3) {
    double scale = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(m.at(i, j)));
    Mat inv(n);
    if (n == 1) {
      const double d = m.at(0, 0);
      if (!(std::abs(d) > scale * 1e-300)) throw invalid_input("inverse: singular matrix");
      inv.at(0, 0) = 1.0 / d;
      return inv;
    }
    if (n == 2) {
      const double d = m.at(0, 0) * m.at(1, 1) - m.at(0, 1) * m.at(1, 0);
      if (!(std::abs(d) > scale * scale * 1e-300)) throw invalid_input("inverse: singular matrix");
      const double r = 1.0 / d;
      inv.at(0, 0) = m.at(1, 1) * r;
      inv.at(0, 1) = -m.at(0, 1) * r;
      inv.at(1, 0) = -m.at(1, 0) * r;
      inv.at(1, 1) = m.at(0, 0) * r;
      return inv;
    }
    const double c00 = m.at(1, 1) * m.at(2, 2) - m.at(1, 2) * m.at(2, 1);
    const double c01 = m.at(1, 2) * m.at(2, 0) - m.at(1, 0) * m.at(2, 2);
    const double c02 = m.at(1, 0) * m.at(2, 1) - m.at(1, 1) * m.at(2, 0);
    const double d = m.at(0, 0) * c00 + m.at(0, 1) * c01 + m.at(0, 2) * c02;
    if (!(std::abs(d) > scale * scale * scale * 1e-300))
      throw invalid_input("inverse: singular matrix");
    const double r = 1.0 / d;
    inv.at(0, 0) = c00 * r;
    inv.at(1, 0) = c01 * r;
    inv.at(2, 0) = c02 * r;
    inv.at(0, 1) = (m.at(0, 2) * m.at(2, 1) - m.at(0, 1) * m.at(2, 2)) * r;
    inv.at(1, 1) = (m.at(0, 0) * m.at(2, 2) - m.at(0, 2) * m.at(2, 0)) * r;
    inv.at(2, 1) = (m.at(0, 1) * m.at(2, 0) - m.at(0, 0) * m.at(2, 1)) * r;
    inv.at(0, 2) = (m.at(0, 1) * m.at(1, 2) - m.at(0, 2) * m.at(1, 1)) * r;
    inv.at(1, 2) = (m.at(0, 2) * m.at(1, 0) - m.at(0, 0) * m.at(1, 2)) * r;
    inv.at(2, 2) = (m.at(0, 0) * m.at(1, 1) - m.at(0, 1) * m.at(1, 0)) * r;
    return inv;
  }
  Mat a = m;
  Mat inv = Mat::identity(n);
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a.at(i, j)));
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    if (!(std::abs(a.at(pivot, col)) > scale * 1e-300))
      throw invalid_input("inverse: singular matrix");
    if (pivot != col)
      for (int j = 0; j < n; ++j) {
        std::swap(a.at(pivot, j), a.at(col, j));
        std::swap(inv.at(pivot, j), inv.at(col, j));
      }
    const double d = 1.0 / a.at(col, col);
    for (int j = 0; j < n; ++j) {
      a.at(col, j) *= d;
      inv.at(col, j) *= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a.at(r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a.at(r, j) -= f * a.at(col, j);
        inv.at(r, j) -= f * inv.at(col, j);
      }
    }
  }
  return inv;
}

inline SymTensor symmetrize(const Mat& m) {
  SymTensor s(m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = i; j < m.n; ++j) s.at(i, j) = 0.5 * (m.at(i, j) + m.at(j, i));
  return s;
}

}  // namespace detail

/// Eigendecomposition of a symmetric tensor: ascending eigenvalues and an
/// orthonormal eigenvector frame (columns of `vec`).
struct SymEig {
  int n = 0;
  std::array<double, SymTensor::max_dim> val{};
  detail::Mat vec;
};

/// Cyclic Jacobi.  For n <= 4 this converges to machine precision in a few
/// sweeps and is deterministic: fixed sweep order, fixed stopping rule.
inline SymEig eig_sym(const SymTensor& s) {
  const int n = s.dim();
  if (n == 0) throw invalid_input("eig_sym: empty tensor");
  if (!s.finite()) throw invalid_input("eig_sym: non-finite entries");

  detail::Mat a = detail::Mat::from_sym(s);
  detail::Mat v = detail::Mat::identity(n);

  if (n > 1) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) norm += a.at(i, j) * a.at(i, j);
    norm = std::sqrt(norm);
    const double stop = norm * 1e-15 + 1e-300;

    for (int sweep = 0; sweep < 64; ++sweep) {
      double off = 0.0;
      for (int p = 0; p < n - 1; ++p)
        for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
      if (std::sqrt(2.0 * off) <= stop) break;

      for (int p = 0; p < n - 1; ++p) {
        for (int q = p + 1; q < n; ++q) {
          const double apq = a.at(p, q);
          if (apq == 0.0) continue;
          const double tau = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
          const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                        : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double sn = t * c;
          for (int k = 0; k < n; ++k) {
            const double akp = a.at(k, p), akq = a.at(k, q);
            a.at(k, p) = c * akp - sn * akq;
            a.at(k, q) = sn * akp + c * akq;
          }
          for (int k = 0; k < n; ++k) {
            const double apk = a.at(p, k), aqk = a.at(q, k);
            a.at(p, k) = c * apk - sn * aqk;
            a.at(q, k) = sn * apk + c * aqk;
          }
          for (int k = 0; k < n; ++k) {
            const double vkp = v.at(k, p), vkq = v.at(k, q);
            v.at(k, p) = c * vkp - sn * vkq;
            v.at(k, q) = sn * vkp + c * vkq;
          }
        }
      }
    }
  }

  SymEig e;
  e.n = n;
  e.vec = detail::Mat(n);
  std::array<int, SymTensor::max_dim> order{};
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.begin() + n,
            [&](int x, int y) { return a.at(x, x) < a.at(y, y); });
  for (int i = 0; i < n; ++i) {
    const int src = order[static_cast<std::size_t>(i)];
    e.val[static_cast<std::size_t>(i)] = a.at(src, src);
    for (int k = 0; k < n; ++k) e.vec.at(k, i) = v.at(k, src);
  }
  return e;
}

/// Q f(Lambda) Q^T for the spectral decomposition of `s`.
template <class F>
SymTensor apply_spectral(const SymEig& e, F&& f) {
  SymTensor r(e.n);
  for (int k = 0; k < e.n; ++k) {
    const double fk = f(e.val[static_cast<std::size_t>(k)]);
    for (int i = 0; i < e.n; ++i)
      for (int j = i; j < e.n; ++j) r.at(i, j) += fk * e.vec.at(i, k) * e.vec.at(j, k);
  }
  return r;
}

template <class F>
SymTensor apply_spectral(const SymTensor& s, F&& f) {
  return apply_spectral(eig_sym(s), std::forward<F>(f));
}

inline bool is_positive_definite(const SymTensor& s, double eps_rel = default_tolerances().eps_eig_rel) {
  if (!s.finite()) return false;
  SymEig e = eig_sym(s);
  const double lo = e.val[0];
  const double hi = std::abs(e.val[static_cast<std::size_t>(e.n - 1)]);
  return lo > eps_rel * hi;
}

inline bool is_positive_semidefinite(const SymTensor& s, double eps_rel = default_tolerances().eps_eig_rel) {
  if (!s.finite()) return false;
  SymEig e = eig_sym(s);
  const double lo = e.val[0];
  double hi = 0.0;
  for (int i = 0; i < e.n; ++i) hi = std::max(hi, std::abs(e.val[static_cast<std::size_t>(i)]));
  return lo >= -eps_rel * hi;  // the zero tensor counts as semidefinite
}

inline SymTensor sqrt_pd(const SymTensor& g) {
  SymEig e = eig_sym(g);
  if (e.val[0] <= 0.0) throw numerical_failure("sqrt_pd: matrix not positive definite");
  return apply_spectral(e, [](double x) { return std::sqrt(x); });
}

inline SymTensor inv_sqrt_pd(const SymTensor& g) {
  SymEig e = eig_sym(g);
  if (e.val[0] <= 0.0) throw numerical_failure("inv_sqrt_pd: matrix not positive definite");
  return apply_spectral(e, [](double x) { return 1.0 / std::sqrt(x); });
}

inline SymTensor inverse_pd(const SymTensor& g) {
  SymEig e = eig_sym(g);
  if (e.val[0] <= 0.0) throw numerical_failure("inverse_pd: matrix not positive definite");
  return apply_spectral(e, [](double x) { return 1.0 / x; });
}

inline SymTensor exp_sym(const SymTensor& s) {
  return apply_spectral(s, [](double x) { return std::exp(x); });
}

inline SymTensor log_pd(const SymTensor& g) {
  SymEig e = eig_sym(g);
  if (e.val[0] <= 0.0) throw numerical_failure("log_pd: matrix not positive definite");
  return apply_spectral(e, [](double x) { return std::log(x); });
}

/// p a p for symmetric p, a (result symmetrized against roundoff).
inline SymTensor congruence(const SymTensor& p, const SymTensor& a) {
  detail::Mat pm = detail::Mat::from_sym(p);
  detail::Mat am = detail::Mat::from_sym(a);
  return detail::symmetrize(detail::mul(detail::mul(pm, am), pm));
}

/// Precomputed g^{1/2} and g^{-1/2} for repeated congruence transforms.
struct CongruenceFrame {
  SymTensor half;      // g^{1/2}
  SymTensor inv_half;  // g^{-1/2}
};

inline CongruenceFrame congruence_frame(const SymTensor& g) {
  SymEig e = eig_sym(g);
  if (e.val[0] <= 0.0) throw numerical_failure("congruence_frame: base not positive definite");
  CongruenceFrame f;
  f.half = apply_spectral(e, [](double x) { return std::sqrt(x); });
  f.inv_half = apply_spectral(e, [](double x) { return 1.0 / std::sqrt(x); });
  return f;
}

}  // namespace mspace
