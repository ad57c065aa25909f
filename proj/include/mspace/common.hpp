#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace mspace {

struct invalid_input : std::runtime_error {
  explicit invalid_input(const std::string& what) : std::runtime_error(what) {}
};

struct out_of_domain : std::runtime_error {
  double t = 0.0;
  double domain_sup = 0.0;
  std::size_t cell = 0;
  out_of_domain(const std::string& what, double t_, double sup_, std::size_t cell_ = 0)
      : std::runtime_error(what), t(t_), domain_sup(sup_), cell(cell_) {}
};

struct out_of_range_input : std::runtime_error {
  std::size_t cell = 0;
  explicit out_of_range_input(const std::string& what, std::size_t cell_ = 0)
      : std::runtime_error(what), cell(cell_) {}
};

struct numerical_failure : std::runtime_error {
  explicit numerical_failure(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric thresholds used across the library.  Every classification call
/// echoes the values it ran with, so borderline results remain auditable.
struct Tolerances {
  double eps_eig_rel = 1e-12;    // positive-definite test: lambda_min > eps * lambda_max
  double eps_det = 1e-8;         // deflation threshold on det(g_ref^{-1} a)
  double eps_range = 1e-9;       // margin kept inside the exp/log range
  double eps_rt = 1e-8;          // exp/log round-trip tolerance
  double eps_lin = 1e-12;        // slack for linear identities (orthogonality etc.)
  double eps_traceless = 1e-13;  // relative cutoff below which a tangent counts as pure trace
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

/// Neumaier compensated accumulator.  Grid reductions always run in fixed
/// row-major order through one of these, so sums are bit-reproducible.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Quintic smoothstep: C^2 ramp from 0 at u<=0 to 1 at u>=1.
inline double smoothstep5(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (u * (u * 6.0 - 15.0) + 10.0);
}

inline bool nearly_equal(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace mspace
