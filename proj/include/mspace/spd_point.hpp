#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "mspace/common.hpp"
#include "mspace/sym_tensor.hpp"

namespace mspace {

// ---------------------------------------------------------------------------
// Pointwise geometry on the manifold of positive-definite symmetric tensors
// at a single cell.  Raised-index tensors g^{-1} a are handled through the
// symmetric congruence g^{-1/2} a g^{-1/2}, which has the same spectrum and
// reduces everything to symmetric eigenproblems.
// ---------------------------------------------------------------------------

/// Extreme eigenvalues of g_ref^{-1} a.
inline std::pair<double, double> eig_extremes(const SymTensor& g_ref, const SymTensor& a) {
  if (!g_ref.finite() || !a.finite()) throw invalid_input("eig_extremes: non-finite entries");
  SymTensor s = congruence(inv_sqrt_pd(g_ref), a);
  SymEig e = eig_sym(s);
  return {e.val[0], e.val[static_cast<std::size_t>(e.n - 1)]};
}

/// tr(g^{-1} h g^{-1} k): the pointwise scalar product <h,k>_g.
inline double trace_pair(const SymTensor& g, const SymTensor& h, const SymTensor& k) {
  if (!g.finite() || !h.finite() || !k.finite()) throw invalid_input("trace_pair: non-finite entries");
  detail::Mat inv = detail::inverse(detail::Mat::from_sym(g));
  detail::Mat a = detail::mul(inv, detail::Mat::from_sym(h));
  detail::Mat b = detail::mul(inv, detail::Mat::from_sym(k));
  const int n = g.dim();
  double t = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t += a.at(i, j) * b.at(j, i);
  return t;
}

/// tr(g^{-1} h).
inline double g_trace(const SymTensor& g, const SymTensor& h) {
  if (!g.finite() || !h.finite()) throw invalid_input("g_trace: non-finite entries");
  detail::Mat inv = detail::inverse(detail::Mat::from_sym(g));
  detail::Mat a = detail::mul(inv, detail::Mat::from_sym(h));
  double t = 0.0;
  for (int i = 0; i < g.dim(); ++i) t += a.at(i, i);
  return t;
}

/// det(g0^{-1} g1) for positive definite g0 and positive semidefinite g1.
inline double det_ratio(const SymTensor& g0, const SymTensor& g1) {
  const double d0 = g0.det();
  if (!(d0 > 0.0)) throw invalid_input("det_ratio: reference not positive definite");
  return g1.det() / d0;
}

/// sqrt(det(g0^{-1} g1)) = mu_{g1}/mu_{g0}, zero iff g1 is degenerate.
inline double sqrt_det_ratio(const SymTensor& g0, const SymTensor& g1) {
  double r = det_ratio(g0, g1);
  if (r < 0.0) {
    if (r < -1e-10) throw invalid_input("sqrt_det_ratio: second argument not positive semidefinite");
    r = 0.0;
  }
  return std::sqrt(r);
}

/// <h,k>^0 scalar product at `base` with reference `g_ref`:
/// trace_pair(base,h,k) * det(g_ref^{-1} base).
inline double inner0(const SymTensor& g_ref, const SymTensor& base, const SymTensor& h,
                     const SymTensor& k) {
  return trace_pair(base, h, k) * det_ratio(g_ref, base);
}

/// h = h_T + h_c with tr_g(h_T) = 0 and h_c = (tr_g h / n) g.
inline std::pair<SymTensor, SymTensor> split_traceless(const SymTensor& g, const SymTensor& h) {
  const int n = g.dim();
  const double c = g_trace(g, h) / n;
  SymTensor h_c = g * c;
  SymTensor h_t = h - h_c;
  return {h_t, h_c};
}

/// g0 exp(t g0^{-1} h): the geodesic of <.,.> through g0, positive definite
/// for all real t.
inline SymTensor geodesic_affine(const SymTensor& g0, const SymTensor& h, double t) {
  CongruenceFrame f = congruence_frame(g0);
  SymTensor s = congruence(f.inv_half, h);
  return congruence(f.half, exp_sym(s * t));
}

/// Length of the <.,.>-geodesic between a and b: sqrt(sum log(mu_i)^2) over
/// the eigenvalues mu_i of a^{-1} b.
inline double affine_distance(const SymTensor& a, const SymTensor& b) {
  SymTensor t = congruence(inv_sqrt_pd(a), b);
  SymEig e = eig_sym(t);
  double s = 0.0;
  for (int i = 0; i < e.n; ++i) {
    const double lam = e.val[static_cast<std::size_t>(i)];
    if (lam <= 0.0) throw numerical_failure("affine_distance: arguments not positive definite");
    const double l = std::log(lam);
    s += l * l;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Exponential map of the L2 metric, pointwise closed form.
//
// With H = g0^{-1} h, H^T its traceless part, q_t = 1 + (t/4) tr H and
// r_t = (t/4) sqrt(n tr((H^T)^2)):
//   g_t = (q_t^2 + r_t^2)^{2/n} g0 exp( 4 arctan(r_t/q_t)/sqrt(n tr((H^T)^2)) H^T )
// and g_t = q_t^{4/n} g0 on the pure-trace branch.  For t >= 0 the arctan
// branch is realized exactly by atan2(r_t, q_t): values in [0, pi/2) while
// q_t > 0, pi/2 at q_t = 0, (pi/2, pi) beyond.
// ---------------------------------------------------------------------------

enum class Boundary { reject, allow };

namespace detail {

struct ExpData {
  CongruenceFrame frame;  // of g0
  SymTensor s_traceless;  // traceless part of g0^{-1/2} h g0^{-1/2}
  double tr = 0.0;        // tr H
  double w2 = 0.0;        // tr((H^T)^2)
  bool pure_trace = false;
};

inline ExpData exp_data(const SymTensor& g0, const SymTensor& h,
                        const Tolerances& tol = default_tolerances()) {
  if (!g0.finite() || !h.finite()) throw invalid_input("ebin_exp: non-finite entries");
  ExpData d;
  d.frame = congruence_frame(g0);
  SymTensor s = congruence(d.frame.inv_half, h);
  const int n = g0.dim();
  d.tr = s.trace();
  d.s_traceless = s - SymTensor::identity(n) * (d.tr / n);
  double w2 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w2 += d.s_traceless.at(i, j) * d.s_traceless.at(j, i);
  d.w2 = w2;
  const double scale = std::abs(d.tr) / n + std::sqrt(w2);
  d.pure_trace = std::sqrt(w2) <= tol.eps_traceless * std::max(scale, 1e-300);
  return d;
}

}  // namespace detail

/// Supremum of the forward domain of the geodesic with data (g0, h):
/// -4/tr H on pure-trace cells with tr H < 0, +infinity otherwise.
inline double ebin_exp_domain_sup(const SymTensor& g0, const SymTensor& h,
                                  const Tolerances& tol = default_tolerances()) {
  detail::ExpData d = detail::exp_data(g0, h, tol);
  if (d.pure_trace && d.tr < 0.0) return -4.0 / d.tr;
  return std::numeric_limits<double>::infinity();
}

/// Evaluate the geodesic at time t in [0, domain_sup).  With
/// Boundary::allow, t == domain_sup returns the zero tensor (the boundary
/// value; flag it degenerate downstream).
inline SymTensor ebin_exp_point(const SymTensor& g0, const SymTensor& h, double t,
                                Boundary boundary = Boundary::reject,
                                const Tolerances& tol = default_tolerances()) {
  if (t < 0.0) throw out_of_domain("ebin_exp_point: negative time", t, 0.0);
  detail::ExpData d = detail::exp_data(g0, h, tol);
  const int n = g0.dim();
  const double q = 1.0 + 0.25 * t * d.tr;

  if (d.pure_trace) {
    const double sup = (d.tr < 0.0) ? -4.0 / d.tr : std::numeric_limits<double>::infinity();
    if (t >= sup) {
      const bool at_boundary = t <= sup * (1.0 + 1e-12);
      if (boundary == Boundary::allow && at_boundary) return SymTensor(n);
      throw out_of_domain("ebin_exp_point: time at or beyond domain supremum", t, sup);
    }
    return g0 * std::pow(q, 4.0 / n);
  }

  const double w = std::sqrt(n * d.w2);
  const double r = 0.25 * t * w;
  const double conformal = std::pow(q * q + r * r, 2.0 / n);
  const double angle = std::atan2(r, q);
  const double coeff = 4.0 * angle / w;
  SymTensor core = exp_sym(d.s_traceless * coeff);
  return congruence(d.frame.half, core) * conformal;
}

// ---------------------------------------------------------------------------
// Inverse of the exponential map.  Domain of validity: with
// K = log(g0^{-1} g1 / det(g0^{-1} g1)^{1/n}), require
// tr(K^2) < 16 pi^2 / n (strict, with a configurable margin).
// ---------------------------------------------------------------------------

inline SymTensor ebin_log_point(const SymTensor& g0, const SymTensor& g1,
                                const Tolerances& tol = default_tolerances()) {
  if (!g0.finite() || !g1.finite()) throw invalid_input("ebin_log_point: non-finite entries");
  const int n = g0.dim();
  CongruenceFrame f = congruence_frame(g0);
  SymTensor t = congruence(f.inv_half, g1);
  SymEig e = eig_sym(t);
  if (e.val[0] <= 0.0) throw invalid_input("ebin_log_point: second argument not positive definite");

  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += std::log(e.val[static_cast<std::size_t>(i)]);
  const double mean_log = log_det / n;

  double tr_k2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double k = std::log(e.val[static_cast<std::size_t>(i)]) - mean_log;
    tr_k2 += k * k;
  }
  const double limit = 16.0 * std::numbers::pi * std::numbers::pi / n;
  if (tr_k2 >= limit - tol.eps_range)
    throw out_of_range_input("ebin_log_point: target outside the range of the exponential map");

  const double rho = std::exp(0.25 * log_det);            // det(g0^{-1} g1)^{1/4}
  const double phi = 0.25 * std::sqrt(static_cast<double>(n) * tr_k2);
  const double q = rho * std::cos(phi);
  const double r = rho * std::sin(phi);
  const double tr_h = 4.0 * (q - 1.0);
  const double coeff = (phi > 1e-150) ? r / phi : rho;

  SymTensor k_s = apply_spectral(e, [&](double lam) { return std::log(lam) - mean_log; });
  SymTensor s = k_s * coeff + SymTensor::identity(n) * (tr_h / n);
  return congruence(f.half, s);
}

// ---------------------------------------------------------------------------
// Certified interval for the pointwise distance theta^g_x(a, b) of the
// <.,.>^0 metric.  No closed form exists; lower and upper bounds are
// combined from
//   lower:  (2/sqrt(n)) |sqrt(det A) - sqrt(det B)|
//           min( sqrt(n)(1 - 1/sqrt(2)) sqrt(delta), sqrt(delta/2) d_x(a,b) )
//   upper:  C'(n) (sqrt(det A) + sqrt(det B))        through-zero, quoted constant
//           (2/sqrt(n)) (sqrt(det A) + sqrt(det B))  through-zero, exact radial limit
//           |h|^0-length of the closed-form geodesic when b is in log range
// with A = g_ref^{-1} a, delta = min(det A, det B).
// ---------------------------------------------------------------------------

struct ThetaInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// C'(n): sqrt(n) * (4/n) for n < 4, sqrt(n) for n >= 4 (the two agree at 4).
inline double theta_upper_constant(int n) {
  return (n < 4) ? 4.0 / std::sqrt(static_cast<double>(n)) : std::sqrt(static_cast<double>(n));
}

/// Same constant map, used for the field-level small-volume bound C(n).
inline double small_volume_constant(int n) { return theta_upper_constant(n); }

namespace detail {

/// Integral over [0,1] of |(1,0) + t v| for a plane vector v: the mean
/// distance from the origin along the segment from (1,0) to (1,0)+v.
inline double line_norm_integral(double v1, double v2) {
  const double l = std::hypot(v1, v2);
  if (l < 1e-8) return 1.0 + 0.5 * v1;  // relative error O(l^2)
  const double h = std::abs(v2) / l;    // distance from the origin to the line
  const double t0 = v1 / l;             // signed foot coordinate of (1,0)
  const double t1 = t0 + l;
  auto antideriv = [&](double tau) {
    if (h < 1e-14) return 0.5 * tau * std::abs(tau);
    return 0.5 * (tau * std::hypot(h, tau) + h * h * std::asinh(tau / h));
  };
  return (antideriv(t1) - antideriv(t0)) / l;
}

/// Exact |.|^0-length of the closed-form geodesic from a base with
/// determinant factor det_base to the point with chart data (rho, phi).
/// Along the geodesic q_t + i r_t moves on a straight line from 1 to
/// rho e^{i phi}, and the speed works out to
/// (4/sqrt n) sqrt(det_base) |v| |(1,0) + t v| with
/// v = (rho cos phi - 1, rho sin phi).
inline double theta_geodesic_upper(int n, double det_base, double rho, double phi) {
  const double v1 = rho * std::cos(phi) - 1.0;
  const double v2 = rho * std::sin(phi);
  const double vnorm = std::sqrt(v1 * v1 + v2 * v2);
  return (4.0 / std::sqrt(static_cast<double>(n))) * std::sqrt(det_base) * vnorm *
         line_norm_integral(v1, v2);
}

}  // namespace detail

inline ThetaInterval theta_bounds(const SymTensor& g_ref, const SymTensor& a, const SymTensor& b,
                                  const Tolerances& tol = default_tolerances()) {
  if (!g_ref.finite() || !a.finite() || !b.finite())
    throw invalid_input("theta_bounds: non-finite entries");
  const int n = g_ref.dim();
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double det_a = det_ratio(g_ref, a);
  const double det_b = det_ratio(g_ref, b);
  if (!(det_a > 0.0) || !(det_b > 0.0))
    throw invalid_input("theta_bounds: arguments not positive definite");
  const double sa = std::sqrt(det_a), sb = std::sqrt(det_b);

  // one congruence spectrum serves the affine distance and both chart routes
  SymEig e = eig_sym(congruence(inv_sqrt_pd(a), b));
  if (e.val[0] <= 0.0) throw invalid_input("theta_bounds: arguments not positive definite");
  double dx2 = 0.0, log_det = 0.0;
  for (int i = 0; i < n; ++i) {
    const double l = std::log(e.val[static_cast<std::size_t>(i)]);
    dx2 += l * l;
    log_det += l;
  }
  const double dx = std::sqrt(dx2);
  double tr_k2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double k = std::log(e.val[static_cast<std::size_t>(i)]) - log_det / n;
    tr_k2 += k * k;
  }

  const double lower_det = (2.0 / sqrt_n) * std::abs(sa - sb);
  const double delta = std::min(det_a, det_b);
  const double lower_split =
      std::min(sqrt_n * (1.0 - 1.0 / std::sqrt(2.0)) * std::sqrt(delta), std::sqrt(delta / 2.0) * dx);
  double lower = std::max(lower_det, lower_split);

  const double upper_quoted = theta_upper_constant(n) * (sa + sb);
  const double upper_radial = (2.0 / sqrt_n) * (sa + sb);
  double upper = std::min(upper_quoted, upper_radial);
  const double range_limit = 16.0 * std::numbers::pi * std::numbers::pi / n;
  if (tr_k2 < range_limit - tol.eps_range) {
    const double rho = std::exp(0.25 * log_det);
    const double phi = 0.25 * sqrt_n * std::sqrt(tr_k2);
    upper = std::min(upper, detail::theta_geodesic_upper(n, det_a, rho, phi));
    upper = std::min(upper, detail::theta_geodesic_upper(n, det_b, 1.0 / rho, phi));
  }

  // bounds are exact up to roundoff; keep the certified ordering
  if (lower > upper) lower = upper;
  return {lower, upper};
}

// ---------------------------------------------------------------------------
// Finite-prefix classification of a sequence in the pointwise completion:
// converges to a positive-definite limit, degenerates toward the collapsed
// boundary, or fails the Cauchy certificate.
// ---------------------------------------------------------------------------

enum class PointKind { Converges, Degenerates, NotCauchy };

struct ClassifyConfig {
  double eps_det = 1e-8;        // deflation threshold on det(g_ref^{-1} a_k)
  double eps_conv = 1e-6;       // max-norm stabilization threshold
  double tol_cauchy = 0.35;     // scale at which the tail window must be Cauchy
  double window_fraction = 0.5; // portion of the sequence treated as the tail
  int max_pair_samples = 24;    // decimation for pairwise lower-bound probing
};

struct PointClassification {
  PointKind kind = PointKind::NotCauchy;
  SymTensor limit;                  // positive definite iff kind == Converges
  std::vector<double> det_trace;    // det(g_ref^{-1} a_k)
  std::vector<double> step_upper;   // consecutive theta upper bounds
  double cauchy_upper = 0.0;        // certified upper bound for the tail diameter
  double divergence_lower = 0.0;    // certified lower bound for the tail diameter
  ClassifyConfig config;            // echoed parameters
};

inline PointClassification classify_point_sequence(std::span<const SymTensor> seq,
                                                   const SymTensor& g_ref,
                                                   const ClassifyConfig& cfg = {}) {
  if (seq.empty()) throw invalid_input("classify_point_sequence: empty sequence");
  const std::size_t len = seq.size();
  const int n = g_ref.dim();
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  PointClassification out;
  out.config = cfg;
  out.det_trace.reserve(len);
  for (const SymTensor& a : seq) out.det_trace.push_back(det_ratio(g_ref, a));

  out.step_upper.reserve(len > 0 ? len - 1 : 0);
  for (std::size_t k = 0; k + 1 < len; ++k)
    out.step_upper.push_back(theta_bounds(g_ref, seq[k], seq[k + 1]).upper);

  const std::size_t w_begin =
      std::min(len - 1, static_cast<std::size_t>(std::floor(len * (1.0 - cfg.window_fraction))));
  const std::size_t w_len = len - w_begin;

  // Certified upper bound for the theta-diameter of the tail window:
  // chained consecutive uppers vs. the through-zero route.
  KahanSum chain;
  for (std::size_t k = w_begin; k + 1 < len; ++k) chain.add(out.step_upper[k]);
  double max_sqrt_det = 0.0;
  for (std::size_t k = w_begin; k < len; ++k)
    max_sqrt_det = std::max(max_sqrt_det, std::sqrt(std::max(out.det_trace[k], 0.0)));
  out.cauchy_upper = std::min(chain.value(), (4.0 / sqrt_n) * max_sqrt_det);

  // Certified lower bound on the same diameter, probed over decimated pairs.
  std::vector<std::size_t> probe;
  const std::size_t stride = std::max<std::size_t>(1, w_len / static_cast<std::size_t>(cfg.max_pair_samples));
  for (std::size_t k = w_begin; k < len; k += stride) probe.push_back(k);
  if (probe.back() != len - 1) probe.push_back(len - 1);
  double lower_wit = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i)
    for (std::size_t j = i + 1; j < probe.size(); ++j)
      lower_wit = std::max(lower_wit, theta_bounds(g_ref, seq[probe[i]], seq[probe[j]]).lower);
  out.divergence_lower = lower_wit;

  if (out.divergence_lower > cfg.tol_cauchy || out.cauchy_upper > cfg.tol_cauchy) {
    out.kind = PointKind::NotCauchy;
    out.limit = SymTensor(n);
    return out;
  }

  // Theta-Cauchy at tolerance.  Degeneration first: determinant envelope of
  // the last quarter below eps_det and not increasing relative to the
  // preceding quarter.
  const std::size_t q_begin = std::min(len - 1, w_begin + w_len / 2);
  double env_late = 0.0, env_early = 0.0;
  for (std::size_t k = q_begin; k < len; ++k) env_late = std::max(env_late, out.det_trace[k]);
  for (std::size_t k = w_begin; k < q_begin; ++k) env_early = std::max(env_early, out.det_trace[k]);
  if (w_begin == q_begin) env_early = env_late;
  if (env_late < cfg.eps_det && env_late <= env_early * (1.0 + 1e-12) + 1e-300) {
    out.kind = PointKind::Degenerates;
    out.limit = SymTensor(n);
    return out;
  }

  // Convergence: entries stabilized around the late-window average.
  SymTensor avg(n);
  for (std::size_t k = q_begin; k < len; ++k) avg += seq[k];
  avg *= 1.0 / static_cast<double>(len - q_begin);
  double dev = 0.0;
  for (std::size_t k = q_begin; k < len; ++k) dev = std::max(dev, (seq[k] - avg).max_abs());
  const double conv_scale = std::max(1.0, avg.max_abs());
  if (dev <= cfg.eps_conv * conv_scale && is_positive_definite(avg)) {
    out.kind = PointKind::Converges;
    out.limit = avg;
    return out;
  }

  out.kind = PointKind::NotCauchy;
  out.limit = SymTensor(n);
  return out;
}

}  // namespace mspace
