#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mspace/common.hpp"
#include "mspace/grid.hpp"
#include "mspace/spd_point.hpp"
#include "mspace/sym_tensor.hpp"

namespace mspace {

// ---------------------------------------------------------------------------
// L2 scalar product, volume, quadrature.  Space is integrated by the
// midpoint rule (fields are cellwise values), time by the trapezoid rule on
// speed samples.  All reductions run through compensated sums in row-major
// order.
// ---------------------------------------------------------------------------

/// (h,k)_g = sum over cells of tr_g(hk) sqrt(det g) * cell_measure.
inline double l2_inner(const MetricField& g, const TangentField& h, const TangentField& k) {
  check_same_grid(g.grid, h.grid, "l2_inner");
  check_same_grid(g.grid, k.grid, "l2_inner");
  KahanSum sum;
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    const double w = std::sqrt(std::max(g.cells[i].det(), 0.0));
    sum.add(trace_pair(g.cells[i], h.cells[i], k.cells[i]) * w * g.grid.cell_measure);
  }
  return sum.value();
}

inline double l2_norm(const MetricField& g, const TangentField& h) {
  return std::sqrt(std::max(l2_inner(g, h, h), 0.0));
}

template <class Field>
double volume(const Field& f, const CellMask& mask) {
  check_same_grid(f.grid, mask.grid, "volume");
  KahanSum sum;
  for (std::size_t i = 0; i < f.cells.size(); ++i) {
    if (!mask.bits[i]) continue;
    sum.add(std::sqrt(std::max(f.cells[i].det(), 0.0)) * f.grid.cell_measure);
  }
  return sum.value();
}

template <class Field>
double total_volume(const Field& f) {
  return volume(f, mask_all(f.grid));
}

// ---------------------------------------------------------------------------
// Field-level exponential and logarithm (cellwise closed forms).
// ---------------------------------------------------------------------------

/// Supremum of the common forward domain over all cells; +infinity when no
/// cell has a pure-trace tangent with negative trace.
inline double exp_domain_sup(const MetricField& g0, const TangentField& h,
                             std::size_t* binding_cell = nullptr,
                             const Tolerances& tol = default_tolerances()) {
  check_same_grid(g0.grid, h.grid, "exp_domain_sup");
  double sup = std::numeric_limits<double>::infinity();
  std::size_t cell = 0;
  for (std::size_t i = 0; i < g0.cells.size(); ++i) {
    const double s = ebin_exp_domain_sup(g0.cells[i], h.cells[i], tol);
    if (s < sup) {
      sup = s;
      cell = i;
    }
  }
  if (binding_cell) *binding_cell = cell;
  return sup;
}

inline MetricField exp_field(const MetricField& g0, const TangentField& h, double t,
                             const Tolerances& tol = default_tolerances()) {
  check_same_grid(g0.grid, h.grid, "exp_field");
  std::size_t cell = 0;
  const double sup = exp_domain_sup(g0, h, &cell, tol);
  if (t < 0.0 || t >= sup)
    throw out_of_domain("exp_field: time outside [0, domain_sup) at cell " + std::to_string(cell), t,
                        sup, cell);
  MetricField out;
  out.grid = g0.grid;
  out.cells.reserve(g0.cells.size());
  for (std::size_t i = 0; i < g0.cells.size(); ++i)
    out.cells.push_back(ebin_exp_point(g0.cells[i], h.cells[i], t, Boundary::reject, tol));
  return out;
}

inline TangentField log_field(const MetricField& g0, const MetricField& g1,
                              const Tolerances& tol = default_tolerances()) {
  check_same_grid(g0.grid, g1.grid, "log_field");
  TangentField out;
  out.grid = g0.grid;
  out.cells.reserve(g0.cells.size());
  for (std::size_t i = 0; i < g0.cells.size(); ++i) {
    try {
      out.cells.push_back(ebin_log_point(g0.cells[i], g1.cells[i], tol));
    } catch (const out_of_range_input&) {
      throw out_of_range_input("log_field: cell " + std::to_string(i) +
                                   " outside the range of the exponential map",
                               i);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curvature of the L2 metric (cellwise algebra in the g^{-1/2} frame).
// ---------------------------------------------------------------------------

namespace detail {

inline double sym_dot(const SymTensor& a, const SymTensor& b) {
  double s = 0.0;
  const int n = a.dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += a.at(i, j) * b.at(j, i);
  return s;
}

/// [[H,K],L] for symmetric H,K,L (a symmetric matrix).
inline SymTensor double_commutator(const SymTensor& h, const SymTensor& k, const SymTensor& l) {
  Mat hm = Mat::from_sym(h), km = Mat::from_sym(k), lm = Mat::from_sym(l);
  Mat hk = mul(hm, km);
  Mat a(h.dim());
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) a.at(i, j) = hk.at(i, j) - hk.at(j, i);  // [H,K]
  Mat al = mul(a, lm), la = mul(lm, a);
  SymTensor out(h.dim());
  for (int i = 0; i < out.dim(); ++i)
    for (int j = i; j < out.dim(); ++j) out.at(i, j) = al.at(i, j) - la.at(i, j);
  return out;
}

/// tr([A,B]^2) for symmetric A,B; always <= 0 since [A,B] is antisymmetric.
inline double commutator_square_trace(const SymTensor& a, const SymTensor& b) {
  Mat am = Mat::from_sym(a), bm = Mat::from_sym(b);
  Mat ab = mul(am, bm);
  double s = 0.0;
  const int n = a.dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double m = ab.at(i, j) - ab.at(j, i);
      s -= m * m;
    }
  return s;
}

}  // namespace detail

/// R_g(h,k)l as a (0,2) tangent field:
///   g^{-1} R = -1/4 [[H,K],L] + n/16 (tr(HL) K - tr(KL) H)
///              + 1/16 (tr K tr L H - tr H tr L K)
///              + 1/16 (tr H tr(KL) - tr K tr(HL)) I.
inline TangentField curvature_tensor(const MetricField& g, const TangentField& h,
                                     const TangentField& k, const TangentField& l) {
  check_same_grid(g.grid, h.grid, "curvature_tensor");
  check_same_grid(g.grid, k.grid, "curvature_tensor");
  check_same_grid(g.grid, l.grid, "curvature_tensor");
  const int n = g.grid.n;
  TangentField out;
  out.grid = g.grid;
  out.cells.reserve(g.cells.size());
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    CongruenceFrame f = congruence_frame(g.cells[i]);
    SymTensor hh = congruence(f.inv_half, h.cells[i]);
    SymTensor kk = congruence(f.inv_half, k.cells[i]);
    SymTensor ll = congruence(f.inv_half, l.cells[i]);
    const double th = hh.trace(), tk = kk.trace(), tl = ll.trace();
    const double hl = detail::sym_dot(hh, ll), kl = detail::sym_dot(kk, ll);
    SymTensor r = detail::double_commutator(hh, kk, ll) * (-0.25);
    r += (kk * hl - hh * kl) * (n / 16.0);
    r += (hh * (tk * tl) - kk * (th * tl)) * (1.0 / 16.0);
    r += SymTensor::identity(n) * ((th * kl - tk * hl) / 16.0);
    out.cells.push_back(congruence(f.half, r));
  }
  return out;
}

/// K_g(h,k) over the traceless parts:
///   integral of 1/4 tr([H,K]^2) + n/16 (tr(HK)^2 - tr(H^2) tr(K^2)) d mu_g;
/// always <= 0, and equal to (R(h,k)k, h)_g.
inline double sectional_curvature(const MetricField& g, const TangentField& h,
                                  const TangentField& k) {
  check_same_grid(g.grid, h.grid, "sectional_curvature");
  check_same_grid(g.grid, k.grid, "sectional_curvature");
  const int n = g.grid.n;
  KahanSum sum;
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    SymTensor p = inv_sqrt_pd(g.cells[i]);
    SymTensor hh = congruence(p, h.cells[i]);
    SymTensor kk = congruence(p, k.cells[i]);
    hh -= SymTensor::identity(n) * (hh.trace() / n);
    kk -= SymTensor::identity(n) * (kk.trace() / n);
    const double hk = detail::sym_dot(hh, kk);
    const double h2 = detail::sym_dot(hh, hh);
    const double k2 = detail::sym_dot(kk, kk);
    const double integrand =
        0.25 * detail::commutator_square_trace(hh, kk) + (n / 16.0) * (hk * hk - h2 * k2);
    sum.add(integrand * std::sqrt(std::max(g.cells[i].det(), 0.0)) * g.grid.cell_measure);
  }
  return sum.value();
}

/// Tensorial Christoffel form of the L2 metric for constant vector fields:
///   Gamma(h,k) = -1/2 (h g^{-1} k + k g^{-1} h)
///                + 1/4 ((tr_g k) h + (tr_g h) k - tr_g(hk) g);
/// geodesics satisfy g'' + Gamma(g',g') = 0.
inline TangentField christoffel(const MetricField& g, const TangentField& h,
                                const TangentField& k) {
  check_same_grid(g.grid, h.grid, "christoffel");
  check_same_grid(g.grid, k.grid, "christoffel");
  TangentField out;
  out.grid = g.grid;
  out.cells.reserve(g.cells.size());
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    CongruenceFrame f = congruence_frame(g.cells[i]);
    SymTensor hh = congruence(f.inv_half, h.cells[i]);
    SymTensor kk = congruence(f.inv_half, k.cells[i]);
    const double th = hh.trace(), tk = kk.trace(), thk = detail::sym_dot(hh, kk);
    detail::Mat prod = detail::mul(detail::Mat::from_sym(hh), detail::Mat::from_sym(kk));
    SymTensor anti(g.grid.n);
    for (int a = 0; a < g.grid.n; ++a)
      for (int b = a; b < g.grid.n; ++b) anti.at(a, b) = -0.5 * (prod.at(a, b) + prod.at(b, a));
    SymTensor gamma = anti + (hh * tk + kk * th - SymTensor::identity(g.grid.n) * thk) * 0.25;
    out.cells.push_back(congruence(f.half, gamma));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Path lengths.  Tangents of sampled paths come from second-order finite
// differences (centered inside, one-sided 3-point at the ends).
// ---------------------------------------------------------------------------

inline std::vector<TangentField> path_tangents(const MetricPath& p) {
  const std::size_t m = p.times.size();
  if (m < 2 || p.fields.size() != m) throw invalid_input("path_tangents: need >= 2 samples");
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (!(p.times[i + 1] > p.times[i])) throw invalid_input("path_tangents: times must increase");
  for (const MetricField& f : p.fields) check_same_grid(f.grid, p.fields[0].grid, "path_tangents");

  auto diff = [&](std::size_t a, std::size_t b) {
    TangentField d;
    d.grid = p.fields[0].grid;
    d.cells.resize(d.grid.cell_count(), SymTensor(d.grid.n));
    for (std::size_t c = 0; c < d.cells.size(); ++c)
      d.cells[c] = p.fields[b].cells[c] - p.fields[a].cells[c];
    return d;
  };

  std::vector<TangentField> tang(m);
  for (std::size_t i = 0; i < m; ++i) {
    TangentField t;
    t.grid = p.fields[0].grid;
    t.cells.assign(t.grid.cell_count(), SymTensor(t.grid.n));
    if (i == 0 || i + 1 == m) {
      // one-sided 3-point (falls back to 2-point on very short paths)
      const bool head = (i == 0);
      const std::size_t i0 = head ? 0 : m - 1;
      const std::size_t i1 = head ? 1 : m - 2;
      if (m == 2) {
        const double dt = p.times[1] - p.times[0];
        TangentField d = diff(0, 1);
        for (std::size_t c = 0; c < t.cells.size(); ++c) t.cells[c] = d.cells[c] * (1.0 / dt);
      } else {
        const std::size_t i2 = head ? 2 : m - 3;
        const double h1 = p.times[i1] - p.times[i0];
        const double h2 = p.times[i2] - p.times[i1];
        // derivative at i0 of the quadratic through (i0,i1,i2)
        const double c0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
        const double c1 = (h1 + h2) / (h1 * h2);
        const double c2 = -h1 / (h2 * (h1 + h2));
        for (std::size_t c = 0; c < t.cells.size(); ++c)
          t.cells[c] = p.fields[i0].cells[c] * c0 + p.fields[i1].cells[c] * c1 +
                       p.fields[i2].cells[c] * c2;
      }
    } else {
      const double hm = p.times[i] - p.times[i - 1];
      const double hp = p.times[i + 1] - p.times[i];
      const double cm = -hp / (hm * (hm + hp));
      const double c0 = (hp - hm) / (hm * hp);
      const double cp = hm / (hp * (hm + hp));
      for (std::size_t c = 0; c < t.cells.size(); ++c)
        t.cells[c] = p.fields[i - 1].cells[c] * cm + p.fields[i].cells[c] * c0 +
                     p.fields[i + 1].cells[c] * cp;
    }
    tang[i] = std::move(t);
  }
  return tang;
}

inline std::vector<double> path_speeds(const MetricPath& p) {
  std::vector<TangentField> tang = path_tangents(p);
  std::vector<double> v(p.times.size());
  for (std::size_t i = 0; i < p.times.size(); ++i) v[i] = l2_norm(p.fields[i], tang[i]);
  return v;
}

/// Trapezoid quadrature of the path speed over the sample times.
inline double path_length(const MetricPath& p) {
  std::vector<double> v = path_speeds(p);
  KahanSum sum;
  for (std::size_t i = 0; i + 1 < p.times.size(); ++i)
    sum.add(0.5 * (v[i] + v[i + 1]) * (p.times[i + 1] - p.times[i]));
  return sum.value();
}

// ---------------------------------------------------------------------------
// Straight-line segment lengths via the simultaneous diagonalization of the
// endpoint pencil: with B = a^{-1/2} b a^{-1/2} = Q diag(mu) Q^T, the mix
// (1-sigma) a + sigma b has closed-form trace and determinant factors, so
// each time node costs O(n) per cell.
// ---------------------------------------------------------------------------

namespace detail {

struct PencilCell {
  std::array<double, SymTensor::max_dim> mu{};  // eigenvalues of base^{-1} other
  double sqrt_det_base = 0.0;
};

/// Pencil of (base, other) per cell; base must be positive definite, other
/// positive semidefinite.
inline std::vector<PencilCell> make_pencil(const std::vector<SymTensor>& base,
                                           const std::vector<SymTensor>& other) {
  std::vector<PencilCell> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    SymTensor t = congruence(inv_sqrt_pd(base[i]), other[i]);
    SymEig e = eig_sym(t);
    for (int k = 0; k < e.n; ++k)
      out[i].mu[static_cast<std::size_t>(k)] = std::max(e.val[static_cast<std::size_t>(k)], 0.0);
    out[i].sqrt_det_base = std::sqrt(std::max(base[i].det(), 0.0));
  }
  return out;
}

/// Squared L2 speed of sigma -> (1-sigma) base + sigma other, optionally
/// weighted per cell by weight[i]^{n/2} (mollifier factor).
inline double pencil_speed_squared(const std::vector<PencilCell>& pencil, int n,
                                   double cell_measure, double sigma,
                                   const std::vector<double>* weight_pow) {
  KahanSum sum;
  for (std::size_t i = 0; i < pencil.size(); ++i) {
    double tr = 0.0, det = 1.0;
    for (int k = 0; k < n; ++k) {
      const double mu = pencil[i].mu[static_cast<std::size_t>(k)];
      const double mix = (1.0 - sigma) + sigma * mu;
      const double ratio = (mu - 1.0) / mix;
      tr += ratio * ratio;
      det *= mix;
    }
    double v = tr * pencil[i].sqrt_det_base * std::sqrt(std::max(det, 0.0)) * cell_measure;
    if (weight_pow) v *= (*weight_pow)[i];
    sum.add(v);
  }
  return sum.value();
}

/// Composite midpoint over sigma in [0,1] with the end-graded substitution
/// sigma = tau^4 / (tau^4 + (1-tau)^4); integrable endpoint spikes up to
/// sigma^{-3/4} become bounded integrands.
template <class SpeedFn>
double graded_segment_length(SpeedFn&& speed, int nodes) {
  KahanSum sum;
  const double dtau = 1.0 / nodes;
  for (int j = 0; j < nodes; ++j) {
    const double tau = (j + 0.5) * dtau;
    const double t4 = tau * tau * tau * tau;
    const double u4 = (1.0 - tau) * (1.0 - tau) * (1.0 - tau) * (1.0 - tau);
    const double denom = t4 + u4;
    const double sigma = t4 / denom;
    const double jac = 4.0 * tau * tau * tau * (1.0 - tau) * (1.0 - tau) * (1.0 - tau) /
                       (denom * denom);
    sum.add(std::sqrt(std::max(speed(sigma), 0.0)) * jac * dtau);
  }
  return sum.value();
}

}  // namespace detail

/// Quadrature length of the straight segment from `a` (positive
/// semidefinite) to `b` (positive definite).
inline double straight_line_length(const SemiMetricField& a, const MetricField& b, int nodes = 257) {
  check_same_grid(a.grid, b.grid, "straight_line_length");
  std::vector<detail::PencilCell> pencil = detail::make_pencil(b.cells, a.cells);
  const int n = a.grid.n;
  // mix(sigma) = (1-sigma) a + sigma b: reverse the pencil parameter
  return detail::graded_segment_length(
      [&](double sigma) {
        return detail::pencil_speed_squared(pencil, n, a.grid.cell_measure, 1.0 - sigma, nullptr);
      },
      nodes);
}

inline double straight_line_length(const MetricField& a, const MetricField& b, int nodes = 257) {
  check_same_grid(a.grid, b.grid, "straight_line_length");
  std::vector<detail::PencilCell> pencil = detail::make_pencil(a.cells, b.cells);
  return detail::graded_segment_length(
      [&](double sigma) {
        return detail::pencil_speed_squared(pencil, a.grid.n, a.grid.cell_measure, sigma, nullptr);
      },
      nodes);
}

// ---------------------------------------------------------------------------
// Small-volume distance bound: quadrature length of the three-segment path
//   g0 -> f g0 -> f g1 -> g1
// with a mollified indicator f (value s inside E, 1 outside).  An upper
// bound for d(g0, g1) whenever g0 = g1 off E, refining toward
// C(n) (sqrt Vol(E,g0) + sqrt Vol(E,g1)) as s and the smoothing width
// shrink.
// ---------------------------------------------------------------------------

inline double dist_upper_smallvol(const MetricField& g0, const MetricField& g1, const CellMask& E,
                                  double s, double smooth_width, int nodes = 257,
                                  const Tolerances& tol = default_tolerances()) {
  check_same_grid(g0.grid, g1.grid, "dist_upper_smallvol");
  check_same_grid(g0.grid, E.grid, "dist_upper_smallvol");
  if (!(s > 0.0) || s > 1.0) throw invalid_input("dist_upper_smallvol: s must be in (0,1]");
  const int n = g0.grid.n;
  const double meas = g0.grid.cell_measure;

  for (std::size_t i = 0; i < g0.cells.size(); ++i) {
    if (E.bits[i]) continue;
    const double scale = std::max({1.0, g0.cells[i].max_abs(), g1.cells[i].max_abs()});
    if ((g0.cells[i] - g1.cells[i]).max_abs() > tol.eps_lin * scale)
      throw invalid_input("dist_upper_smallvol: fields differ off the mask at cell " +
                          std::to_string(i));
  }

  const std::vector<double> f = mollified_indicator(E, s, smooth_width);
  std::vector<double> f_pow(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f_pow[i] = std::pow(f[i], 0.5 * n);

  // conformal segments g -> f g: speed^2(t) = sum_c n (1-f)^2 ((1-t)+t f)^{n/2-2} sqrt(det g) meas
  auto conformal_speed2 = [&](const MetricField& g, double t) {
    KahanSum sum;
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      const double fc = f[i];
      if (fc == 1.0) continue;
      const double mix = (1.0 - t) + t * fc;
      sum.add(n * (1.0 - fc) * (1.0 - fc) * std::pow(mix, 0.5 * n - 2.0) *
              std::sqrt(std::max(g.cells[i].det(), 0.0)) * meas);
    }
    return sum.value();
  };
  // grading t = 1 - (1-tau)^4 concentrates nodes where mix -> s
  auto conformal_length = [&](const MetricField& g) {
    KahanSum sum;
    const double dtau = 1.0 / nodes;
    for (int j = 0; j < nodes; ++j) {
      const double tau = (j + 0.5) * dtau;
      const double u = 1.0 - tau;
      const double t = 1.0 - u * u * u * u;
      const double jac = 4.0 * u * u * u;
      sum.add(std::sqrt(std::max(conformal_speed2(g, t), 0.0)) * jac * dtau);
    }
    return sum.value();
  };

  const double l_down = conformal_length(g0);
  const double l_up = conformal_length(g1);

  std::vector<detail::PencilCell> pencil = detail::make_pencil(g0.cells, g1.cells);
  const double l_mid = detail::graded_segment_length(
      [&](double sigma) {
        return detail::pencil_speed_squared(pencil, n, meas, sigma, &f_pow);
      },
      nodes);

  return l_down + l_mid + l_up;
}

struct SweepEntry {
  double s = 0.0;
  double smooth_width = 0.0;
  double length = 0.0;
};

/// Evaluate the bound over a geometric grid and return all entries; the
/// minimizing pair is the last word for reporting.
inline std::vector<SweepEntry> dist_upper_sweep(const MetricField& g0, const MetricField& g1,
                                                const CellMask& E, std::span<const double> s_values,
                                                std::span<const double> widths, int nodes = 257) {
  std::vector<SweepEntry> out;
  for (double w : widths)
    for (double s : s_values)
      out.push_back({s, w, dist_upper_smallvol(g0, g1, E, s, w, nodes)});
  return out;
}

inline SweepEntry sweep_minimum(const std::vector<SweepEntry>& entries) {
  if (entries.empty()) throw invalid_input("sweep_minimum: empty sweep");
  SweepEntry best = entries[0];
  for (const SweepEntry& e : entries)
    if (e.length < best.length) best = e;
  return best;
}

// ---------------------------------------------------------------------------
// Integrated pointwise distance bounds.
// ---------------------------------------------------------------------------

/// Interval containing Theta_Y(g0,g1) = integral over Y of theta_x(g0,g1):
/// cellwise theta_bounds against the identity reference, times cell_measure.
inline ThetaInterval theta_Y(const MetricField& g0, const MetricField& g1, const CellMask& Y,
                             const Tolerances& tol = default_tolerances()) {
  check_same_grid(g0.grid, g1.grid, "theta_Y");
  check_same_grid(g0.grid, Y.grid, "theta_Y");
  const SymTensor ref = SymTensor::identity(g0.grid.n);
  KahanSum lo, hi;
  for (std::size_t i = 0; i < g0.cells.size(); ++i) {
    if (!Y.bits[i]) continue;
    ThetaInterval t = theta_bounds(ref, g0.cells[i], g1.cells[i], tol);
    lo.add(t.lower * g0.grid.cell_measure);
    hi.add(t.upper * g0.grid.cell_measure);
  }
  return {lo.value(), hi.value()};
}

// ---------------------------------------------------------------------------
// Amenability report for a family of fields: uniform coefficient bound C,
// uniform minimal eigenvalue delta (against the identity reference), and an
// empirical norm-equivalence constant from random probes.
// ---------------------------------------------------------------------------

enum class AmenableKind { amenable, quasi_amenable, neither };

struct AmenableReport {
  AmenableKind kind = AmenableKind::neither;
  double coeff_bound = 0.0;       // C
  double min_eigenvalue = 0.0;    // delta
  double norm_equivalence = 1.0;  // empirical K
};

inline AmenableReport amenable_check(std::span<const MetricField> fields,
                                     double eps_delta = default_tolerances().eps_det,
                                     std::uint64_t probe_seed = 2026, int probes = 8) {
  if (fields.empty()) throw invalid_input("amenable_check: empty family");
  for (const MetricField& f : fields) check_same_grid(f.grid, fields[0].grid, "amenable_check");

  AmenableReport rep;
  double c = 0.0;
  double delta = std::numeric_limits<double>::infinity();
  bool finite = true;
  for (const MetricField& f : fields)
    for (const SymTensor& cell : f.cells) {
      if (!cell.finite()) finite = false;
      c = std::max(c, cell.max_abs());
      delta = std::min(delta, eig_sym(cell).val[0]);
    }
  rep.coeff_bound = c;
  rep.min_eigenvalue = delta;
  if (!finite || !std::isfinite(c))
    rep.kind = AmenableKind::neither;
  else if (delta > eps_delta)
    rep.kind = AmenableKind::amenable;
  else
    rep.kind = AmenableKind::quasi_amenable;

  std::mt19937_64 rng(probe_seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double k_hat = 1.0;
  for (int p = 0; p < probes; ++p) {
    TangentField h;
    h.grid = fields[0].grid;
    h.cells.resize(h.grid.cell_count(), SymTensor(h.grid.n));
    for (SymTensor& cell : h.cells) {
      cell = SymTensor(h.grid.n);
      for (double& e : cell.packed()) e = u(rng);
    }
    std::vector<double> norms(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) norms[i] = l2_norm(fields[i], h);
    for (std::size_t i = 0; i < fields.size(); ++i)
      for (std::size_t j = 0; j < fields.size(); ++j)
        if (norms[j] > 0.0) k_hat = std::max(k_hat, norms[i] / norms[j]);
  }
  rep.norm_equivalence = k_hat;
  return rep;
}

}  // namespace mspace
