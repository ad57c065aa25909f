#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mspace/common.hpp"
#include "mspace/field_ops.hpp"
#include "mspace/grid.hpp"
#include "mspace/spd_point.hpp"
#include "mspace/sym_tensor.hpp"

namespace mspace {

// ---------------------------------------------------------------------------
// Deflated / unbounded sets of a sequence of metric fields and the omega
// limit machinery.  "Almost everywhere" degrades to "every cell" at grid
// resolution; omega limits store zeros on degenerate cells (the canonical
// representative).
// ---------------------------------------------------------------------------

struct DeflatedUnbounded {
  CellMask deflated;
  CellMask unbounded;
  std::vector<int> deflated_witness;   // first index k with det below eps_det (-1 if none)
  std::vector<int> unbounded_witness;  // first index k with an entry above c_big (-1 if none)
};

inline DeflatedUnbounded deflated_unbounded_sets(std::span<const MetricField> seq, double eps_det,
                                                 double c_big) {
  if (seq.empty()) throw invalid_input("deflated_unbounded_sets: empty sequence");
  for (const MetricField& f : seq) check_same_grid(f.grid, seq[0].grid, "deflated_unbounded_sets");
  const std::size_t cells = seq[0].grid.cell_count();
  DeflatedUnbounded out;
  out.deflated = mask_none(seq[0].grid);
  out.unbounded = mask_none(seq[0].grid);
  out.deflated_witness.assign(cells, -1);
  out.unbounded_witness.assign(cells, -1);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    for (std::size_t i = 0; i < cells; ++i) {
      if (out.deflated_witness[i] < 0 && seq[k].cells[i].det() < eps_det) {
        out.deflated.bits[i] = 1;
        out.deflated_witness[i] = static_cast<int>(k);
      }
      if (out.unbounded_witness[i] < 0 && seq[k].cells[i].max_abs() > c_big) {
        out.unbounded.bits[i] = 1;
        out.unbounded_witness[i] = static_cast<int>(k);
      }
    }
  }
  return out;
}

struct OmegaConfig {
  double eps_det = 1e-8;          // deflation threshold for masks and flags
  double c_big = 1e8;             // unboundedness threshold
  double tol_cauchy_field = 2.0;  // scale at which the tail window must be d-Cauchy
  ClassifyConfig point;           // pointwise classifier parameters
  int straight_nodes = 33;        // quadrature nodes for consecutive path uppers
};

struct not_cauchy_sequence : std::runtime_error {
  double certificate = 0.0;
  std::vector<double> step_uppers;
  not_cauchy_sequence(const std::string& what, double cert, std::vector<double> steps)
      : std::runtime_error(what), certificate(cert), step_uppers(std::move(steps)) {}
};

/// The omega limit stores zeros exactly on cells not classified as
/// converging (the canonical representative).  The deflated/unbounded masks
/// follow the min/max-over-the-prefix rule with witnesses; for a sequence
/// whose determinant dips below eps_det transiently and then stabilizes,
/// the mask over-approximates while the limit keeps the converged value.
struct SequenceReport {
  CellMask deflated;
  CellMask unbounded;
  SemiMetricField omega_limit;
  std::vector<PointClassification> per_cell;
  std::vector<double> volume_trace;       // Vol(M, g_k)
  std::vector<double> step_upper;         // certified upper bounds for d(g_k, g_{k+1})
  double cauchy_certificate = 0.0;        // certified tail-diameter upper bound
  OmegaConfig config;                     // echoed parameters
};

/// Certified upper bound for d(g_a, g_b): the smaller of the straight-line
/// quadrature length and the small-volume bound over the carrier of the
/// difference.
inline double dist_upper(const MetricField& a, const MetricField& b, int nodes = 33) {
  const double straight = straight_line_length(a, b, nodes);
  CellMask carrier = carrier_mask(a, b);
  const double c = small_volume_constant(a.grid.n);
  const double smallvol = c * (std::sqrt(volume(a, carrier)) + std::sqrt(volume(b, carrier)));
  return std::min(straight, smallvol);
}

/// Omega limit of a sequence of metric fields.  The sequence must pass the
/// Cauchy certificate (a sufficient condition built from certified distance
/// upper bounds); failing sequences raise not_cauchy_sequence with the
/// divergence evidence.
inline SequenceReport omega_limit(std::span<const MetricField> seq, const OmegaConfig& cfg = {}) {
  if (seq.empty()) throw invalid_input("omega_limit: empty sequence");
  for (const MetricField& f : seq) check_same_grid(f.grid, seq[0].grid, "omega_limit");
  const GridSpec& grid = seq[0].grid;
  const std::size_t cells = grid.cell_count();
  const std::size_t len = seq.size();

  SequenceReport rep;
  rep.config = cfg;

  rep.volume_trace.reserve(len);
  for (const MetricField& f : seq) rep.volume_trace.push_back(total_volume(f));

  rep.step_upper.reserve(len - 1);
  for (std::size_t k = 0; k + 1 < len; ++k)
    rep.step_upper.push_back(dist_upper(seq[k], seq[k + 1], cfg.straight_nodes));

  // Tail-window certificate: chained consecutive uppers vs. the
  // through-small-volume route.
  const std::size_t w_begin = len / 2;
  KahanSum chain;
  for (std::size_t k = w_begin; k + 1 < len; ++k) chain.add(rep.step_upper[k]);
  double max_sqrt_vol = 0.0;
  for (std::size_t k = w_begin; k < len; ++k)
    max_sqrt_vol = std::max(max_sqrt_vol, std::sqrt(std::max(rep.volume_trace[k], 0.0)));
  const double through_zero = 2.0 * small_volume_constant(grid.n) * max_sqrt_vol;
  rep.cauchy_certificate = std::min(chain.value(), through_zero);
  if (!(rep.cauchy_certificate <= cfg.tol_cauchy_field))
    throw not_cauchy_sequence("omega_limit: Cauchy certificate failed", rep.cauchy_certificate,
                              rep.step_upper);

  DeflatedUnbounded sets = deflated_unbounded_sets(seq, cfg.eps_det, cfg.c_big);
  rep.deflated = std::move(sets.deflated);
  rep.unbounded = std::move(sets.unbounded);

  ClassifyConfig pc = cfg.point;
  pc.eps_det = cfg.eps_det;
  const SymTensor ref = SymTensor::identity(grid.n);
  rep.per_cell.reserve(cells);
  std::vector<SymTensor> column(len);
  std::vector<SymTensor> omega_cells(cells, SymTensor(grid.n));
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t k = 0; k < len; ++k) column[k] = seq[k].cells[i];
    rep.per_cell.push_back(classify_point_sequence(column, ref, pc));
    if (rep.per_cell.back().kind == PointKind::Converges)
      omega_cells[i] = rep.per_cell.back().limit;
  }
  rep.omega_limit = make_semimetric(grid, std::move(omega_cells), cfg.eps_det);
  return rep;
}

/// Finite-resolution rendering of the semimetric equivalence relation:
/// identical degenerate masks and max-norm agreement on every
/// non-degenerate cell.
inline bool semimetric_equiv(const SemiMetricField& a, const SemiMetricField& b,
                             double eps_conv = 1e-6) {
  check_same_grid(a.grid, b.grid, "semimetric_equiv");
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    if (a.degenerate[i] != b.degenerate[i]) return false;
    if (a.degenerate[i]) continue;
    const double scale = std::max({1.0, a.cells[i].max_abs(), b.cells[i].max_abs()});
    if ((a.cells[i] - b.cells[i]).max_abs() > eps_conv * scale) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Volume convergence report.
// ---------------------------------------------------------------------------

struct VolumeReportRow {
  std::vector<double> volumes;  // Vol(Y, g_k)
  double limit_volume = 0.0;    // Vol(Y, limit)
  double final_residual = 0.0;  // |Vol(Y, g_last) - Vol(Y, limit)|
  bool vanishing_limit = false;
  bool cor17_pass = false;  // meaningful when vanishing_limit: volumes decay toward zero
};

inline std::vector<VolumeReportRow> volume_convergence_report(std::span<const MetricField> seq,
                                                              const SemiMetricField& limit,
                                                              std::span<const CellMask> masks,
                                                              double eps_vol = 1e-12) {
  if (seq.empty()) throw invalid_input("volume_convergence_report: empty sequence");
  check_same_grid(limit.grid, seq[0].grid, "volume_convergence_report");
  std::vector<VolumeReportRow> rows;
  rows.reserve(masks.size());
  for (const CellMask& y : masks) {
    check_same_grid(y.grid, seq[0].grid, "volume_convergence_report");
    VolumeReportRow row;
    row.volumes.reserve(seq.size());
    for (const MetricField& f : seq) row.volumes.push_back(volume(f, y));
    row.limit_volume = volume(limit, y);
    row.final_residual = std::abs(row.volumes.back() - row.limit_volume);
    row.vanishing_limit = row.limit_volume <= eps_vol;
    if (row.vanishing_limit) {
      const std::size_t len = row.volumes.size();
      const std::size_t q2 = len - len / 4;
      const std::size_t q1 = len - len / 2;
      double late = 0.0, early = 0.0;
      for (std::size_t k = q2; k < len; ++k) late = std::max(late, row.volumes[k]);
      for (std::size_t k = q1; k < q2; ++k) early = std::max(early, row.volumes[k]);
      if (q1 == q2) early = late;
      row.cor17_pass = late <= early * (1.0 + 1e-12) + 1e-300;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Conformal orbit: psi(lambda) = (1 + (n/4) lambda)^{4/n} g, its inverse,
// and the explicit distance on the orbit completion.
// ---------------------------------------------------------------------------

inline SemiMetricField psi(std::span<const double> lambda, const MetricField& g,
                           double eps_det = default_tolerances().eps_det) {
  check_field(g, "psi");
  if (lambda.size() != g.cells.size()) throw invalid_input("psi: scalar field size mismatch");
  const int n = g.grid.n;
  std::vector<SymTensor> cells(g.cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double base = 1.0 + 0.25 * n * lambda[i];
    if (base < 0.0)
      throw invalid_input("psi: lambda below -4/n at cell " + std::to_string(i));
    cells[i] = g.cells[i] * std::pow(base, 4.0 / n);
  }
  return make_semimetric(g.grid, std::move(cells), eps_det);
}

inline std::vector<double> psi_inv(std::span<const double> rho, const MetricField& g) {
  check_field(g, "psi_inv");
  if (rho.size() != g.cells.size()) throw invalid_input("psi_inv: scalar field size mismatch");
  const int n = g.grid.n;
  std::vector<double> lambda(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!(rho[i] >= 0.0))
      throw invalid_input("psi_inv: conformal factor negative at cell " + std::to_string(i));
    lambda[i] = (4.0 / n) * (std::pow(rho[i], 0.25 * n) - 1.0);
  }
  return lambda;
}

/// Distance on the completed conformal orbit through g:
///   d(rho0 g, rho1 g) = (4/sqrt(n)) | rho1^{n/4} - rho0^{n/4} |_{L2(mu_g)}.
inline double conformal_distance(std::span<const double> rho0, std::span<const double> rho1,
                                 const MetricField& g) {
  check_field(g, "conformal_distance");
  if (rho0.size() != g.cells.size() || rho1.size() != g.cells.size())
    throw invalid_input("conformal_distance: scalar field size mismatch");
  const int n = g.grid.n;
  KahanSum sum;
  for (std::size_t i = 0; i < rho0.size(); ++i) {
    if (!(rho0[i] >= 0.0) || !(rho1[i] >= 0.0))
      throw invalid_input("conformal_distance: negative conformal factor at cell " +
                          std::to_string(i));
    const double d = std::pow(rho1[i], 0.25 * n) - std::pow(rho0[i], 0.25 * n);
    sum.add(d * d * std::sqrt(std::max(g.cells[i].det(), 0.0)) * g.grid.cell_measure);
  }
  return (4.0 / std::sqrt(static_cast<double>(n))) * std::sqrt(std::max(sum.value(), 0.0));
}

/// Membership in the orbit completion: nonnegative at every cell with finite
/// L^{n/2} sum (the check guards against non-finite entries and negatives).
inline bool orbit_completion_member(std::span<const double> rho, const GridSpec& grid) {
  grid.validate();
  if (rho.size() != grid.cell_count()) return false;
  KahanSum sum;
  for (double r : rho) {
    if (!std::isfinite(r) || r < 0.0) return false;
    sum.add(std::pow(r, 0.5 * grid.n) * grid.cell_measure);
  }
  return std::isfinite(sum.value());
}

// ---------------------------------------------------------------------------
// Sharp-mask mixture and its distance bound.
// ---------------------------------------------------------------------------

struct MaskMixResult {
  SemiMetricField mixture;
  double bound = 0.0;            // C(n) (sqrt Vol(E,g0) + sqrt Vol(E,g1))
  double smoothed_length = 0.0;  // mollified-path quadrature length
  bool check_passed = false;     // smoothed_length <= 1.1 * bound
  double envelope_coeff_bound = 0.0;
};

inline MaskMixResult mask_mix(const MetricField& g0, const MetricField& g1, const CellMask& E,
                              double companion_s = 1e-9, double companion_width = 1.0,
                              int nodes = 257) {
  check_same_grid(g0.grid, g1.grid, "mask_mix");
  check_same_grid(g0.grid, E.grid, "mask_mix");

  MaskMixResult out;
  double c = 0.0;
  for (std::size_t i = 0; i < g0.cells.size(); ++i) {
    if (!g0.cells[i].finite() || !g1.cells[i].finite())
      throw invalid_input("mask_mix: non-finite entries breach the quasi-amenable envelope");
    c = std::max({c, g0.cells[i].max_abs(), g1.cells[i].max_abs()});
  }
  out.envelope_coeff_bound = c;

  std::vector<SymTensor> cells(g0.cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = E.bits[i] ? g1.cells[i] : g0.cells[i];
  out.mixture = make_semimetric(g0.grid, std::move(cells));

  const double cn = small_volume_constant(g0.grid.n);
  out.bound = cn * (std::sqrt(volume(g0, E)) + std::sqrt(volume(g1, E)));

  if (E.count() == 0) {
    out.smoothed_length = 0.0;
    out.check_passed = true;
    return out;
  }
  MetricField mix_metric = to_metric(out.mixture);
  out.smoothed_length = dist_upper_smallvol(g0, mix_metric, E, companion_s, companion_width, nodes);
  out.check_passed = out.smoothed_length <= 1.1 * out.bound;
  return out;
}

}  // namespace mspace
