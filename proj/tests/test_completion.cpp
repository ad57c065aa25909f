#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "mspace/completion.hpp"

using namespace mspace;

namespace {

SymTensor random_symmetric(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  SymTensor t(n);
  for (double& e : t.packed()) e = u(rng);
  return t;
}

SymTensor random_spd(std::mt19937_64& rng, int n, double shift = 0.5) {
  SymTensor s = random_symmetric(rng, n);
  detail::Mat m = detail::Mat::from_sym(s);
  return detail::symmetrize(detail::mul(m, m)) + SymTensor::identity(n) * shift;
}

MetricField random_metric_field(std::mt19937_64& rng, const GridSpec& grid, double shift = 0.5) {
  MetricField f;
  f.grid = grid;
  f.cells.reserve(grid.cell_count());
  for (std::size_t i = 0; i < grid.cell_count(); ++i) f.cells.push_back(random_spd(rng, grid.n, shift));
  return f;
}

// the oscillating-determinant torus family diag(|cos k|, 1/k)
std::vector<MetricField> oscillating_family(const GridSpec& grid, int k_max) {
  std::vector<MetricField> seq;
  for (int k = 1; k <= k_max; ++k)
    seq.push_back(constant_metric_field(
        grid, SymTensor::diag({std::abs(std::cos(static_cast<double>(k))), 1.0 / k})));
  return seq;
}

// diag(e^{r t}, e^{-s t}) sampled at integer times: deflates and blows up
std::vector<MetricField> exponential_family(const GridSpec& grid, double r, double s, int t_max) {
  std::vector<MetricField> seq;
  for (int t = 1; t <= t_max; ++t)
    seq.push_back(constant_metric_field(grid, SymTensor::diag({std::exp(r * t), std::exp(-s * t)})));
  return seq;
}

// identity on the left half of the torus, diag(1, e^{-k}) on the right half
std::vector<MetricField> half_torus_family(const GridSpec& grid, int k_max) {
  std::vector<MetricField> seq;
  const int cols = grid.dims[1];
  for (int k = 1; k <= k_max; ++k) {
    MetricField f;
    f.grid = grid;
    f.cells.reserve(grid.cell_count());
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      const int col = static_cast<int>(i) % cols;
      f.cells.push_back(col < cols / 2 ? SymTensor::identity(2)
                                       : SymTensor::diag({1.0, std::exp(-static_cast<double>(k))}));
    }
    seq.push_back(f);
  }
  return seq;
}

CellMask right_half(const GridSpec& grid) {
  CellMask m = mask_none(grid);
  const int cols = grid.dims[1];
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    if (static_cast<int>(i) % cols >= cols / 2) m.bits[i] = 1;
  return m;
}

}  // namespace

TEST_CASE("deflated and unbounded sets of the worked families") {
  GridSpec grid = unit_torus(2, {8, 8});
  {
    auto seq = oscillating_family(grid, 200);
    DeflatedUnbounded sets = deflated_unbounded_sets(seq, 1e-2, 1e8);
    CHECK(sets.deflated.count() == grid.cell_count());
    CHECK(sets.unbounded.count() == 0);
    for (int w : sets.deflated_witness) CHECK(w >= 0);
  }
  {
    std::vector<MetricField> seq;
    for (int k = 1; k <= 50; ++k)
      seq.push_back(constant_metric_field(grid, SymTensor::identity(2) * (1.0 + 1.0 / k)));
    DeflatedUnbounded sets = deflated_unbounded_sets(seq, 1e-8, 1e8);
    CHECK(sets.deflated.count() == 0);
    CHECK(sets.unbounded.count() == 0);
  }
  {
    auto seq = exponential_family(grid, 1.0, 2.0, 40);
    DeflatedUnbounded sets = deflated_unbounded_sets(seq, 1e-8, 1e8);
    CHECK(sets.deflated.count() == grid.cell_count());
    CHECK(sets.unbounded.count() == grid.cell_count());
  }
}

TEST_CASE("omega limit: oscillating family collapses to the zero class") {
  GridSpec grid = unit_torus(2, {8, 8});
  auto seq = oscillating_family(grid, 200);
  OmegaConfig cfg;
  cfg.eps_det = 1e-2;
  SequenceReport rep = omega_limit(seq, cfg);

  CHECK(rep.deflated.count() == grid.cell_count());
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    CHECK(rep.per_cell[i].kind == PointKind::Degenerates);
    CHECK(rep.omega_limit.cells[i].max_abs() == 0.0);
    CHECK(rep.omega_limit.degenerate[i] == 1);
  }
  // volume trace equals sqrt(|cos k| / k) on the unit torus
  for (int k = 1; k <= 200; ++k) {
    const double expect = std::sqrt(std::abs(std::cos(static_cast<double>(k))) / k);
    CHECK(rep.volume_trace[static_cast<std::size_t>(k - 1)] ==
          Catch::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("omega limit: convergent family and half-torus degeneration") {
  GridSpec grid = unit_torus(2, {8, 8});
  {
    std::vector<MetricField> seq;
    for (int k = 1; k <= 60; ++k)
      seq.push_back(constant_metric_field(grid, SymTensor::identity(2) * (1.0 + std::pow(2.0, -k))));
    SequenceReport rep = omega_limit(seq);
    CHECK(rep.deflated.count() == 0);
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      CHECK(rep.per_cell[i].kind == PointKind::Converges);
      CHECK((rep.omega_limit.cells[i] - SymTensor::identity(2)).max_abs() < 1e-9);
      CHECK(rep.omega_limit.degenerate[i] == 0);
    }
  }
  {
    auto seq = half_torus_family(grid, 120);
    SequenceReport rep = omega_limit(seq);
    CellMask right = right_half(grid);
    CHECK(rep.deflated.count() == right.count());
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      if (right.bits[i]) {
        CHECK(rep.deflated.bits[i] == 1);
        CHECK(rep.per_cell[i].kind == PointKind::Degenerates);
        CHECK(rep.omega_limit.degenerate[i] == 1);
      } else {
        CHECK(rep.per_cell[i].kind == PointKind::Converges);
        CHECK((rep.omega_limit.cells[i] - SymTensor::identity(2)).max_abs() < 1e-10);
      }
    }
  }
}

TEST_CASE("omega limit rejects sequences without a Cauchy certificate") {
  GridSpec grid = unit_torus(2, {4, 4});
  std::vector<MetricField> seq;
  for (int k = 0; k < 40; ++k)
    seq.push_back(
        constant_metric_field(grid, SymTensor::identity(2) * (k % 2 == 0 ? 1.0 : 2.0)));
  CHECK_THROWS_AS(omega_limit(seq), not_cauchy_sequence);
}

TEST_CASE("equivalence and distinguishability of omega limits") {
  GridSpec grid = unit_torus(2, {6, 6});

  // two everywhere-degenerate semimetrics are in the class of zero
  SemiMetricField zero = make_semimetric(grid, std::vector<SymTensor>(grid.cell_count(), SymTensor(2)));
  SemiMetricField rank1 = make_semimetric(
      grid, std::vector<SymTensor>(grid.cell_count(), SymTensor::diag({1.0, 0.0})));
  CHECK(semimetric_equiv(zero, rank1));
  CHECK(semimetric_equiv(zero, zero));

  SemiMetricField one = to_semimetric(constant_metric_field(grid, SymTensor::identity(2)));
  SemiMetricField two = to_semimetric(constant_metric_field(grid, SymTensor::identity(2) * 2.0));
  CHECK(!semimetric_equiv(one, two));
  CHECK(!semimetric_equiv(one, rank1));

  // interleaving of two certified-close sequences: equivalent omega limits
  std::vector<MetricField> interleaved;
  for (int k = 1; k <= 60; ++k) {
    const double a = 1.0 + std::pow(2.0, -k);
    const double b = 1.0 + 0.5 * std::pow(2.0, -k);
    interleaved.push_back(constant_metric_field(grid, SymTensor::identity(2) * (k % 2 ? a : b)));
  }
  SequenceReport rep = omega_limit(interleaved);
  SemiMetricField expect = to_semimetric(constant_metric_field(grid, SymTensor::identity(2)));
  CHECK(semimetric_equiv(rep.omega_limit, expect, 1e-6));

  // equivalent limits share the degenerate mask
  CHECK(rep.omega_limit.degenerate == expect.degenerate);

  // sequences with distinct limits keep a Theta lower certificate away from 0
  MetricField lim_a = constant_metric_field(grid, SymTensor::identity(2));
  MetricField lim_b = constant_metric_field(grid, SymTensor::identity(2) * 2.0);
  ThetaInterval gap = theta_Y(lim_a, lim_b, mask_all(grid));
  CHECK(gap.lower > 0.1);
}

TEST_CASE("per-cell dominated determinants along certified sequences") {
  GridSpec grid = unit_torus(2, {4, 4});
  auto seq = half_torus_family(grid, 60);
  SequenceReport rep = omega_limit(seq);
  const double sqrt_n_half = std::sqrt(2.0) / 2.0;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    const PointClassification& pc = rep.per_cell[i];
    const double base = std::sqrt(std::max(seq[0].cells[i].det(), 0.0));
    double running = 0.0;
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
      running += pc.step_upper[k];
      const double det_next = std::sqrt(std::max(seq[k + 1].cells[i].det(), 0.0));
      CHECK(det_next <= sqrt_n_half * running + base + 1e-9);
    }
  }
}

TEST_CASE("volume convergence report over the worked families") {
  GridSpec grid = unit_torus(2, {8, 8});
  {
    auto seq = oscillating_family(grid, 200);
    OmegaConfig cfg;
    cfg.eps_det = 1e-2;
    SequenceReport rep = omega_limit(seq, cfg);
    std::vector<CellMask> masks{mask_all(grid)};
    auto rows = volume_convergence_report(seq, rep.omega_limit, masks);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].limit_volume == 0.0);
    CHECK(rows[0].vanishing_limit);
    CHECK(rows[0].cor17_pass);
    CHECK(rows[0].volumes.back() ==
          Catch::Approx(std::sqrt(std::abs(std::cos(200.0)) / 200.0)).epsilon(1e-12));
  }
  {
    std::vector<MetricField> seq(20, constant_metric_field(grid, SymTensor::identity(2) * 3.0));
    SemiMetricField limit = to_semimetric(seq[0]);
    auto rows = volume_convergence_report(seq, limit, std::vector<CellMask>{mask_all(grid)});
    CHECK(rows[0].final_residual == Catch::Approx(0.0).margin(1e-14));
    CHECK(!rows[0].vanishing_limit);
  }
  {
    auto seq = half_torus_family(grid, 120);
    SequenceReport rep = omega_limit(seq);
    CellMask right = right_half(grid);
    CellMask left = complement(right);
    auto rows =
        volume_convergence_report(seq, rep.omega_limit, std::vector<CellMask>{right, left});
    CHECK(rows[0].vanishing_limit);
    CHECK(rows[0].cor17_pass);
    CHECK(rows[0].final_residual < 1e-8);
    CHECK(rows[1].limit_volume == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(rows[1].final_residual < 1e-8);
  }
}

TEST_CASE("conformal factor maps: round trips and boundary") {
  GridSpec grid = unit_torus(2, {8, 8});
  std::mt19937_64 rng(179);
  MetricField g = constant_metric_field(grid, SymTensor::identity(2));

  std::vector<double> zero_l(grid.cell_count(), 0.0);
  SemiMetricField same = psi(zero_l, g);
  for (std::size_t i = 0; i < same.cells.size(); ++i)
    CHECK((same.cells[i] - g.cells[i]).max_abs() < 1e-15);

  // dimension 2: conformal factor 9 comes from lambda = 4
  std::vector<double> rho9(grid.cell_count(), 9.0);
  std::vector<double> lam = psi_inv(rho9, g);
  for (double l : lam) CHECK(l == Catch::Approx(4.0).epsilon(1e-13));
  SemiMetricField nine = psi(lam, g);
  for (std::size_t i = 0; i < nine.cells.size(); ++i)
    CHECK((nine.cells[i] - g.cells[i] * 9.0).max_abs() < 1e-12);

  // random round trip
  std::uniform_real_distribution<double> u(0.1, 5.0);
  std::vector<double> rho(grid.cell_count());
  for (double& x : rho) x = u(rng);
  std::vector<double> back = psi_inv(rho, g);
  SemiMetricField f = psi(back, g);
  for (std::size_t i = 0; i < f.cells.size(); ++i)
    CHECK((f.cells[i] - g.cells[i] * rho[i]).max_abs() < 1e-12 * rho[i]);

  // boundary of the orbit: lambda = -4/n gives the zero field
  std::vector<double> lam_boundary(grid.cell_count(), -2.0);
  SemiMetricField boundary = psi(lam_boundary, g);
  for (std::size_t i = 0; i < boundary.cells.size(); ++i) {
    CHECK(boundary.cells[i].max_abs() == 0.0);
    CHECK(boundary.degenerate[i] == 1);
  }
  std::vector<double> lam_bad(grid.cell_count(), -2.5);
  CHECK_THROWS_AS(psi(lam_bad, g), invalid_input);
}

TEST_CASE("conformal segments match exponential-map geodesics after reparametrization") {
  // psi((1-t) kappa + t lambda) equals the pure-trace geodesic from
  // psi(kappa) with tangent (Delta / (1 + (n/4) kappa)) psi(kappa)
  GridSpec grid = unit_torus(2, {4, 4});
  std::mt19937_64 rng(193);
  MetricField g = random_metric_field(rng, grid, 0.8);
  std::uniform_real_distribution<double> u(-0.5, 2.0);
  std::vector<double> kappa(grid.cell_count()), lambda(grid.cell_count());
  for (std::size_t i = 0; i < kappa.size(); ++i) kappa[i] = u(rng), lambda[i] = u(rng);

  MetricField base = to_metric(psi(kappa, g));
  TangentField h;
  h.grid = grid;
  for (std::size_t i = 0; i < grid.cell_count(); ++i)
    h.cells.push_back(base.cells[i] *
                      ((lambda[i] - kappa[i]) / (1.0 + 0.5 * kappa[i])));

  for (double t : {0.25, 0.6, 1.0}) {
    std::vector<double> mix(grid.cell_count());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = (1.0 - t) * kappa[i] + t * lambda[i];
    SemiMetricField direct = psi(mix, g);
    MetricField via_exp = exp_field(base, h, t);
    for (std::size_t i = 0; i < grid.cell_count(); ++i)
      CHECK((direct.cells[i] - via_exp.cells[i]).max_abs() <
            1e-11 * (1.0 + direct.cells[i].max_abs()));
  }
}

TEST_CASE("conformal distance: frozen value, radial quadrature oracle, metric axioms") {
  GridSpec grid = unit_torus(2, {8, 8});
  MetricField g = constant_metric_field(grid, SymTensor::identity(2));
  std::vector<double> rho1(grid.cell_count(), 1.0);
  std::vector<double> rho4(grid.cell_count(), 4.0);

  CHECK(conformal_distance(rho1, rho1, g) == 0.0);
  const double d14 = conformal_distance(rho1, rho4, g);
  CHECK(d14 == Catch::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-13));

  // the straight-in-lambda path has constant speed sqrt(n) |Delta|; its
  // trapezoid length is an independent oracle for the distance
  auto radial_length = [&](const std::vector<double>& ra, const std::vector<double>& rb) {
    std::vector<double> la = psi_inv(ra, g), lb = psi_inv(rb, g);
    const int steps = 64;
    double len = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      std::vector<double> lt(la.size());
      for (std::size_t j = 0; j < la.size(); ++j) lt[j] = la[j] + t * (lb[j] - la[j]);
      // speed^2 = sum over cells of n Delta^2 (1+c)^{-2} * (1+c)^2 dmu = n |Delta|^2
      KahanSum sp;
      for (std::size_t j = 0; j < la.size(); ++j) {
        const double delta = lb[j] - la[j];
        sp.add(2.0 * delta * delta * grid.cell_measure);
      }
      len += ((i == 0 || i == steps) ? 0.5 : 1.0) * std::sqrt(sp.value()) / steps;
    }
    return len;
  };
  CHECK(d14 == Catch::Approx(radial_length(rho1, rho4)).epsilon(1e-10));

  // triangle along one radial direction is tight: d(1,4) + d(4,9) = d(1,9)
  std::vector<double> rho9(grid.cell_count(), 9.0);
  const double d49 = conformal_distance(rho4, rho9, g);
  const double d19 = conformal_distance(rho1, rho9, g);
  CHECK(d14 + d49 == Catch::Approx(d19).epsilon(1e-12));
  CHECK(d19 == Catch::Approx(4.0 * std::sqrt(2.0)).epsilon(1e-13));

  // axioms over random nonnegative factor fields
  std::mt19937_64 rng(181);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> a(grid.cell_count()), b(grid.cell_count()), c(grid.cell_count());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = u(rng), b[i] = u(rng), c[i] = u(rng);
    const double ab = conformal_distance(a, b, g);
    const double ba = conformal_distance(b, a, g);
    const double ac = conformal_distance(a, c, g);
    const double cb = conformal_distance(c, b, g);
    CHECK(ab == Catch::Approx(ba).margin(1e-12));
    CHECK(ab <= ac + cb + 1e-10);
  }
}

TEST_CASE("orbit completion membership") {
  GridSpec grid = unit_torus(2, {4, 4});
  std::vector<double> ok(grid.cell_count(), 2.5);
  CHECK(orbit_completion_member(ok, grid));
  std::vector<double> zero(grid.cell_count(), 0.0);
  CHECK(orbit_completion_member(zero, grid));
  std::vector<double> neg = ok;
  neg[3] = -1e-9;
  CHECK(!orbit_completion_member(neg, grid));
  std::vector<double> inf = ok;
  inf[5] = std::numeric_limits<double>::infinity();
  CHECK(!orbit_completion_member(inf, grid));
}

TEST_CASE("mask mixtures and the sharp-mask distance bound") {
  GridSpec grid = unit_torus(2, {16, 16});
  MetricField g0 = constant_metric_field(grid, SymTensor::diag({10.0, 1e-5}));
  MetricField g1 = constant_metric_field(grid, SymTensor::diag({1e10, 1e-14}));

  {
    MaskMixResult r = mask_mix(g0, g1, mask_all(grid));
    for (std::size_t i = 0; i < r.mixture.cells.size(); ++i)
      CHECK((r.mixture.cells[i] - g1.cells[i]).max_abs() == 0.0);
    CHECK(r.bound ==
          Catch::Approx(small_volume_constant(2) * 0.2).epsilon(1e-12));
    CHECK(r.check_passed);
    CHECK(r.smoothed_length <= 1.1 * r.bound);
  }
  {
    MaskMixResult r = mask_mix(g0, g1, mask_none(grid));
    for (std::size_t i = 0; i < r.mixture.cells.size(); ++i)
      CHECK((r.mixture.cells[i] - g0.cells[i]).max_abs() == 0.0);
    CHECK(r.check_passed);
    CHECK(r.smoothed_length == 0.0);
  }
  {
    std::mt19937_64 rng(191);
    MetricField a = random_metric_field(rng, grid);
    MetricField b = random_metric_field(rng, grid);
    CellMask e = mask_none(grid);
    for (std::size_t i = 0; i < e.bits.size(); ++i) e.bits[i] = (i % 16) < 8;
    MaskMixResult r = mask_mix(a, b, e);
    for (std::size_t i = 0; i < e.bits.size(); ++i)
      CHECK((r.mixture.cells[i] - (e.bits[i] ? b.cells[i] : a.cells[i])).max_abs() == 0.0);
    CHECK(r.bound > 0.0);
    CHECK(std::isfinite(r.smoothed_length));
  }
}
