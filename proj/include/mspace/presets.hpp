#pragma once

#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mspace/completion.hpp"
#include "mspace/field_ops.hpp"
#include "mspace/mfield_io.hpp"

namespace mspace {

// ---------------------------------------------------------------------------
// Preset experiments.  Each run is deterministic in (config, seed) and emits
// a machine-readable report (CSV or JSON) whose data rows carry a provenance
// tag (formula / quadrature / sweep) and whose checks carry explicit
// pass/fail columns.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string preset;  // eg2 | eg3 | tori | incompleteness | conformal | custom
  GridSpec grid = unit_torus(2, {64, 64});
  std::string format = "csv";  // csv | json
  std::uint64_t seed = 2026;

  double r = 1.0, s = 2.0;        // eg2 exponents
  double t_max = 40.0;            // eg2 horizon
  int t_samples = 400;            // eg2/incompleteness sampling
  int k_max = 200;                // eg3 prefix length
  double eps_det = 1e-2;          // eg3 deflation threshold
  double c_big = 1e8;             // eg3 unboundedness threshold
  double alpha = -2.0;            // incompleteness conformal coefficient
  double beta = 0.0;              // incompleteness traceless admixture
  double s_param = 1e-9;          // finest mollifier value of the tori sweep
  double smooth_width = 1.0;      // mask smoothing width (cells)
  double rho0 = 1.0, rho1 = 4.0;  // conformal factors
  std::string g0_file, g1_file, mask_file;  // custom preset inputs
  std::string dump_prefix;  // when set, presets write their fields/paths as .mfield files
};

struct CheckRow {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string provenance;  // formula | quadrature | sweep
};

struct PresetReport {
  std::string preset;
  nlohmann::json parameters;
  std::vector<std::string> data_header;
  std::vector<std::vector<double>> data_rows;
  std::string data_provenance;
  std::vector<CheckRow> checks;

  bool all_pass() const {
    for (const CheckRow& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

inline std::string render_csv(const PresetReport& rep) {
  std::string out;
  out += "# preset," + rep.preset + "\n";
  out += "# parameters," + rep.parameters.dump() + "\n";
  for (std::size_t i = 0; i < rep.data_header.size(); ++i)
    out += (i ? "," : "") + rep.data_header[i];
  out += ",provenance\n";
  for (const auto& row : rep.data_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::fmt_double(row[i]);
    out += "," + rep.data_provenance + "\n";
  }
  out += "# checks\n";
  out += "name,value,threshold,pass,provenance\n";
  for (const CheckRow& c : rep.checks)
    out += c.name + "," + detail::fmt_double(c.value) + "," + detail::fmt_double(c.threshold) +
           "," + (c.pass ? "1" : "0") + "," + c.provenance + "\n";
  return out;
}

inline std::string render_json(const PresetReport& rep) {
  nlohmann::json j;
  j["preset"] = rep.preset;
  j["parameters"] = rep.parameters;
  j["data_header"] = rep.data_header;
  j["data_provenance"] = rep.data_provenance;
  j["data"] = rep.data_rows;
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckRow& c : rep.checks)
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"pass", c.pass},
                      {"provenance", c.provenance}});
  j["checks"] = std::move(checks);
  return j.dump(2) + "\n";
}

inline std::string render_report(const PresetReport& rep, const std::string& format) {
  if (format == "json") return render_json(rep);
  if (format == "csv") return render_csv(rep);
  throw invalid_input("unknown output format: " + format);
}

// --- eg2: the diagonal exponential family with closed-form speed -----------

inline PresetReport run_eg2(const ExperimentConfig& cfg) {
  if (cfg.grid.n != 2) throw invalid_input("eg2: needs a two-dimensional torus");
  if (!(cfg.s > cfg.r)) throw invalid_input("eg2: requires s > r");
  if (cfg.t_samples < 2) throw invalid_input("eg2: needs at least 2 samples");
  PresetReport rep;
  rep.preset = "eg2";
  rep.parameters = {{"r", cfg.r}, {"s", cfg.s}, {"t_max", cfg.t_max},
                    {"t_samples", cfg.t_samples}, {"dims", cfg.grid.dims}};
  rep.data_header = {"t", "speed", "cumulative_length", "speed_formula", "rel_err"};
  rep.data_provenance = "quadrature";

  const double r = cfg.r, s = cfg.s;
  MetricField g_buf = constant_metric_field(cfg.grid, SymTensor::identity(2));
  TangentField h_buf = constant_tangent_field(cfg.grid, SymTensor(2));
  auto speed_measured = [&](double t) {
    const SymTensor g_val = SymTensor::diag({std::exp(s * t), std::exp(-r * t)});
    const SymTensor h_val = SymTensor::diag({s * std::exp(s * t), -r * std::exp(-r * t)});
    for (SymTensor& c : g_buf.cells) c = g_val;
    for (SymTensor& c : h_buf.cells) c = h_val;
    return l2_norm(g_buf, h_buf);
  };
  auto speed_formula = [&](double t) {
    return std::sqrt(r * r + s * s) * std::exp((s - r) * t / 4.0);
  };

  const int m = cfg.t_samples;
  double max_rel = 0.0;
  double cum = 0.0;
  double t_prev = 1.0;
  double v_prev = speed_measured(t_prev);
  for (int i = 0; i < m; ++i) {
    const double t = 1.0 + (cfg.t_max - 1.0) * i / (m - 1);
    double v = v_prev;
    if (i > 0) {
      v = speed_measured(t);
      const double vm = speed_measured(0.5 * (t_prev + t));
      cum += (t - t_prev) / 6.0 * (v_prev + 4.0 * vm + v);  // composite Simpson
    }
    const double vf = speed_formula(t);
    const double rel = std::abs(v - vf) / vf;
    max_rel = std::max(max_rel, rel);
    rep.data_rows.push_back({t, v, cum, vf, rel});
    t_prev = t;
    v_prev = v;
  }

  const double analytic = std::sqrt(r * r + s * s) * (4.0 / (s - r)) *
                          (std::exp((s - r) * cfg.t_max / 4.0) - std::exp((s - r) / 4.0));
  rep.checks.push_back({"max_speed_rel_err", max_rel, 1e-10, max_rel <= 1e-10, "formula"});
  const double len_rel = std::abs(cum - analytic) / analytic;
  rep.checks.push_back({"cumulative_length_rel_err", len_rel, 1e-6, len_rel <= 1e-6, "formula"});

  if (!cfg.dump_prefix.empty()) {
    MetricPath path;
    const int dump_samples = std::min(m, 33);
    for (int i = 0; i < dump_samples; ++i) {
      const double t = 1.0 + (cfg.t_max - 1.0) * i / (dump_samples - 1);
      path.times.push_back(t);
      path.fields.push_back(constant_metric_field(
          cfg.grid, SymTensor::diag({std::exp(s * t), std::exp(-r * t)})));
    }
    write_metric_path(cfg.dump_prefix + "_path.mfield", path);
  }
  return rep;
}

// --- eg3: oscillating determinants, omega limit zero ------------------------

inline PresetReport run_eg3(const ExperimentConfig& cfg) {
  if (cfg.grid.n != 2) throw invalid_input("eg3: needs a two-dimensional torus");
  if (cfg.k_max < 8) throw invalid_input("eg3: needs k_max >= 8");
  PresetReport rep;
  rep.preset = "eg3";
  rep.parameters = {{"k_max", cfg.k_max}, {"eps_det", cfg.eps_det}, {"c_big", cfg.c_big},
                    {"dims", cfg.grid.dims}};
  rep.data_header = {"k", "volume", "volume_formula", "rel_err"};
  rep.data_provenance = "quadrature";

  std::vector<MetricField> seq;
  seq.reserve(static_cast<std::size_t>(cfg.k_max));
  for (int k = 1; k <= cfg.k_max; ++k)
    seq.push_back(constant_metric_field(
        cfg.grid, SymTensor::diag({std::abs(std::cos(static_cast<double>(k))), 1.0 / k})));

  OmegaConfig ocfg;
  ocfg.eps_det = cfg.eps_det;
  ocfg.c_big = cfg.c_big;
  SequenceReport omega = omega_limit(seq, ocfg);

  double max_rel = 0.0;
  for (int k = 1; k <= cfg.k_max; ++k) {
    const double vol = omega.volume_trace[static_cast<std::size_t>(k - 1)];
    const double expect = std::sqrt(std::abs(std::cos(static_cast<double>(k))) / k);
    const double rel = std::abs(vol - expect) / expect;
    max_rel = std::max(max_rel, rel);
    rep.data_rows.push_back({static_cast<double>(k), vol, expect, rel});
  }

  const double cells = static_cast<double>(cfg.grid.cell_count());
  double omega_abs = 0.0;
  for (const SymTensor& c : omega.omega_limit.cells) omega_abs = std::max(omega_abs, c.max_abs());
  auto rows = volume_convergence_report(seq, omega.omega_limit,
                                        std::vector<CellMask>{omega.deflated});
  rep.checks.push_back({"deflated_cells", static_cast<double>(omega.deflated.count()), cells,
                        omega.deflated.count() == cfg.grid.cell_count(), "formula"});
  rep.checks.push_back({"unbounded_cells", static_cast<double>(omega.unbounded.count()), 0.0,
                        omega.unbounded.count() == 0, "formula"});
  rep.checks.push_back({"omega_limit_max_abs", omega_abs, 0.0, omega_abs == 0.0, "formula"});
  rep.checks.push_back({"volume_trace_max_rel_err", max_rel, 1e-12, max_rel <= 1e-12, "quadrature"});
  rep.checks.push_back({"deflated_volume_decays", rows[0].cor17_pass ? 1.0 : 0.0, 1.0,
                        rows[0].cor17_pass, "quadrature"});
  return rep;
}

// --- tori: the small-volume bound on the worked pair of flat tori -----------

inline PresetReport run_tori(const ExperimentConfig& cfg) {
  if (cfg.grid.n != 2) throw invalid_input("tori: needs a two-dimensional torus");
  PresetReport rep;
  rep.preset = "tori";
  rep.parameters = {{"s_param", cfg.s_param}, {"smooth_width", cfg.smooth_width},
                    {"dims", cfg.grid.dims}};
  rep.data_header = {"s", "smooth_width", "length"};
  rep.data_provenance = "sweep";

  MetricField g0 = constant_metric_field(cfg.grid, SymTensor::diag({10.0, 1e-5}));
  MetricField g1 = constant_metric_field(cfg.grid, SymTensor::diag({1e10, 1e-14}));
  CellMask all = mask_all(cfg.grid);

  const double vol0 = total_volume(g0);
  const double vol1 = total_volume(g1);
  const double bound = small_volume_constant(2) * (std::sqrt(vol0) + std::sqrt(vol1));

  std::vector<double> s_values;
  for (double s = 1e-1; s >= cfg.s_param * 0.999; s *= 0.1) s_values.push_back(s);
  std::vector<double> widths{cfg.smooth_width};
  auto sweep = dist_upper_sweep(g0, g1, all, s_values, widths);
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (const SweepEntry& e : sweep) {
    rep.data_rows.push_back({e.s, e.smooth_width, e.length});
    if (e.length > prev + 1e-9) monotone = false;
    prev = e.length;
  }
  const double best = sweep_minimum(sweep).length;

  rep.checks.push_back({"vol_g0", vol0, 0.01, std::abs(vol0 - 0.01) <= 1e-12, "formula"});
  rep.checks.push_back({"vol_g1", vol1, 0.01, std::abs(vol1 - 0.01) <= 1e-12, "formula"});
  rep.checks.push_back({"small_volume_bound", bound, 0.0, true, "formula"});
  rep.checks.push_back(
      {"min_sweep_length", best, 1.1 * bound, best <= 1.1 * bound, "sweep"});
  rep.checks.push_back({"monotone_in_s", monotone ? 1.0 : 0.0, 1.0, monotone, "sweep"});
  return rep;
}

// --- incompleteness: finite-length geodesic to the boundary -----------------

inline PresetReport run_incompleteness(const ExperimentConfig& cfg) {
  PresetReport rep;
  rep.preset = "incompleteness";
  rep.parameters = {{"alpha", cfg.alpha}, {"beta", cfg.beta}, {"t_samples", cfg.t_samples},
                    {"dims", cfg.grid.dims}};
  rep.data_header = {"t", "speed"};
  rep.data_provenance = "quadrature";

  MetricField g0 = constant_metric_field(cfg.grid, SymTensor::identity(cfg.grid.n));
  TangentField h;
  h.grid = cfg.grid;
  SymTensor dir = SymTensor::identity(cfg.grid.n) * cfg.alpha;
  if (cfg.beta != 0.0 && cfg.grid.n >= 2) {
    dir.at(0, 0) += cfg.beta;
    dir.at(1, 1) -= cfg.beta;
  }
  h.cells.assign(cfg.grid.cell_count(), dir);
  const double norm = l2_norm(g0, h);
  for (SymTensor& c : h.cells) c *= 1.0 / norm;

  const double sup = exp_domain_sup(g0, h);
  if (!std::isfinite(sup)) {
    rep.checks.push_back({"domain_sup_infinite", 1.0, 1.0, true, "formula"});
    return rep;
  }

  const double t_end = sup * (1.0 - 1e-4);
  MetricPath p;
  const int m = std::max(cfg.t_samples, 3);
  for (int i = 0; i < m; ++i) {
    p.times.push_back(t_end * i / (m - 1));
    p.fields.push_back(exp_field(g0, h, p.times.back()));
  }
  std::vector<double> speeds = path_speeds(p);
  for (int i = 0; i < m; ++i) rep.data_rows.push_back({p.times[static_cast<std::size_t>(i)],
                                                       speeds[static_cast<std::size_t>(i)]});
  const double len = path_length(p);
  const double rel = std::abs(len - sup) / sup;

  rep.checks.push_back({"domain_sup", sup, 0.0, std::isfinite(sup), "formula"});
  rep.checks.push_back({"unit_speed_norm", l2_norm(g0, h), 1.0,
                        std::abs(l2_norm(g0, h) - 1.0) <= 1e-12, "quadrature"});
  rep.checks.push_back(
      {"length_vs_domain_rel_err", rel, 1e-4, rel <= 1e-4 * (1.0 + 1e-9), "quadrature"});
  return rep;
}

// --- conformal: explicit distance on the orbit completion -------------------

inline PresetReport run_conformal(const ExperimentConfig& cfg) {
  PresetReport rep;
  rep.preset = "conformal";
  rep.parameters = {{"rho0", cfg.rho0}, {"rho1", cfg.rho1}, {"seed", cfg.seed},
                    {"dims", cfg.grid.dims}};
  rep.data_header = {"distance", "radial_quadrature", "residual"};
  rep.data_provenance = "formula";

  if (!(cfg.rho0 >= 0.0) || !(cfg.rho1 >= 0.0))
    throw invalid_input("conformal: factors must be nonnegative");
  MetricField g = constant_metric_field(cfg.grid, SymTensor::identity(cfg.grid.n));
  std::vector<double> rho0(cfg.grid.cell_count(), cfg.rho0);
  std::vector<double> rho1(cfg.grid.cell_count(), cfg.rho1);
  const double dist = conformal_distance(rho0, rho1, g);

  // straight-in-lambda radial path: constant speed sqrt(n) |Delta|_{L2(mu_g)}
  std::vector<double> la = psi_inv(rho0, g), lb = psi_inv(rho1, g);
  KahanSum d2;
  for (std::size_t i = 0; i < la.size(); ++i) {
    const double d = lb[i] - la[i];
    d2.add(d * d * std::sqrt(std::max(g.cells[i].det(), 0.0)) * cfg.grid.cell_measure);
  }
  const double radial = std::sqrt(static_cast<double>(cfg.grid.n)) * std::sqrt(d2.value());
  const double residual = std::abs(dist - radial) / std::max(1.0, radial);
  rep.data_rows.push_back({dist, radial, residual});

  rep.checks.push_back({"radial_residual", residual, 1e-10, residual <= 1e-10, "quadrature"});

  // metric axioms over seeded random factor fields
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  double sym_err = 0.0, tri_violation = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(cfg.grid.cell_count()), b(cfg.grid.cell_count()),
        c(cfg.grid.cell_count());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = u(rng), b[i] = u(rng), c[i] = u(rng);
    const double ab = conformal_distance(a, b, g);
    const double ba = conformal_distance(b, a, g);
    const double ac = conformal_distance(a, c, g);
    const double cb = conformal_distance(c, b, g);
    sym_err = std::max(sym_err, std::abs(ab - ba));
    tri_violation = std::max(tri_violation, ab - (ac + cb));
  }
  rep.checks.push_back({"symmetry_max_err", sym_err, 1e-10, sym_err <= 1e-10, "formula"});
  rep.checks.push_back(
      {"triangle_max_violation", tri_violation, 1e-10, tri_violation <= 1e-10, "formula"});
  return rep;
}

// --- custom: bounds for two user-provided fields -----------------------------

inline PresetReport run_custom(const ExperimentConfig& cfg) {
  if (cfg.g0_file.empty() || cfg.g1_file.empty())
    throw invalid_input("custom: --g0 and --g1 field files are required");
  MetricField g0 = read_metric_field(cfg.g0_file);
  MetricField g1 = read_metric_field(cfg.g1_file);
  check_same_grid(g0.grid, g1.grid, "custom");
  CellMask y = cfg.mask_file.empty()
                   ? mask_all(g0.grid)
                   : [&] {
                       nlohmann::json j = read_json_file(cfg.mask_file);
                       CellMask m;
                       m.grid = g0.grid;
                       for (int b : j.at("bits").get<std::vector<int>>())
                         m.bits.push_back(b ? 1 : 0);
                       if (m.bits.size() != m.grid.cell_count())
                         throw invalid_input("custom: mask size mismatch");
                       return m;
                     }();

  PresetReport rep;
  rep.preset = "custom";
  rep.parameters = {{"g0", cfg.g0_file}, {"g1", cfg.g1_file},
                    {"mask_cells", y.count()}, {"dims", g0.grid.dims}};
  rep.data_header = {"s", "smooth_width", "length"};
  rep.data_provenance = "sweep";

  const double vol0 = total_volume(g0);
  const double vol1 = total_volume(g1);
  ThetaInterval theta = theta_Y(g0, g1, y);
  std::vector<MetricField> fam{g0, g1};
  AmenableReport am = amenable_check(fam, default_tolerances().eps_det, cfg.seed);

  CellMask carrier = carrier_mask(g0, g1);
  std::vector<double> s_values;
  for (double s = 1e-1; s >= cfg.s_param * 0.999; s *= 0.1) s_values.push_back(s);
  std::vector<double> widths{0.0, cfg.smooth_width};
  auto sweep = dist_upper_sweep(g0, g1, carrier, s_values, widths);
  for (const SweepEntry& e : sweep) rep.data_rows.push_back({e.s, e.smooth_width, e.length});
  const double best = sweep.empty() ? 0.0 : sweep_minimum(sweep).length;

  rep.checks.push_back({"vol_g0", vol0, 0.0, true, "quadrature"});
  rep.checks.push_back({"vol_g1", vol1, 0.0, true, "quadrature"});
  rep.checks.push_back({"theta_lower", theta.lower, 0.0, true, "formula"});
  rep.checks.push_back({"theta_upper", theta.upper, 0.0, theta.lower <= theta.upper, "formula"});
  rep.checks.push_back({"dist_upper_min", best, 0.0, true, "sweep"});
  rep.checks.push_back({"amenable", am.kind == AmenableKind::amenable ? 1.0 : 0.0, 0.0, true,
                        "formula"});
  rep.checks.push_back({"norm_equivalence", am.norm_equivalence, 0.0, true, "formula"});
  return rep;
}

inline PresetReport run_preset(const ExperimentConfig& cfg) {
  if (cfg.preset == "eg2") return run_eg2(cfg);
  if (cfg.preset == "eg3") return run_eg3(cfg);
  if (cfg.preset == "tori") return run_tori(cfg);
  if (cfg.preset == "incompleteness") return run_incompleteness(cfg);
  if (cfg.preset == "conformal") return run_conformal(cfg);
  if (cfg.preset == "custom") return run_custom(cfg);
  throw invalid_input("unknown preset: " + cfg.preset);
}

}  // namespace mspace
