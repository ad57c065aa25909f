#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "mspace/mfield_io.hpp"
#include "mspace/presets.hpp"

using namespace mspace;

namespace {

MetricField random_metric_field(std::mt19937_64& rng, const GridSpec& grid) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MetricField f;
  f.grid = grid;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    SymTensor s(grid.n);
    for (double& e : s.packed()) e = u(rng);
    detail::Mat m = detail::Mat::from_sym(s);
    f.cells.push_back(detail::symmetrize(detail::mul(m, m)) +
                      SymTensor::identity(grid.n) * 0.4);
  }
  return f;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p) : path(p) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("mfield round trip preserves fields bit-exactly") {
  std::mt19937_64 rng(211);
  for (int n = 1; n <= 3; ++n) {
    std::vector<int> dims(static_cast<std::size_t>(n), 4);
    GridSpec grid = unit_torus(n, dims);
    MetricField f = random_metric_field(rng, grid);
    nlohmann::json j = field_to_json(f);
    MetricField back = metric_field_from_json(j);
    CHECK(back.grid == f.grid);
    for (std::size_t i = 0; i < f.cells.size(); ++i)
      for (int k = 0; k < f.cells[i].packed_size(); ++k)
        CHECK(back.cells[i].packed()[static_cast<std::size_t>(k)] ==
              f.cells[i].packed()[static_cast<std::size_t>(k)]);
  }
}

TEST_CASE("mfield schema carries the documented keys") {
  GridSpec grid = unit_torus(2, {2, 3});
  MetricField f = constant_metric_field(grid, SymTensor::diag({2.0, 5.0}));
  nlohmann::json j = field_to_json(f);
  CHECK(j["version"] == 1);
  CHECK(j["n"] == 2);
  CHECK(j["dims"] == nlohmann::json({2, 3}));
  CHECK(j["cell_measure"].get<double>() == Catch::Approx(1.0 / 6.0));
  CHECK(j["data"].size() == 6 * 3);  // cells x upper-triangle entries
  // upper triangle row-major within a cell
  CHECK(j["data"][0].get<double>() == 2.0);
  CHECK(j["data"][1].get<double>() == 0.0);
  CHECK(j["data"][2].get<double>() == 5.0);

  nlohmann::json bad = j;
  bad["version"] = 2;
  CHECK_THROWS_AS(metric_field_from_json(bad), invalid_input);
  bad = j;
  bad["data"] = std::vector<double>{1.0};
  CHECK_THROWS_AS(metric_field_from_json(bad), invalid_input);
}

TEST_CASE("path files and disk round trips") {
  std::mt19937_64 rng(223);
  GridSpec grid = unit_torus(2, {3, 3});
  MetricPath p;
  for (int i = 0; i < 4; ++i) {
    p.times.push_back(0.5 * i);
    p.fields.push_back(random_metric_field(rng, grid));
  }
  nlohmann::json j = path_to_json(p);
  MetricPath back = path_from_json(j);
  CHECK(back.times == p.times);
  REQUIRE(back.fields.size() == p.fields.size());
  for (std::size_t i = 0; i < p.fields.size(); ++i)
    for (std::size_t c = 0; c < p.fields[i].cells.size(); ++c)
      CHECK((back.fields[i].cells[c] - p.fields[i].cells[c]).max_abs() == 0.0);

  TempFile tmp("io_test_field.mfield");
  write_metric_field(tmp.path, p.fields[0]);
  MetricField from_disk = read_metric_field(tmp.path);
  for (std::size_t c = 0; c < p.fields[0].cells.size(); ++c)
    CHECK((from_disk.cells[c] - p.fields[0].cells[c]).max_abs() == 0.0);
  CHECK_THROWS_AS(read_metric_field("no_such_file.mfield"), invalid_input);
}

TEST_CASE("sequence reports serialize with masks and evidence") {
  GridSpec grid = unit_torus(2, {3, 3});
  std::vector<MetricField> seq;
  for (int k = 1; k <= 40; ++k)
    seq.push_back(constant_metric_field(grid, SymTensor::identity(2) * (1.0 + std::pow(2.0, -k))));
  SequenceReport rep = omega_limit(seq);
  nlohmann::json j = report_to_json(rep);
  CHECK(j["deflated"]["bits"].size() == grid.cell_count());
  CHECK(j["volume_trace"].size() == seq.size());
  CHECK(j["per_cell"].size() == grid.cell_count());
  CHECK(j["parameters"].contains("eps_det"));
  CHECK(j["per_cell"][0]["kind"] == "converges");
}

TEST_CASE("presets are deterministic and render both formats") {
  ExperimentConfig cfg;
  cfg.preset = "conformal";
  cfg.grid = unit_torus(2, {8, 8});
  cfg.seed = 99;
  PresetReport r1 = run_preset(cfg);
  PresetReport r2 = run_preset(cfg);
  CHECK(render_csv(r1) == render_csv(r2));
  CHECK(render_json(r1) == render_json(r2));
  CHECK(r1.all_pass());

  // different seed changes only the sweep outcomes, not determinism
  cfg.seed = 100;
  PresetReport r3 = run_preset(cfg);
  CHECK(render_csv(r3) == render_csv(run_preset(cfg)));

  CHECK_THROWS_AS(render_report(r1, "yaml"), invalid_input);
}

TEST_CASE("eg2 preset matches its closed forms") {
  ExperimentConfig cfg;
  cfg.preset = "eg2";
  cfg.grid = unit_torus(2, {8, 8});
  cfg.r = 1.0;
  cfg.s = 2.0;
  cfg.t_max = 10.0;
  cfg.t_samples = 200;
  PresetReport rep = run_preset(cfg);
  CHECK(rep.all_pass());
  const std::string csv = render_csv(rep);
  CHECK(csv.find("max_speed_rel_err") != std::string::npos);
  CHECK(csv.find("cumulative_length_rel_err") != std::string::npos);
}

TEST_CASE("tori preset reproduces the worked volumes and bound") {
  ExperimentConfig cfg;
  cfg.preset = "tori";
  cfg.grid = unit_torus(2, {16, 16});
  PresetReport rep = run_preset(cfg);
  CHECK(rep.all_pass());
  double bound = 0.0;
  for (const CheckRow& c : rep.checks)
    if (c.name == "small_volume_bound") bound = c.value;
  CHECK(bound == Catch::Approx(small_volume_constant(2) * 0.2).epsilon(1e-12));
}

TEST_CASE("incompleteness preset: finite and infinite regimes") {
  ExperimentConfig cfg;
  cfg.preset = "incompleteness";
  cfg.grid = unit_torus(2, {8, 8});
  cfg.t_samples = 201;
  PresetReport finite = run_preset(cfg);
  CHECK(finite.all_pass());

  cfg.beta = 0.5;  // traceless admixture removes the finite-time boundary
  PresetReport infinite = run_preset(cfg);
  CHECK(infinite.all_pass());
  bool saw_infinite = false;
  for (const CheckRow& c : infinite.checks) saw_infinite |= (c.name == "domain_sup_infinite");
  CHECK(saw_infinite);
}

TEST_CASE("custom preset consumes mfield files") {
  GridSpec grid = unit_torus(2, {6, 6});
  std::mt19937_64 rng(227);
  TempFile f0("custom_g0.mfield"), f1("custom_g1.mfield");
  write_metric_field(f0.path, random_metric_field(rng, grid));
  write_metric_field(f1.path, random_metric_field(rng, grid));

  ExperimentConfig cfg;
  cfg.preset = "custom";
  cfg.grid = grid;
  cfg.g0_file = f0.path;
  cfg.g1_file = f1.path;
  cfg.s_param = 1e-4;
  PresetReport rep = run_preset(cfg);
  CHECK(rep.all_pass());
  double lo = -1.0, hi = -2.0;
  for (const CheckRow& c : rep.checks) {
    if (c.name == "theta_lower") lo = c.value;
    if (c.name == "theta_upper") hi = c.value;
  }
  CHECK(lo >= 0.0);
  CHECK(lo <= hi);

  ExperimentConfig missing = cfg;
  missing.g0_file.clear();
  CHECK_THROWS_AS(run_preset(missing), invalid_input);
}
