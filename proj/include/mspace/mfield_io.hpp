#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mspace/common.hpp"
#include "mspace/completion.hpp"
#include "mspace/grid.hpp"

namespace mspace {

// ---------------------------------------------------------------------------
// ".mfield" files: a single JSON document
//   {"version":1, "n":N, "dims":[d1,...], "cell_measure":x, "data":[...]}
// with `data` row-major over cells, n(n+1)/2 numbers per cell (upper
// triangle, row-major within a cell).  A path file is
//   {"version":1, "times":[...], "fields":[<inline field objects>]}.
// ---------------------------------------------------------------------------

inline nlohmann::json field_to_json(const GridSpec& grid, const std::vector<SymTensor>& cells) {
  nlohmann::json j;
  j["version"] = 1;
  j["n"] = grid.n;
  j["dims"] = grid.dims;
  j["cell_measure"] = grid.cell_measure;
  std::vector<double> data;
  data.reserve(cells.size() * static_cast<std::size_t>(SymTensor::packed_size(grid.n)));
  for (const SymTensor& c : cells)
    for (double v : c.packed()) data.push_back(v);
  j["data"] = std::move(data);
  return j;
}

inline nlohmann::json field_to_json(const MetricField& f) { return field_to_json(f.grid, f.cells); }
inline nlohmann::json field_to_json(const SemiMetricField& f) {
  return field_to_json(f.grid, f.cells);
}

struct RawField {
  GridSpec grid;
  std::vector<SymTensor> cells;
};

inline RawField field_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version") || j["version"].get<int>() != 1)
    throw invalid_input("mfield: missing or unsupported version");
  RawField f;
  f.grid.n = j.at("n").get<int>();
  f.grid.dims = j.at("dims").get<std::vector<int>>();
  f.grid.cell_measure = j.at("cell_measure").get<double>();
  f.grid.validate();
  const std::vector<double> data = j.at("data").get<std::vector<double>>();
  const std::size_t per_cell = static_cast<std::size_t>(SymTensor::packed_size(f.grid.n));
  if (data.size() != f.grid.cell_count() * per_cell)
    throw invalid_input("mfield: data length does not match grid");
  f.cells.reserve(f.grid.cell_count());
  for (std::size_t i = 0; i < f.grid.cell_count(); ++i)
    f.cells.push_back(
        SymTensor::from_packed(f.grid.n, {data.data() + i * per_cell, per_cell}));
  return f;
}

inline MetricField metric_field_from_json(const nlohmann::json& j,
                                          const Tolerances& tol = default_tolerances()) {
  RawField raw = field_from_json(j);
  MetricField f;
  f.grid = std::move(raw.grid);
  f.cells = std::move(raw.cells);
  check_positive_definite(f, tol);
  return f;
}

inline SemiMetricField semimetric_field_from_json(const nlohmann::json& j,
                                                  double eps_det = default_tolerances().eps_det) {
  RawField raw = field_from_json(j);
  return make_semimetric(raw.grid, std::move(raw.cells), eps_det);
}

inline nlohmann::json path_to_json(const MetricPath& p) {
  nlohmann::json j;
  j["version"] = 1;
  j["times"] = p.times;
  nlohmann::json fields = nlohmann::json::array();
  for (const MetricField& f : p.fields) fields.push_back(field_to_json(f));
  j["fields"] = std::move(fields);
  return j;
}

inline MetricPath path_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version") || j["version"].get<int>() != 1)
    throw invalid_input("mfield path: missing or unsupported version");
  MetricPath p;
  p.times = j.at("times").get<std::vector<double>>();
  for (const nlohmann::json& fj : j.at("fields")) p.fields.push_back(metric_field_from_json(fj));
  if (p.times.size() != p.fields.size() || p.times.size() < 2)
    throw invalid_input("mfield path: need matching times and >= 2 samples");
  return p;
}

inline nlohmann::json mask_to_json(const CellMask& m) {
  nlohmann::json j;
  j["dims"] = m.grid.dims;
  std::vector<int> bits(m.bits.begin(), m.bits.end());
  j["bits"] = std::move(bits);
  return j;
}

inline nlohmann::json report_to_json(const SequenceReport& rep) {
  nlohmann::json j;
  j["deflated"] = mask_to_json(rep.deflated);
  j["unbounded"] = mask_to_json(rep.unbounded);
  j["omega_limit"] = field_to_json(rep.omega_limit);
  {
    std::vector<int> flags(rep.omega_limit.degenerate.begin(), rep.omega_limit.degenerate.end());
    j["omega_limit_degenerate"] = std::move(flags);
  }
  j["volume_trace"] = rep.volume_trace;
  j["step_upper"] = rep.step_upper;
  j["cauchy_certificate"] = rep.cauchy_certificate;
  j["parameters"] = {{"eps_det", rep.config.eps_det},
                     {"c_big", rep.config.c_big},
                     {"tol_cauchy_field", rep.config.tol_cauchy_field},
                     {"tol_cauchy_point", rep.config.point.tol_cauchy},
                     {"eps_conv", rep.config.point.eps_conv}};
  nlohmann::json cells = nlohmann::json::array();
  for (const PointClassification& c : rep.per_cell) {
    nlohmann::json cj;
    cj["kind"] = c.kind == PointKind::Converges
                     ? "converges"
                     : (c.kind == PointKind::Degenerates ? "degenerates" : "not_cauchy");
    cj["cauchy_upper"] = c.cauchy_upper;
    cj["divergence_lower"] = c.divergence_lower;
    cells.push_back(std::move(cj));
  }
  j["per_cell"] = std::move(cells);
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw invalid_input("write failed: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void write_metric_field(const std::string& path, const MetricField& f) {
  write_json_file(path, field_to_json(f));
}

inline MetricField read_metric_field(const std::string& path) {
  return metric_field_from_json(read_json_file(path));
}

inline void write_metric_path(const std::string& path, const MetricPath& p) {
  write_json_file(path, path_to_json(p));
}

inline MetricPath read_metric_path(const std::string& path) {
  return path_from_json(read_json_file(path));
}

}  // namespace mspace
