#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <vector>

#include "mspace/common.hpp"
#include "mspace/sym_tensor.hpp"

namespace mspace {

/// Cell layout of a periodic flat n-torus with the identity reference
/// metric.  `dims` holds per-axis cell counts, `cell_measure` the product of
/// the spacings; cells are addressed row-major (last axis fastest).
struct GridSpec {
  int n = 0;
  std::vector<int> dims;
  double cell_measure = 1.0;

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (int d : dims) c *= static_cast<std::size_t>(d);
    return c;
  }
  bool operator==(const GridSpec& o) const {
    return n == o.n && dims == o.dims && cell_measure == o.cell_measure;
  }
  bool operator!=(const GridSpec& o) const { return !(*this == o); }

  void validate() const {
    if (n < 1 || n > SymTensor::max_dim) throw invalid_input("GridSpec: dimension must be in [1,4]");
    if (dims.size() != static_cast<std::size_t>(n)) throw invalid_input("GridSpec: dims size != n");
    for (int d : dims)
      if (d < 1) throw invalid_input("GridSpec: axis cell count must be >= 1");
    if (!(cell_measure > 0.0)) throw invalid_input("GridSpec: cell_measure must be positive");
  }
};

/// Unit torus [0,1)^n split into dims[i] cells per axis.
inline GridSpec unit_torus(int n, std::vector<int> dims) {
  GridSpec g;
  g.n = n;
  g.dims = std::move(dims);
  double m = 1.0;
  for (int d : g.dims) m /= static_cast<double>(d);
  g.cell_measure = m;
  g.validate();
  return g;
}

struct MetricField {
  GridSpec grid;
  std::vector<SymTensor> cells;
};

struct TangentField {
  GridSpec grid;
  std::vector<SymTensor> cells;
};

/// Grid of positive semidefinite values; `degenerate[i]` is set exactly when
/// det(cell) < eps_det in reference coordinates.
struct SemiMetricField {
  GridSpec grid;
  std::vector<SymTensor> cells;
  std::vector<std::uint8_t> degenerate;
};

struct CellMask {
  GridSpec grid;
  std::vector<std::uint8_t> bits;

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : bits) c += (b != 0);
    return c;
  }
};

struct MetricPath {
  std::vector<double> times;
  std::vector<MetricField> fields;
};

template <class Field>
void check_field(const Field& f, const char* what) {
  f.grid.validate();
  if (f.cells.size() != f.grid.cell_count()) throw invalid_input(std::string(what) + ": cell count mismatch");
  for (const SymTensor& c : f.cells)
    if (c.dim() != f.grid.n) throw invalid_input(std::string(what) + ": cell dimension mismatch");
}

inline void check_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (a != b) throw invalid_input(std::string(what) + ": grid mismatch");
}

inline MetricField constant_metric_field(const GridSpec& grid, const SymTensor& value) {
  MetricField f;
  f.grid = grid;
  f.cells.assign(grid.cell_count(), value);
  return f;
}

inline TangentField constant_tangent_field(const GridSpec& grid, const SymTensor& value) {
  TangentField f;
  f.grid = grid;
  f.cells.assign(grid.cell_count(), value);
  return f;
}

inline TangentField zero_tangent_field(const GridSpec& grid) {
  return constant_tangent_field(grid, SymTensor(grid.n));
}

/// Validate that every cell is positive definite (throws with the first
/// offending cell index).
inline void check_positive_definite(const MetricField& f,
                                    const Tolerances& tol = default_tolerances()) {
  check_field(f, "MetricField");
  for (std::size_t i = 0; i < f.cells.size(); ++i)
    if (!is_positive_definite(f.cells[i], tol.eps_eig_rel))
      throw invalid_input("MetricField: cell " + std::to_string(i) + " is not positive definite");
}

inline SemiMetricField make_semimetric(const GridSpec& grid, std::vector<SymTensor> cells,
                                       double eps_det = default_tolerances().eps_det) {
  SemiMetricField f;
  f.grid = grid;
  f.cells = std::move(cells);
  check_field(f, "SemiMetricField");
  f.degenerate.resize(f.cells.size());
  for (std::size_t i = 0; i < f.cells.size(); ++i) {
    if (!is_positive_semidefinite(f.cells[i]))
      throw invalid_input("SemiMetricField: cell " + std::to_string(i) + " is not positive semidefinite");
    f.degenerate[i] = f.cells[i].det() < eps_det ? 1 : 0;
  }
  return f;
}

inline SemiMetricField to_semimetric(const MetricField& f,
                                     double eps_det = default_tolerances().eps_det) {
  return make_semimetric(f.grid, f.cells, eps_det);
}

/// Throws unless no cell is flagged degenerate.
inline MetricField to_metric(const SemiMetricField& f) {
  for (std::size_t i = 0; i < f.degenerate.size(); ++i)
    if (f.degenerate[i])
      throw invalid_input("to_metric: cell " + std::to_string(i) + " is degenerate");
  MetricField m;
  m.grid = f.grid;
  m.cells = f.cells;
  return m;
}

inline CellMask mask_all(const GridSpec& grid) {
  CellMask m;
  m.grid = grid;
  m.bits.assign(grid.cell_count(), 1);
  return m;
}

inline CellMask mask_none(const GridSpec& grid) {
  CellMask m;
  m.grid = grid;
  m.bits.assign(grid.cell_count(), 0);
  return m;
}

/// Cells where two fields differ by more than eps (max-norm): the carrier of
/// g1 - g0 at grid resolution.
inline CellMask carrier_mask(const MetricField& a, const MetricField& b, double eps = 0.0) {
  check_same_grid(a.grid, b.grid, "carrier_mask");
  CellMask m = mask_none(a.grid);
  for (std::size_t i = 0; i < a.cells.size(); ++i)
    if ((a.cells[i] - b.cells[i]).max_abs() > eps) m.bits[i] = 1;
  return m;
}

namespace detail {

inline void index_to_coords(const GridSpec& g, std::size_t idx, std::span<int> coords) {
  for (int axis = g.n - 1; axis >= 0; --axis) {
    const int d = g.dims[static_cast<std::size_t>(axis)];
    coords[static_cast<std::size_t>(axis)] = static_cast<int>(idx % static_cast<std::size_t>(d));
    idx /= static_cast<std::size_t>(d);
  }
}

inline std::size_t coords_to_index(const GridSpec& g, std::span<const int> coords) {
  std::size_t idx = 0;
  for (int axis = 0; axis < g.n; ++axis) {
    const int d = g.dims[static_cast<std::size_t>(axis)];
    int c = coords[static_cast<std::size_t>(axis)] % d;
    if (c < 0) c += d;
    idx = idx * static_cast<std::size_t>(d) + static_cast<std::size_t>(c);
  }
  return idx;
}

}  // namespace detail

/// Chebyshev distance (in cells, periodic) from each cell to the nearest set
/// cell of `mask`; set cells get 0.  Cells unreachable (empty mask) get a
/// large sentinel.
inline std::vector<int> chebyshev_distance_to(const CellMask& mask) {
  const GridSpec& g = mask.grid;
  const std::size_t total = g.cell_count();
  const int unreachable = std::numeric_limits<int>::max() / 2;
  std::vector<int> dist(total, unreachable);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < total; ++i)
    if (mask.bits[i]) {
      dist[i] = 0;
      queue.push_back(i);
    }
  if (queue.empty()) return dist;

  std::array<int, SymTensor::max_dim> coords{};
  std::array<int, SymTensor::max_dim> ncoords{};
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    detail::index_to_coords(g, cur, {coords.data(), static_cast<std::size_t>(g.n)});
    // Chebyshev ball of radius 1: all offset combinations in {-1,0,1}^n
    int reps = 1;
    for (int axis = 0; axis < g.n; ++axis) reps *= 3;
    for (int c = 0; c < reps; ++c) {
      int rem = c;
      bool all_zero = true;
      for (int axis = 0; axis < g.n; ++axis) {
        const int off = rem % 3 - 1;
        rem /= 3;
        ncoords[static_cast<std::size_t>(axis)] = coords[static_cast<std::size_t>(axis)] + off;
        if (off != 0) all_zero = false;
      }
      if (all_zero) continue;
      const std::size_t nb =
          detail::coords_to_index(g, {ncoords.data(), static_cast<std::size_t>(g.n)});
      if (dist[nb] > dist[cur] + 1) {
        dist[nb] = dist[cur] + 1;
        queue.push_back(nb);
      }
    }
  }
  return dist;
}

inline CellMask complement(const CellMask& mask) {
  CellMask m = mask;
  for (auto& b : m.bits) b = b ? 0 : 1;
  return m;
}

/// Mollified indicator for a mask: value `s` deep inside (erosion by
/// `width` cells), 1 deep outside (dilation by `width`), quintic smoothstep
/// across the transition ring.  width == 0 gives the sharp mixture.
inline std::vector<double> mollified_indicator(const CellMask& mask, double s, double width) {
  const std::size_t total = mask.grid.cell_count();
  std::vector<double> f(total, 1.0);
  if (mask.count() == 0) return f;
  if (mask.count() == total || width <= 0.0) {
    for (std::size_t i = 0; i < total; ++i) f[i] = mask.bits[i] ? s : 1.0;
    return f;
  }
  std::vector<int> d_in = chebyshev_distance_to(complement(mask));  // >0 strictly inside
  std::vector<int> d_out = chebyshev_distance_to(mask);             // >0 strictly outside
  for (std::size_t i = 0; i < total; ++i) {
    const double sd = static_cast<double>(d_out[i]) - static_cast<double>(d_in[i]);
    const double u = smoothstep5((sd + width) / (2.0 * width));
    f[i] = s + (1.0 - s) * u;
  }
  return f;
}

}  // namespace mspace
