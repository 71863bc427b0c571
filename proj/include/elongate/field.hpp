#pragma once

// Nodal fields on structured grids and the discrete energy
//   J(v) = sum_cells vol * [ F(grad v(centroid)) - f''(centroid'') * mean(corners) ],
// with grad v the gradient of the multilinear interpolant at the cell centroid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elongate/density.hpp"
#include "elongate/geometry.hpp"
#include "elongate/parallel.hpp"

namespace elongate {

using GridPtr = std::shared_ptr<const Grid>;

/// Nodal values on a grid, zero at every Dirichlet-fixed node.
class ScalarField {
public:
  ScalarField() = default;
  explicit ScalarField(GridPtr grid) : grid_(std::move(grid)), values_(grid_->num_nodes(), 0.0) {}

  /// Takes raw nodal values and zeroes the Dirichlet nodes.
  ScalarField(GridPtr grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values))
  {
    if (values_.size() != grid_->num_nodes())
      throw std::invalid_argument("ScalarField: value count does not match the grid");
    enforce_dirichlet();
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  void enforce_dirichlet()
  {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (grid_->is_fixed(i))
        values_[i] = 0.0;
  }

  double max_abs() const
  {
    double m = 0.0;
    for (double v : values_)
      m = std::max(m, std::abs(v));
    return m;
  }

private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Force density f'' on omega''. A sampled load stores one value per node of the
/// vertical grid; the cell value is the mean over the vertical corners.
class Load {
public:
  enum class Kind { constant, sampled };

  static Load constant(double value, double p = 2.0)
  {
    Load l;
    l.kind_ = Kind::constant;
    l.value_ = value;
    l.set_p(p);
    return l;
  }

  static Load sampled(std::vector<double> vertical_node_values, double p = 2.0)
  {
    Load l;
    l.kind_ = Kind::sampled;
    l.samples_ = std::move(vertical_node_values);
    l.set_p(p);
    return l;
  }

  Kind kind() const { return kind_; }
  double constant_value() const { return value_; }
  std::span<const double> samples() const { return samples_; }
  /// p' = p / (p - 1); reporting only.
  double conjugate_exponent() const { return p_conj_; }

  double sup_norm() const
  {
    if (kind_ == Kind::constant)
      return std::abs(value_);
    double m = 0.0;
    for (double v : samples_)
      m = std::max(m, std::abs(v));
    return m;
  }

  /// f'' at every cell centroid of the grid.
  std::vector<double> cell_values(const Grid& g) const
  {
    std::vector<double> out(g.num_cells(), value_);
    if (kind_ == Kind::constant)
      return out;
    const int h = g.horizontal_dim();
    const int m = g.vertical_dim();
    std::size_t vert_nodes = 1;
    std::array<std::size_t, kMaxDim> vstride{};
    for (int d = 0; d < m; ++d) {
      vstride[d] = vert_nodes;
      vert_nodes *= g.node_counts()[h + d];
    }
    if (samples_.size() != vert_nodes)
      throw std::invalid_argument("Load: sampled values do not match the vertical grid (" +
                                  std::to_string(samples_.size()) + " vs " +
                                  std::to_string(vert_nodes) + ")");
    std::array<std::size_t, kMaxDim> mi{};
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      g.cell_multi_index(c, mi);
      double s = 0.0;
      for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::size_t idx = 0;
        for (int d = 0; d < m; ++d)
          idx += (mi[h + d] + ((mask >> d) & 1u)) * vstride[d];
        s += samples_[idx];
      }
      out[c] = s / double(1u << m);
    }
    return out;
  }

private:
  void set_p(double p)
  {
    if (!(p > 1.0))
      throw std::invalid_argument("Load: exponent must exceed 1");
    p_conj_ = p / (p - 1.0);
  }

  Kind kind_ = Kind::constant;
  double value_ = 0.0;
  std::vector<double> samples_;
  double p_conj_ = 2.0;
};

/// Gradient of the multilinear interpolant of the corner values at the centroid.
inline void cell_gradient(const Grid& g, std::span<const double> values, std::size_t cell,
                          std::span<double> out)
{
  const int n = g.dim();
  const unsigned corners = g.corners_per_cell();
  for (int d = 0; d < n; ++d)
    out[d] = 0.0;
  for (unsigned mask = 0; mask < corners; ++mask) {
    const double v = values[g.cell_corner(cell, mask)];
    for (int d = 0; d < n; ++d)
      out[d] += (mask & (1u << d)) ? v : -v;
  }
  const double w = 2.0 / double(corners);
  for (int d = 0; d < n; ++d)
    out[d] *= w / g.spacing(d);
}

inline std::vector<double> cell_gradient(const ScalarField& v, std::size_t cell)
{
  std::vector<double> out(v.grid().dim());
  cell_gradient(v.grid(), v.values(), cell, out);
  return out;
}

inline double cell_mean(const Grid& g, std::span<const double> values, std::size_t cell)
{
  const unsigned corners = g.corners_per_cell();
  double s = 0.0;
  for (unsigned mask = 0; mask < corners; ++mask)
    s += values[g.cell_corner(cell, mask)];
  return s / double(corners);
}

/// Adapts an EnergyDensity to the full gradient (problem on Omega_ell).
struct FullDensity {
  const EnergyDensity* density;
  double value(std::span<const double> xi) const { return density->value(xi); }
  void gradient(std::span<const double> xi, std::span<double> out) const { density->gradient(xi, out); }
};

/// Adapts an EnergyDensity to F'' on vertical gradients (reduced problem).
struct VerticalDensity {
  const EnergyDensity* density;
  double value(std::span<const double> xi) const { return density->value_vertical(xi); }
  void gradient(std::span<const double> xi, std::span<double> out) const { density->gradient_vertical(xi, out); }
};

/// Discrete energy bound to a grid, a density adaptor and a load. Precomputes the
/// per-cell load and the node-to-cell incidence used to gather gradients.
template <class Density>
class DiscreteEnergy {
public:
  DiscreteEnergy(GridPtr grid, Density density, const Load& load)
      : grid_(std::move(grid)), density_(density), cell_load_(load.cell_values(*grid_))
  {
    const Grid& g = *grid_;
    const int n = g.dim();
    const unsigned corners = g.corners_per_cell();
    std::array<std::size_t, kMaxDim> mi{};
    incidence_offset_.reserve(g.num_free_nodes() + 1);
    incidence_offset_.push_back(0);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      if (g.is_fixed(v))
        continue;
      free_nodes_.push_back(v);
      g.node_multi_index(v, mi);
      // Adjacent cell with lower corner at v - offset(mask); v is its corner `mask`.
      for (unsigned mask = 0; mask < corners; ++mask) {
        bool ok = true;
        std::size_t cell = 0, stride = 1;
        for (int d = 0; d < n; ++d) {
          const std::size_t shift = (mask >> d) & 1u;
          if (mi[d] < shift || mi[d] - shift >= g.cell_counts()[d]) {
            ok = false;
            break;
          }
          cell += (mi[d] - shift) * stride;
          stride *= g.cell_counts()[d];
        }
        if (ok)
          incidence_.push_back({cell, mask});
      }
      incidence_offset_.push_back(incidence_.size());
    }
    flux_.resize(g.num_cells() * std::size_t(n));
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const std::size_t> free_nodes() const { return free_nodes_; }
  std::span<const double> cell_load() const { return cell_load_; }

  double energy(std::span<const double> v, bool with_load = true) const
  {
    const Grid& g = *grid_;
    const double vol = g.cell_volume();
    return vol * deterministic_sum(g.num_cells(), [&](std::size_t c) {
      std::array<double, kMaxDim> grad{};
      cell_gradient(g, v, c, {grad.data(), std::size_t(g.dim())});
      double e = density_.value({grad.data(), std::size_t(g.dim())});
      if (with_load)
        e -= cell_load_[c] * cell_mean(g, v, c);
      return e;
    });
  }

  /// Sum over cells of the absolute values of both energy terms; the magnitude
  /// against which round-off in energy() is measured.
  double energy_magnitude(std::span<const double> v) const
  {
    const Grid& g = *grid_;
    return g.cell_volume() * deterministic_sum(g.num_cells(), [&](std::size_t c) {
      std::array<double, kMaxDim> grad{};
      cell_gradient(g, v, c, {grad.data(), std::size_t(g.dim())});
      return std::abs(density_.value({grad.data(), std::size_t(g.dim())})) +
             std::abs(cell_load_[c] * cell_mean(g, v, c));
    });
  }

  /// Exact gradient of energy() with respect to the nodal values; entries at
  /// Dirichlet nodes are 0.
  void gradient(std::span<const double> v, std::span<double> out, bool with_load = true) const
  {
    const Grid& g = *grid_;
    const int n = g.dim();
    const double vol = g.cell_volume();
    const unsigned corners = g.corners_per_cell();
    const double wcorner = 2.0 / double(corners);

    parallel_for(g.num_cells(), [&](std::size_t b, std::size_t e) {
      std::array<double, kMaxDim> grad{}, dF{};
      for (std::size_t c = b; c < e; ++c) {
        cell_gradient(g, v, c, {grad.data(), std::size_t(n)});
        density_.gradient({grad.data(), std::size_t(n)}, {dF.data(), std::size_t(n)});
        for (int d = 0; d < n; ++d)
          flux_[c * n + d] = vol * wcorner * dF[d] / g.spacing(d);
      }
    });

    std::fill(out.begin(), out.end(), 0.0);
    const double load_weight = vol / double(corners);
    parallel_for(free_nodes_.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        double s = 0.0;
        for (std::size_t j = incidence_offset_[k]; j < incidence_offset_[k + 1]; ++j) {
          const auto [cell, mask] = incidence_[j];
          const double* q = &flux_[cell * n];
          for (int d = 0; d < n; ++d)
            s += (mask & (1u << d)) ? q[d] : -q[d];
          if (with_load)
            s -= load_weight * cell_load_[cell];
        }
        out[free_nodes_[k]] = s;
      }
    });
  }

  /// Max-norm over free nodes of a nodal covector.
  double max_norm(std::span<const double> covector) const
  {
    double m = 0.0;
    for (std::size_t v : free_nodes_)
      m = std::max(m, std::abs(covector[v]));
    return m;
  }

private:
  struct Incidence {
    std::size_t cell;
    unsigned mask;
  };

  GridPtr grid_;
  Density density_;
  std::vector<double> cell_load_;
  std::vector<std::size_t> free_nodes_;
  std::vector<std::size_t> incidence_offset_;
  std::vector<Incidence> incidence_;
  mutable std::vector<double> flux_;
};

/// Discrete J_ell(v).
inline double assemble_energy(const ScalarField& v, const EnergyDensity& d, const Load& f)
{
  return DiscreteEnergy<FullDensity>(v.grid_ptr(), FullDensity{&d}, f).energy(v.values());
}

/// Discrete J_inf(w) for a field on the vertical grid.
inline double assemble_limit_energy(const ScalarField& w, const EnergyDensity& d, const Load& f)
{
  return DiscreteEnergy<VerticalDensity>(w.grid_ptr(), VerticalDensity{&d}, f).energy(w.values());
}

/// Gradient of assemble_energy with respect to the nodal values (0 at Dirichlet nodes).
inline std::vector<double> assemble_energy_gradient(const ScalarField& v, const EnergyDensity& d,
                                                    const Load& f)
{
  std::vector<double> out(v.size());
  DiscreteEnergy<FullDensity>(v.grid_ptr(), FullDensity{&d}, f).gradient(v.values(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Per-cell quantities and norms

/// One vector of `dim` components per cell, stored contiguously.
struct CellVectors {
  int dim = 1;
  std::vector<double> data;

  std::size_t cells() const { return dim > 0 ? data.size() / std::size_t(dim) : 0; }
  std::span<const double> at(std::size_t c) const { return {data.data() + c * dim, std::size_t(dim)}; }
};

/// Centroid gradients restricted to axes [first, first + count).
inline CellVectors cell_gradients(const ScalarField& v, int first = 0, int count = -1)
{
  const Grid& g = v.grid();
  const int n = g.dim();
  if (count < 0)
    count = n - first;
  if (first < 0 || first + count > n)
    throw std::invalid_argument("cell_gradients: axis range out of bounds");
  CellVectors out{count, std::vector<double>(g.num_cells() * std::size_t(count))};
  std::array<double, kMaxDim> grad{};
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    cell_gradient(g, v.values(), c, {grad.data(), std::size_t(n)});
    for (int d = 0; d < count; ++d)
      out.data[c * count + d] = grad[first + d];
  }
  return out;
}

inline CellVectors horizontal_gradients(const ScalarField& v)
{
  return cell_gradients(v, 0, v.grid().horizontal_dim());
}

inline CellVectors vertical_gradients(const ScalarField& v)
{
  return cell_gradients(v, v.grid().horizontal_dim());
}

/// Centroid values (corner means).
inline CellVectors cell_values(const ScalarField& v)
{
  const Grid& g = v.grid();
  CellVectors out{1, std::vector<double>(g.num_cells())};
  for (std::size_t c = 0; c < g.num_cells(); ++c)
    out.data[c] = cell_mean(g, v.values(), c);
  return out;
}

/// p-th power of the L^p norm over a region: sum |value|^p * vol.
inline double lp_norm_p(const Grid& g, const CellVectors& values, const CellRegion& region, double p)
{
  if (!(p >= 1.0))
    throw std::invalid_argument("lp_norm_p: p must be >= 1");
  if (values.cells() != g.num_cells())
    throw std::invalid_argument("lp_norm_p: one value per cell expected");
  double s = 0.0;
  for (std::size_t c : region.cells) {
    double n2 = 0.0;
    for (double x : values.at(c))
      n2 += x * x;
    s += detail::pow_half(n2, p);
  }
  return s * g.cell_volume();
}

/// Difference a - b of two fields on the same grid.
inline ScalarField difference(const ScalarField& a, const ScalarField& b)
{
  if (a.size() != b.size())
    throw std::invalid_argument("difference: fields live on different grids");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a[i] - b[i];
  return ScalarField(a.grid_ptr(), std::move(out));
}

namespace detail {

inline bool same_vertical_axes(const Grid& vertical, const Grid& full)
{
  if (vertical.horizontal_dim() != 0 || vertical.dim() != full.vertical_dim())
    return false;
  for (int d = 0; d < vertical.dim(); ++d) {
    const int fd = full.horizontal_dim() + d;
    if (vertical.node_counts()[d] != full.node_counts()[fd] ||
        vertical.spacing(d) != full.spacing(fd))
      return false;
  }
  return true;
}

} // namespace detail

/// The x'-independent extension (x', x'') -> w(x''), zero on Dirichlet nodes.
inline ScalarField extend_vertical(const ScalarField& w, const GridPtr& grid)
{
  if (!detail::same_vertical_axes(w.grid(), *grid))
    throw std::invalid_argument("extend_vertical: vertical grids differ");
  std::vector<double> out(grid->num_nodes());
  for (std::size_t v = 0; v < out.size(); ++v)
    out[v] = w[grid->node_vertical_index(v)];
  return ScalarField(grid, std::move(out));
}

/// Copies `from` into a larger grid with the same spacings, matching nodes by
/// coordinates and padding with zeros. Returns nullopt when the grids do not nest.
inline std::optional<ScalarField> embed_field(const ScalarField& from, const GridPtr& to)
{
  const Grid& a = from.grid();
  const Grid& b = *to;
  if (a.dim() != b.dim() || a.horizontal_dim() != b.horizontal_dim())
    return std::nullopt;
  std::array<std::size_t, kMaxDim> offset{};
  for (int d = 0; d < a.dim(); ++d) {
    if (a.spacing(d) != b.spacing(d) || b.cell_counts()[d] < a.cell_counts()[d])
      return std::nullopt;
    const std::size_t diff = b.cell_counts()[d] - a.cell_counts()[d];
    if (diff % 2 != 0)
      return std::nullopt;
    offset[d] = diff / 2;
  }
  std::vector<double> out(b.num_nodes(), 0.0);
  std::array<std::size_t, kMaxDim> mi{};
  for (std::size_t v = 0; v < a.num_nodes(); ++v) {
    a.node_multi_index(v, mi);
    for (int d = 0; d < a.dim(); ++d)
      mi[d] += offset[d];
    out[b.node_index(mi)] = from[v];
  }
  return ScalarField(to, std::move(out));
}

/// ||v||_{L^p} / ||grad'' v||_{L^p} over the whole grid, 0 when v = 0.
inline double poincare_ratio(const ScalarField& v, double p)
{
  const Grid& g = v.grid();
  const auto region = all_cells(g);
  const double num = lp_norm_p(g, cell_values(v), region, p);
  const double den = lp_norm_p(g, vertical_gradients(v), region, p);
  if (den == 0.0)
    return 0.0;
  return std::pow(num / den, 1.0 / p);
}

} // namespace elongate
