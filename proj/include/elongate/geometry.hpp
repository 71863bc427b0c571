#pragma once

// Elongated product domains  ell*omega' x omega''  and their structured grids.
//
// Axes 0..r-1 are the elongated (horizontal) directions, axes r..n-1 the fixed
// (vertical) cross-section omega''. A grid built over omega'' alone has no
// horizontal axes and is used for the reduced problem.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace elongate {

inline constexpr int kMaxDim = 6;

class ResourceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Shape { unit_box, unit_ball };

inline std::string to_string(Shape s)
{
  return s == Shape::unit_box ? "unit-box" : "unit-ball";
}

inline Shape shape_from_string(const std::string& s)
{
  if (s == "unit-box")
    return Shape::unit_box;
  if (s == "unit-ball")
    return Shape::unit_ball;
  throw std::invalid_argument("unknown cross-section shape '" + s + "'");
}

/// Horizontal cross-section omega' together with the constants of its gauge.
struct CrossSection {
  Shape shape = Shape::unit_box;
  int r = 1;
  double lipschitz_K = 1.0;
  double r1 = 1.0;
  double r2 = 1.0;

  static CrossSection unit_box(int r)
  {
    if (r < 1)
      throw std::invalid_argument("cross-section dimension must be >= 1");
    return {Shape::unit_box, r, std::sqrt(double(r)), 1.0 / std::sqrt(double(r)), 1.0};
  }

  static CrossSection unit_ball(int r)
  {
    if (r < 1)
      throw std::invalid_argument("cross-section dimension must be >= 1");
    return {Shape::unit_ball, r, 1.0, 1.0, 1.0};
  }

  static CrossSection make(Shape s, int r)
  {
    return s == Shape::unit_box ? unit_box(r) : unit_ball(r);
  }
};

/// Minkowski functional of omega': inf{t > 0 : x'/t in omega'}.
inline double gauge(const CrossSection& cs, std::span<const double> xp)
{
  if (static_cast<int>(xp.size()) != cs.r)
    throw std::invalid_argument("gauge: expected " + std::to_string(cs.r) +
                                " horizontal coordinates, got " +
                                std::to_string(xp.size()));
  if (cs.shape == Shape::unit_box) {
    double m = 0.0;
    for (double x : xp)
      m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  for (double x : xp)
    s += x * x;
  return std::sqrt(s);
}

/// Lipschitz cutoff: 1 on {gauge <= t}, 0 on {gauge >= s}, affine in the gauge
/// in between.
inline double cutoff_rho(double s, double t, const CrossSection& cs,
                         std::span<const double> xp)
{
  if (!(t < s))
    throw std::invalid_argument("cutoff_rho: requires t < s");
  const double g = gauge(cs, xp);
  return std::min(std::max(s - g, 0.0), s - t) / (s - t);
}

struct DomainSpec {
  CrossSection cross_section = CrossSection::unit_box(1);
  double ell = 1.0;
  std::vector<double> vertical_halfwidths{1.0};
  int n = 2;

  int r() const { return cross_section.r; }

  void validate() const
  {
    if (!(ell > 0.0))
      throw std::invalid_argument("domain: ell must be positive");
    if (!(n > r() && r() >= 1))
      throw std::invalid_argument("domain: need n > r >= 1");
    if (n > kMaxDim)
      throw std::invalid_argument("domain: at most " + std::to_string(kMaxDim) +
                                  " dimensions supported");
    if (static_cast<int>(vertical_halfwidths.size()) != n - r())
      throw std::invalid_argument("domain: expected n - r vertical half-widths");
    for (double w : vertical_halfwidths)
      if (!(w > 0.0))
        throw std::invalid_argument("domain: vertical half-widths must be positive");
  }

  DomainSpec with_ell(double new_ell) const
  {
    DomainSpec d = *this;
    d.ell = new_ell;
    return d;
  }
};

inline constexpr std::size_t kDefaultNodeBudget = 20'000'000;

namespace detail {

inline std::size_t cells_for(double extent, double target_h)
{
  // Largest spacing <= target_h that divides the extent exactly.
  const double q = extent / target_h;
  auto c = static_cast<std::size_t>(std::ceil(q - 1e-9 * std::max(1.0, q)));
  return std::max<std::size_t>(c, 1);
}

} // namespace detail

/// Uniform tensor-product grid with Dirichlet classification of its nodes.
///
/// Node coordinates along an axis are (i - cells/2) * h, so two grids sharing a
/// spacing have bitwise identical coordinates for nodes at the same offset from
/// the centre. That makes grids of a sweep nest exactly.
class Grid {
public:
  /// Grid over Omega_ell. Horizontal extent is 2*ell per axis for both shapes.
  Grid(const DomainSpec& spec, double target_h,
       std::size_t node_budget = kDefaultNodeBudget)
      : spec_(spec), horizontal_dim_(spec.r())
  {
    spec.validate();
    std::vector<double> halfwidths(spec.n);
    for (int d = 0; d < spec.r(); ++d)
      halfwidths[d] = spec.ell;
    for (int d = spec.r(); d < spec.n; ++d)
      halfwidths[d] = spec.vertical_halfwidths[d - spec.r()];
    init(halfwidths, target_h, node_budget);
  }

  /// Grid over omega'' only, for the reduced problem. Its axes coincide with the
  /// vertical axes of every Omega_ell grid built with the same target_h.
  static Grid vertical(const DomainSpec& spec, double target_h,
                       std::size_t node_budget = kDefaultNodeBudget)
  {
    spec.validate();
    return Grid(spec, spec.vertical_halfwidths, target_h, node_budget);
  }

  int dim() const { return dim_; }
  int horizontal_dim() const { return horizontal_dim_; }
  int vertical_dim() const { return dim_ - horizontal_dim_; }
  const DomainSpec& spec() const { return spec_; }
  const CrossSection& cross_section() const { return spec_.cross_section; }

  std::span<const std::size_t> node_counts() const { return {nodes_.data(), std::size_t(dim_)}; }
  std::span<const std::size_t> cell_counts() const { return {cells_.data(), std::size_t(dim_)}; }
  std::span<const double> spacing() const { return {h_.data(), std::size_t(dim_)}; }
  double spacing(int axis) const { return h_[axis]; }

  /// Horizontal spacing (0 for a vertical-only grid).
  double h_horizontal() const { return horizontal_dim_ > 0 ? h_[0] : 0.0; }
  double h_vertical() const { return h_[horizontal_dim_]; }

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_cells() const { return num_cells_; }
  double cell_volume() const { return cell_volume_; }
  double total_volume() const { return cell_volume_ * double(num_cells_); }

  std::size_t node_stride(int axis) const { return node_stride_[axis]; }

  double node_coordinate(std::size_t node, int axis) const
  {
    const std::size_t i = (node / node_stride_[axis]) % nodes_[axis];
    return axis_coordinate(axis, double(i));
  }

  std::size_t node_index(std::span<const std::size_t> multi) const
  {
    std::size_t idx = 0;
    for (int d = 0; d < dim_; ++d)
      idx += multi[d] * node_stride_[d];
    return idx;
  }

  void node_multi_index(std::size_t node, std::span<std::size_t> out) const
  {
    for (int d = 0; d < dim_; ++d)
      out[d] = (node / node_stride_[d]) % nodes_[d];
  }

  bool is_fixed(std::size_t node) const { return fixed_[node] != 0; }
  std::size_t num_free_nodes() const { return num_free_; }

  void cell_multi_index(std::size_t cell, std::span<std::size_t> out) const
  {
    for (int d = 0; d < dim_; ++d) {
      out[d] = cell % cells_[d];
      cell /= cells_[d];
    }
  }

  /// Node index of the corner of `cell` selected by the bit mask (bit d set means
  /// the upper node along axis d).
  std::size_t cell_corner(std::size_t cell, unsigned mask) const
  {
    return cell_base_[cell] + corner_offset_[mask];
  }

  unsigned corners_per_cell() const { return 1u << dim_; }

  double cell_centroid(std::size_t cell, int axis) const
  {
    std::size_t c = cell;
    for (int d = 0; d < axis; ++d)
      c /= cells_[d];
    return axis_coordinate(axis, double(c % cells_[axis]) + 0.5);
  }

  /// Gauge of the horizontal part of the centroid (0 for a vertical-only grid).
  double cell_centroid_gauge(std::size_t cell) const
  {
    if (horizontal_dim_ == 0)
      return 0.0;
    std::array<double, kMaxDim> xp{};
    for (int d = 0; d < horizontal_dim_; ++d)
      xp[d] = cell_centroid(cell, d);
    return gauge(spec_.cross_section, {xp.data(), std::size_t(horizontal_dim_)});
  }

  double node_gauge(std::size_t node) const
  {
    if (horizontal_dim_ == 0)
      return 0.0;
    std::array<double, kMaxDim> xp{};
    for (int d = 0; d < horizontal_dim_; ++d)
      xp[d] = node_coordinate(node, d);
    return gauge(spec_.cross_section, {xp.data(), std::size_t(horizontal_dim_)});
  }

  /// Row-major index of the vertical part of a cell, over the vertical cells.
  std::size_t cell_vertical_index(std::size_t cell) const
  {
    for (int d = 0; d < horizontal_dim_; ++d)
      cell /= cells_[d];
    return cell;
  }

  std::size_t node_vertical_index(std::size_t node) const
  {
    return node / node_stride_[horizontal_dim_];
  }

private:
  Grid(const DomainSpec& spec, const std::vector<double>& halfwidths,
       double target_h, std::size_t node_budget)
      : spec_(spec), horizontal_dim_(0)
  {
    init(halfwidths, target_h, node_budget);
  }

  double axis_coordinate(int axis, double i) const
  {
    return (i - 0.5 * double(cells_[axis])) * h_[axis];
  }

  void init(const std::vector<double>& halfwidths, double target_h,
            std::size_t node_budget)
  {
    dim_ = static_cast<int>(halfwidths.size());
    if (!(target_h > 0.0))
      throw std::invalid_argument("grid: target_h must be positive");
    for (double w : halfwidths)
      if (!(target_h <= w))
        throw std::invalid_argument("grid: target_h must not exceed any half-width");

    double count = 1.0;
    for (int d = 0; d < dim_; ++d) {
      cells_[d] = detail::cells_for(2.0 * halfwidths[d], target_h);
      nodes_[d] = cells_[d] + 1;
      h_[d] = 2.0 * halfwidths[d] / double(cells_[d]);
      count *= double(nodes_[d]);
    }
    if (count > double(node_budget))
      throw ResourceError("grid: " + std::to_string(static_cast<long long>(count)) +
                          " nodes exceeds the node budget of " +
                          std::to_string(node_budget));

    num_nodes_ = 1;
    num_cells_ = 1;
    cell_volume_ = 1.0;
    for (int d = 0; d < dim_; ++d) {
      node_stride_[d] = num_nodes_;
      num_nodes_ *= nodes_[d];
      num_cells_ *= cells_[d];
      cell_volume_ *= h_[d];
    }
    for (unsigned mask = 0; mask < (1u << dim_); ++mask) {
      std::size_t off = 0;
      for (int d = 0; d < dim_; ++d)
        if (mask & (1u << d))
          off += node_stride_[d];
      corner_offset_[mask] = off;
    }

    cell_base_.resize(num_cells_);
    std::array<std::size_t, kMaxDim> m{};
    for (std::size_t c = 0; c < num_cells_; ++c) {
      cell_multi_index(c, m);
      cell_base_[c] = node_index(m);
    }

    fixed_.assign(num_nodes_, 0);
    num_free_ = 0;
    const bool ball = horizontal_dim_ > 0 && spec_.cross_section.shape == Shape::unit_ball;
    for (std::size_t v = 0; v < num_nodes_; ++v) {
      node_multi_index(v, m);
      bool fixed = false;
      for (int d = 0; d < dim_ && !fixed; ++d)
        fixed = m[d] == 0 || m[d] == cells_[d];
      if (!fixed && ball)
        fixed = node_gauge(v) >= spec_.ell * (1.0 - 1e-12);
      fixed_[v] = fixed ? 1 : 0;
      if (!fixed)
        ++num_free_;
    }
  }

  DomainSpec spec_;
  int dim_ = 0;
  int horizontal_dim_ = 0;
  std::array<std::size_t, kMaxDim> cells_{};
  std::array<std::size_t, kMaxDim> nodes_{};
  std::array<double, kMaxDim> h_{};
  std::array<std::size_t, kMaxDim> node_stride_{};
  std::array<std::size_t, (1u << kMaxDim)> corner_offset_{};
  std::size_t num_nodes_ = 0;
  std::size_t num_cells_ = 0;
  std::size_t num_free_ = 0;
  double cell_volume_ = 0.0;
  std::vector<std::size_t> cell_base_;
  std::vector<std::uint8_t> fixed_;
};

/// Node count of the Omega_ell grid that Grid(spec, target_h) would build.
inline double estimate_node_count(const DomainSpec& spec, double target_h)
{
  spec.validate();
  if (!(target_h > 0.0))
    throw std::invalid_argument("grid: target_h must be positive");
  double count = 1.0;
  for (int d = 0; d < spec.n; ++d) {
    const double w = d < spec.r() ? spec.ell : spec.vertical_halfwidths[d - spec.r()];
    count *= double(detail::cells_for(2.0 * w, target_h) + 1);
  }
  return count;
}

inline Grid build_grid(const DomainSpec& spec, double target_h,
                       std::size_t node_budget = kDefaultNodeBudget)
{
  return Grid(spec, target_h, node_budget);
}

enum class RegionKind { omega_t, slab_s_t };

/// A set of cells, sorted ascending.
struct CellRegion {
  std::vector<std::size_t> cells;

  bool empty() const { return cells.empty(); }
  std::size_t size() const { return cells.size(); }
};

/// Omega_t = {gauge(centroid') < t}; slab = Omega_s \ Omega_t by the same rule.
inline CellRegion region_cells(const Grid& grid, RegionKind kind, double t,
                               std::optional<double> s = std::nullopt)
{
  if (!(t > 0.0))
    throw std::invalid_argument("region_cells: t must be positive");
  if (kind == RegionKind::slab_s_t && (!s || !(*s > t)))
    throw std::invalid_argument("region_cells: slab requires s > t");
  CellRegion out;
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    const double g = grid.cell_centroid_gauge(c);
    const bool in = kind == RegionKind::omega_t ? g < t : (g >= t && g < *s);
    if (in)
      out.cells.push_back(c);
  }
  return out;
}

inline CellRegion all_cells(const Grid& grid)
{
  CellRegion out;
  out.cells.resize(grid.num_cells());
  for (std::size_t c = 0; c < grid.num_cells(); ++c)
    out.cells[c] = c;
  return out;
}

} // namespace elongate
