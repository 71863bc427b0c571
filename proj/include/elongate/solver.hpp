#pragma once

// Minimisers of the discrete energies on Omega_ell and on omega'', a closed-form
// one-dimensional reference solution and a minimality audit by comparison fields.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elongate/density.hpp"
#include "elongate/field.hpp"
#include "elongate/geometry.hpp"

namespace elongate {

class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Method { linear_cg, nonlinear_cg, gradient_descent };

inline std::string to_string(Method m)
{
  switch (m) {
  case Method::linear_cg: return "linear-cg";
  case Method::nonlinear_cg: return "nonlinear-cg";
  case Method::gradient_descent: return "gradient-descent";
  }
  return "?";
}

inline Method method_from_string(const std::string& s)
{
  if (s == "linear-cg")
    return Method::linear_cg;
  if (s == "nonlinear-cg")
    return Method::nonlinear_cg;
  if (s == "gradient-descent")
    return Method::gradient_descent;
  throw std::invalid_argument("unknown solver method '" + s + "'");
}

struct SolveOptions {
  Method method = Method::nonlinear_cg;
  /// Stopping threshold on the gradient max-norm, in units of
  /// ||f''||_inf * cell volume (1 * cell volume when f'' = 0).
  double grad_tol = 1e-9;
  std::size_t max_iters = 200000;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  /// First trial step, as a max-norm displacement relative to the current
  /// iterate's max-norm (or absolute when the iterate is 0).
  double initial_step = 0.1;
  /// Keep the energy after every accepted step in SolveReport::energy_history.
  bool record_history = false;

  void validate() const
  {
    if (!(grad_tol > 0.0))
      throw std::invalid_argument("solver: grad_tol must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0))
      throw std::invalid_argument("solver: Armijo factor must lie in (0,1)");
    if (!(backtrack > 0.0 && backtrack < 1.0))
      throw std::invalid_argument("solver: backtracking factor must lie in (0,1)");
    if (!(initial_step > 0.0))
      throw std::invalid_argument("solver: initial step must be positive");
    if (max_iters == 0)
      throw std::invalid_argument("solver: max_iters must be positive");
  }

  /// Defaults: linear CG with 1e-10 for quadratic forms, nonlinear CG with 1e-9 otherwise.
  static SolveOptions defaults_for(const EnergyDensity& d)
  {
    SolveOptions o;
    if (d.is_quadratic_form()) {
      o.method = Method::linear_cg;
      o.grad_tol = 1e-10;
    }
    return o;
  }
};

struct SolveReport {
  bool converged = false;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  /// Absolute threshold grad_norm was compared against.
  double grad_threshold = 0.0;
  double energy = 0.0;
  double wall_ms = 0.0;
  std::string method;
  std::vector<double> energy_history;
};

struct SolveResult {
  ScalarField field;
  SolveReport report;
};

/// ||f''||_inf times the cell volume; the unit of SolveOptions::grad_tol.
inline double gradient_scale(const Grid& g, const Load& f)
{
  const double fs = f.sup_norm();
  return (fs > 0.0 ? fs : 1.0) * g.cell_volume();
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

inline double max_abs(std::span<const double> a)
{
  double m = 0.0;
  for (double x : a)
    m = std::max(m, std::abs(x));
  return m;
}

template <class Density>
SolveResult linear_cg(const DiscreteEnergy<Density>& J, ScalarField x, const SolveOptions& opts,
                      double threshold)
{
  const std::size_t N = x.size();
  std::vector<double> g(N), d(N), Ad(N), b(N), zero(N, 0.0);
  J.gradient(zero, b);
  for (double& v : b)
    v = -v; // load vector: grad J(v) = A v - b

  SolveReport rep;
  rep.method = to_string(Method::linear_cg);
  auto xs = x.values();
  J.gradient(xs, g);
  auto quad_energy = [&] { return 0.5 * dot(xs, g) - 0.5 * dot(b, xs); };
  if (opts.record_history)
    rep.energy_history.push_back(quad_energy());

  for (std::size_t i = 0; i < N; ++i)
    d[i] = -g[i];
  double rr = dot(g, g);
  std::size_t it = 0;
  for (; it < opts.max_iters; ++it) {
    if (J.max_norm(g) <= threshold)
      break;
    J.gradient(d, Ad, false);
    const double dAd = dot(d, Ad);
    if (!(dAd > 0.0))
      throw SolverError("linear-cg: operator is not positive definite along the search direction");
    const double alpha = rr / dAd;
    for (std::size_t i = 0; i < N; ++i) {
      xs[i] += alpha * d[i];
      g[i] += alpha * Ad[i];
    }
    // Replace the recurrence by the true residual now and then.
    if ((it + 1) % 50 == 0)
      J.gradient(xs, g);
    if (opts.record_history)
      rep.energy_history.push_back(quad_energy());
    const double rr_new = dot(g, g);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < N; ++i)
      d[i] = -g[i] + beta * d[i];
  }
  J.gradient(xs, g);
  rep.iterations = it;
  rep.grad_norm = J.max_norm(g);
  rep.converged = rep.grad_norm <= threshold;
  rep.energy = J.energy(xs);
  return {std::move(x), std::move(rep)};
}

template <class Density>
SolveResult descent(const DiscreteEnergy<Density>& J, ScalarField x, const SolveOptions& opts,
                    double threshold, bool conjugate)
{
  const std::size_t N = x.size();
  auto xs = x.values();
  std::vector<double> g(N), g_new(N), d(N), trial(N);

  SolveReport rep;
  rep.method = to_string(conjugate ? Method::nonlinear_cg : Method::gradient_descent);
  J.gradient(xs, g);
  double E = J.energy(xs);
  if (opts.record_history)
    rep.energy_history.push_back(E);
  for (std::size_t i = 0; i < N; ++i)
    d[i] = -g[i];

  double alpha_prev = -1.0;
  double slope_prev = 0.0;
  std::size_t it = 0;
  for (; it < opts.max_iters; ++it) {
    if (J.max_norm(g) <= threshold)
      break;
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      for (std::size_t i = 0; i < N; ++i)
        d[i] = -g[i];
      slope = -dot(g, g);
    }
    const double dmax = max_abs(d);
    const double xmax = max_abs(xs);

    // First trial: previous step rescaled by the slope ratio, else a fixed
    // relative displacement.
    double alpha = alpha_prev > 0.0 ? alpha_prev * std::min(10.0, slope_prev / slope)
                                    : opts.initial_step * (xmax > 0.0 ? xmax : 1.0) / dmax;

    auto eval_at = [&](double a) {
      for (std::size_t i = 0; i < N; ++i)
        trial[i] = xs[i] + a * d[i];
      J.gradient(trial, g_new);
      return dot(g_new, d);
    };

    // Secant search for a zero of phi'(a) = grad J(x + a d) . d, which is
    // nondecreasing because J is convex. Keeps a bracket [lo, hi].
    double lo = 0.0, dlo = slope;
    double hi = -1.0, dhi = 0.0;
    double dphi = eval_at(alpha);
    for (int ls = 0; ls < 30; ++ls) {
      if (std::abs(dphi) <= 0.1 * std::abs(slope))
        break;
      if (dphi < 0.0) {
        lo = alpha;
        dlo = dphi;
      } else {
        hi = alpha;
        dhi = dphi;
      }
      double next;
      if (hi < 0.0) {
        // No upper bracket yet: extrapolate by secant from (0, slope), at most x4.
        const double den = dphi - slope;
        next = den > 0.0 ? alpha * (-slope) / den : 4.0 * alpha;
        next = std::min(std::max(next, 1.5 * alpha), 4.0 * alpha);
      } else {
        next = lo - dlo * (hi - lo) / (dhi - dlo);
        const double w = hi - lo;
        next = std::min(std::max(next, lo + 0.01 * w), hi - 0.01 * w);
      }
      alpha = next;
      dphi = eval_at(alpha);
    }

    // Armijo backtracking from the secant estimate. A step with phi'(a) <= 0
    // decreases the convex energy even when the change is below round-off.
    double E_new = J.energy(trial);
    bool accepted = false;
    for (;;) {
      if (E_new <= E + opts.armijo_c * alpha * slope || dphi <= 0.0) {
        accepted = true;
        break;
      }
      alpha *= opts.backtrack;
      if (alpha * dmax <= 1e-16 * std::max(1.0, xmax))
        break;
      dphi = eval_at(alpha);
      E_new = J.energy(trial);
    }
    if (!accepted)
      throw SolverError(rep.method + ": line search found no acceptable step above 1e-16 at iteration " +
                        std::to_string(it) + " (gradient max-norm " +
                        std::to_string(J.max_norm(g)) + ")");

    std::copy(trial.begin(), trial.end(), xs.begin());
    E = E_new;
    if (opts.record_history)
      rep.energy_history.push_back(E);

    double beta = 0.0;
    if (conjugate) {
      // Polak-Ribiere with the nonnegativity restart.
      double num = 0.0;
      for (std::size_t i = 0; i < N; ++i)
        num += g_new[i] * (g_new[i] - g[i]);
      beta = std::max(0.0, num / dot(g, g));
    }
    g.swap(g_new);
    for (std::size_t i = 0; i < N; ++i)
      d[i] = -g[i] + beta * d[i];
    alpha_prev = alpha;
    slope_prev = slope;
  }
  rep.iterations = it;
  rep.grad_norm = J.max_norm(g);
  rep.converged = rep.grad_norm <= threshold;
  rep.energy = J.energy(xs);
  return {std::move(x), std::move(rep)};
}

template <class Density>
SolveResult minimize_discrete(const DiscreteEnergy<Density>& J, const EnergyDensity& d,
                              const Load& f, const SolveOptions& opts,
                              const ScalarField* warm_start)
{
  opts.validate();
  if (opts.method == Method::linear_cg && !d.is_quadratic_form())
    throw std::invalid_argument("linear-cg requires a quadratic density (p = 2)");
  const auto t0 = std::chrono::steady_clock::now();

  ScalarField x(J.grid_ptr());
  if (warm_start) {
    if (warm_start->size() != x.size())
      throw std::invalid_argument("warm start lives on a different grid");
    x = ScalarField(J.grid_ptr(), {warm_start->values().begin(), warm_start->values().end()});
  }
  const double threshold = opts.grad_tol * gradient_scale(J.grid(), f);

  SolveResult res = opts.method == Method::linear_cg
                        ? linear_cg(J, std::move(x), opts, threshold)
                        : descent(J, std::move(x), opts, threshold,
                                  opts.method == Method::nonlinear_cg);
  res.report.grad_threshold = threshold;
  res.report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

} // namespace detail

/// Minimises the discrete J_ell over fields vanishing on the Dirichlet nodes.
inline SolveResult minimize(const GridPtr& grid, const EnergyDensity& d, const Load& f,
                            const SolveOptions& opts,
                            const std::optional<ScalarField>& warm_start = std::nullopt)
{
  if (grid->dim() != d.n() || grid->horizontal_dim() != d.r())
    throw std::invalid_argument("minimize: density and grid dimensions differ");
  DiscreteEnergy<FullDensity> J(grid, FullDensity{&d}, f);
  return detail::minimize_discrete(J, d, f, opts, warm_start ? &*warm_start : nullptr);
}

/// Minimises the discrete J_inf (density F'') on a grid over omega''.
inline SolveResult solve_limit(const GridPtr& vertical_grid, const EnergyDensity& d,
                               const Load& f, const SolveOptions& opts)
{
  if (vertical_grid->horizontal_dim() != 0 || vertical_grid->dim() != d.n() - d.r())
    throw std::invalid_argument("solve_limit: expected a grid over omega''");
  DiscreteEnergy<VerticalDensity> J(vertical_grid, VerticalDensity{&d}, f);
  return detail::minimize_discrete(J, d, f, opts, nullptr);
}

/// Exact minimiser of int_{-1}^{1} |u'|^p/p - f u with u(+-1) = 0 and constant f:
///   u(x) = (p-1)/p * f^(1/(p-1)) * (1 - |x|^(p/(p-1))).
struct Oracle1D {
  double p;
  double f;

  double operator()(double x) const
  {
    const double q = p / (p - 1.0);
    return (p - 1.0) / p * std::pow(f, 1.0 / (p - 1.0)) * (1.0 - std::pow(std::abs(x), q));
  }

  /// u'(x) = -(f|x|)^(1/(p-1)) sign(x).
  double derivative(double x) const
  {
    const double m = std::pow(f * std::abs(x), 1.0 / (p - 1.0));
    return x < 0.0 ? m : -m;
  }
};

inline Oracle1D oracle_1d(double p, double f_const)
{
  if (!(p >= 2.0))
    throw std::invalid_argument("oracle_1d: p must be >= 2");
  if (!(f_const > 0.0))
    throw std::invalid_argument("oracle_1d: load must be positive");
  return {p, f_const};
}

// ---------------------------------------------------------------------------
// Minimality audit

struct MinimalityAuditOptions {
  std::size_t perturbations = 100;
  std::size_t blends = 20;
  std::size_t far_field_cuts = 5;
  std::uint64_t seed = 1;
  double alpha = 0.5;
  double s = 2.0;
  double t = 1.0;
  /// grad_tol the field was solved with; sets the audit tolerance.
  double grad_tol = 1e-10;
};

struct AuditTrial {
  std::string kind;
  double energy = 0.0;
  double excess = 0.0; // J(u) - J(v); > tolerance is a violation
};

struct MinimalityReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double reference_energy = 0.0;
  double tolerance = 0.0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::string worst_kind;
  std::vector<AuditTrial> violating;

  bool passed() const { return violations == 0; }
};

/// Checks J(u) <= J(v) + tol for comparison fields v: the identity, smooth bump
/// perturbations u + delta*phi, blends (1 - a rho) u + a rho u_inf, the zero field
/// and far-field cuts (1 - rho) u, with rho = cutoff_rho(s, t, .) in x'.
/// tol = 10 * grad_tol * max(1, sum of |energy terms| of u).
inline MinimalityReport minimality_audit(const ScalarField& u, const ScalarField& u_inf_ext,
                                         const EnergyDensity& d, const Load& f,
                                         const MinimalityAuditOptions& opts)
{
  const GridPtr& gp = u.grid_ptr();
  const Grid& g = *gp;
  if (u_inf_ext.size() != u.size())
    throw std::invalid_argument("minimality_audit: limit field lives on a different grid");
  if (!(opts.alpha > 0.0 && opts.alpha <= 1.0))
    throw std::invalid_argument("minimality_audit: alpha must lie in (0,1]");
  const double ell = g.spec().ell;
  DiscreteEnergy<FullDensity> J(gp, FullDensity{&d}, f);

  MinimalityReport rep;
  rep.reference_energy = J.energy(u.values());
  rep.tolerance = 10.0 * opts.grad_tol * std::max(1.0, J.energy_magnitude(u.values()));

  auto check = [&](const std::string& kind, const std::vector<double>& v) {
    ScalarField vf(gp, v);
    const double e = J.energy(vf.values());
    const double excess = rep.reference_energy - e;
    ++rep.trials;
    if (excess > rep.worst_excess) {
      rep.worst_excess = excess;
      rep.worst_kind = kind;
    }
    if (excess > rep.tolerance) {
      ++rep.violations;
      if (rep.violating.size() < 16)
        rep.violating.push_back({kind, e, excess});
    }
  };

  std::vector<double> rho(g.num_nodes(), 0.0);
  auto fill_rho = [&](double s, double t) {
    std::array<double, kMaxDim> xp{};
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      for (int a = 0; a < g.horizontal_dim(); ++a)
        xp[a] = g.node_coordinate(v, a);
      rho[v] = cutoff_rho(s, t, g.cross_section(), {xp.data(), std::size_t(g.horizontal_dim())});
    }
  };

  std::vector<double> v(u.values().begin(), u.values().end());
  check("identity", v);

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double amp = u.max_abs() > 0.0 ? u.max_abs() : 1.0;
  std::array<double, kMaxDim> centre{}, radius{};
  for (std::size_t k = 0; k < opts.perturbations; ++k) {
    for (int a = 0; a < g.dim(); ++a) {
      const double half = 0.5 * g.spacing(a) * double(g.cell_counts()[a]);
      centre[a] = (2.0 * unit(rng) - 1.0) * half;
      radius[a] = g.spacing(a) * (2.0 + unit(rng) * std::max(1.0, 0.25 * double(g.cell_counts()[a])));
    }
    const double delta = (unit(rng) < 0.5 ? -1.0 : 1.0) * amp * std::pow(10.0, -4.0 + 3.0 * unit(rng));
    for (std::size_t n = 0; n < g.num_nodes(); ++n) {
      double phi = 1.0;
      for (int a = 0; a < g.dim() && phi != 0.0; ++a) {
        const double z = (g.node_coordinate(n, a) - centre[a]) / radius[a];
        phi *= std::abs(z) < 1.0 ? std::pow(std::cos(0.5 * std::numbers::pi * z), 2) : 0.0;
      }
      v[n] = u[n] + delta * phi;
    }
    check("perturbation", v);
  }

  for (std::size_t k = 0; k < opts.blends; ++k) {
    double a = opts.alpha, s = opts.s, t = opts.t;
    if (k > 0) {
      a = 0.05 + 0.95 * unit(rng);
      t = ell * (0.05 + 0.85 * unit(rng));
      s = t + (ell - t) * (0.05 + 0.95 * unit(rng));
    }
    fill_rho(s, t);
    for (std::size_t n = 0; n < g.num_nodes(); ++n)
      v[n] = (1.0 - a * rho[n]) * u[n] + a * rho[n] * u_inf_ext[n];
    check("blend", v);
  }

  std::fill(v.begin(), v.end(), 0.0);
  check("zero", v);

  for (std::size_t k = 0; k < opts.far_field_cuts; ++k) {
    double s = opts.s, t = opts.t;
    if (k > 0) {
      t = ell * (0.05 + 0.85 * unit(rng));
      s = std::min(ell, t + 1.0);
    }
    fill_rho(s, t);
    for (std::size_t n = 0; n < g.num_nodes(); ++n)
      v[n] = (1.0 - rho[n]) * u[n];
    check("far-field-cut", v);
  }
  return rep;
}

} // namespace elongate
