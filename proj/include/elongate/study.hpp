#pragma once

// Elongation sweeps: solve on a growing family of domains, compare with the
// reduced solution on a fixed subdomain, extract decay profiles and fit rates.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "elongate/density.hpp"
#include "elongate/field.hpp"
#include "elongate/geometry.hpp"
#include "elongate/solver.hpp"

namespace elongate {

struct SweepConfig {
  DomainSpec domain;           // ell is ignored; see ells
  std::vector<double> ells;    // strictly ascending
  double target_h = 0.0625;
  std::size_t node_budget = kDefaultNodeBudget;
  EnergyDensity density = EnergyDensity::quadratic(1, 2);
  Load load = Load::constant(2.0);
  SolveOptions solver;
  bool warm_start = true;
  double ell0 = 1.0;

  void validate() const
  {
    if (ells.empty())
      throw std::invalid_argument("sweep: ell list is empty");
    for (std::size_t i = 1; i < ells.size(); ++i)
      if (!(ells[i] > ells[i - 1]))
        throw std::invalid_argument("sweep: ell list must be strictly ascending");
    if (!(ell0 > 0.0 && ell0 <= ells.front()))
      throw std::invalid_argument("sweep: need 0 < ell0 <= smallest ell");
    if (density.n() != domain.n || density.r() != domain.r())
      throw std::invalid_argument("sweep: density dimensions do not match the domain");
    domain.with_ell(ells.front()).validate();
    solver.validate();
  }
};

/// Measurements for one ell. Norm quantities are p-th powers.
struct SweepRecord {
  double ell = 0.0;
  double ell0 = 0.0;
  double h_horiz = 0.0;
  double h_vert = 0.0;
  std::size_t nodes = 0;
  std::size_t iters = 0;
  bool converged = false;
  double grad_norm = 0.0;
  double J_ell = 0.0;
  double total_grad_energy = 0.0; // ||grad u_ell||^p on Omega_ell
  double local_grad_energy = 0.0; // ||grad u_ell||^p on Omega_ell0
  double err_grad_p = 0.0;        // ||grad(u_ell - u_inf)||^p on Omega_ell0
  double err_w1p = 0.0;           // err_grad_p + ||u_ell - u_inf||^p on Omega_ell0
  double hgrad_p = 0.0;           // ||grad' u_ell||^p on Omega_ell0
  double runtime_ms = 0.0;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  SolveResult limit;
  /// Solution and extended limit field at the largest ell.
  std::optional<ScalarField> last_solution;
  std::optional<ScalarField> last_limit_extension;
};

/// Measured quantities of u_ell against the extended limit field on Omega_ell0.
inline SweepRecord measure(const ScalarField& u, const ScalarField& u_inf_ext, double p, double ell0)
{
  const Grid& g = u.grid();
  SweepRecord rec;
  rec.ell = g.spec().ell;
  rec.ell0 = ell0;
  rec.h_horiz = g.h_horizontal();
  rec.h_vert = g.h_vertical();
  rec.nodes = g.num_nodes();

  const auto whole = all_cells(g);
  const auto local = region_cells(g, RegionKind::omega_t, ell0);
  const auto diff = difference(u, u_inf_ext);
  const auto grad_u = cell_gradients(u);
  rec.total_grad_energy = lp_norm_p(g, grad_u, whole, p);
  rec.local_grad_energy = lp_norm_p(g, grad_u, local, p);
  rec.err_grad_p = lp_norm_p(g, cell_gradients(diff), local, p);
  rec.err_w1p = rec.err_grad_p + lp_norm_p(g, cell_values(diff), local, p);
  rec.hgrad_p = lp_norm_p(g, horizontal_gradients(u), local, p);
  return rec;
}

/// Solves P_inf once and P_ell for each ell (warm-started from the previous ell
/// when the grids nest), measuring every record. Sequential in ell.
inline SweepResult run_sweep(const SweepConfig& cfg)
{
  cfg.validate();
  const double p = cfg.density.p();
  SweepResult out;

  auto vgrid = std::make_shared<const Grid>(
      Grid::vertical(cfg.domain.with_ell(cfg.ells.front()), cfg.target_h, cfg.node_budget));
  out.limit = solve_limit(vgrid, cfg.density, cfg.load, cfg.solver);

  std::optional<ScalarField> previous;
  for (double ell : cfg.ells) {
    const auto t0 = std::chrono::steady_clock::now();
    auto grid = std::make_shared<const Grid>(cfg.domain.with_ell(ell), cfg.target_h, cfg.node_budget);
    std::optional<ScalarField> warm;
    if (cfg.warm_start && previous)
      warm = embed_field(*previous, grid);
    auto sol = minimize(grid, cfg.density, cfg.load, cfg.solver, warm);
    auto ext = extend_vertical(out.limit.field, grid);

    SweepRecord rec = measure(sol.field, ext, p, std::min(cfg.ell0, ell));
    rec.iters = sol.report.iterations;
    rec.converged = sol.report.converged && out.limit.report.converged;
    rec.grad_norm = sol.report.grad_norm;
    rec.J_ell = sol.report.energy;
    rec.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.records.push_back(rec);

    previous = sol.field;
    out.last_limit_extension = std::move(ext);
    out.last_solution = std::move(sol.field);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decay profile

struct Profile {
  std::vector<std::pair<double, double>> points; // (t, g(t))
};

/// g(t) = ||grad' u||^p_{Omega_t} + ||grad''(u - u_inf)||^p_{Omega_t}.
inline Profile saint_venant_profile(const ScalarField& u, const ScalarField& u_inf_ext, double p,
                                    const std::vector<double>& t_values)
{
  const Grid& g = u.grid();
  const double ell = g.spec().ell;
  for (std::size_t i = 0; i < t_values.size(); ++i) {
    if (!(t_values[i] > 0.0 && t_values[i] <= ell))
      throw std::invalid_argument("saint_venant_profile: t values must lie in (0, ell]");
    if (i > 0 && !(t_values[i] > t_values[i - 1]))
      throw std::invalid_argument("saint_venant_profile: t values must be ascending");
  }
  const auto hgrad = horizontal_gradients(u);
  const auto vgrad = vertical_gradients(difference(u, u_inf_ext));
  Profile prof;
  for (double t : t_values) {
    const auto region = region_cells(g, RegionKind::omega_t, t);
    prof.points.emplace_back(t, lp_norm_p(g, hgrad, region, p) + lp_norm_p(g, vgrad, region, p));
  }
  return prof;
}

/// Smallest theta with g(t) <= theta g(t + 1) for all profile points with
/// t in [t_lo, t_hi] whose successor t + 1 is also in the profile.
inline double profile_theta(const Profile& prof, double t_lo, double t_hi)
{
  double theta = 0.0;
  for (const auto& [t, gt] : prof.points) {
    if (t < t_lo || t > t_hi)
      continue;
    for (const auto& [t1, gt1] : prof.points)
      if (std::abs(t1 - (t + 1.0)) < 1e-12) {
        if (gt1 > 0.0)
          theta = std::max(theta, gt / gt1);
        else if (gt > 0.0)
          theta = std::numeric_limits<double>::infinity();
      }
  }
  return theta;
}

// ---------------------------------------------------------------------------
// Rate fitting

enum class RateModel { power, exponential };

inline std::string to_string(RateModel m)
{
  return m == RateModel::power ? "power" : "exponential";
}

inline RateModel rate_model_from_string(const std::string& s)
{
  if (s == "power")
    return RateModel::power;
  if (s == "exponential")
    return RateModel::exponential;
  throw std::invalid_argument("unknown rate model '" + s + "'");
}

/// e ~ C ell^q (power) or e ~ C exp(-alpha ell) (exponential). `exponent` holds
/// q or alpha respectively.
struct RateFit {
  RateModel model = RateModel::power;
  bool sufficient = false;
  double C = 0.0;
  double exponent = 0.0;
  double r2 = 0.0;
  std::size_t points_used = 0;
  double floor = 0.0;
};

/// Least squares on (ln ell, ln e) or (ell, ln e) over points with e > floor.
/// Fewer than 3 usable points gives sufficient = false.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points, RateModel model,
                        double floor)
{
  RateFit fit;
  fit.model = model;
  fit.floor = floor;
  std::vector<double> xs, ys;
  for (const auto& [ell, e] : points) {
    if (!(e > floor) || !(ell > 0.0) || !std::isfinite(e))
      continue;
    xs.push_back(model == RateModel::power ? std::log(ell) : ell);
    ys.push_back(std::log(e));
  }
  fit.points_used = xs.size();
  if (xs.size() < 3)
    return fit;

  const double n = double(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0)
    return fit;
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double res = ys[i] - (intercept + slope * xs[i]);
    ssr += res * res;
  }
  fit.sufficient = true;
  fit.C = std::exp(intercept);
  fit.exponent = model == RateModel::power ? slope : -slope;
  const double tiny = 1e-24 * std::max(1.0, syy);
  fit.r2 = syy > tiny ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : (ssr <= tiny ? 1.0 : 0.0);
  return fit;
}

/// (ell, err_grad_p^(1/p)) pairs of converged records.
inline std::vector<std::pair<double, double>> grad_error_points(const std::vector<SweepRecord>& recs,
                                                                double p)
{
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : recs)
    if (r.converged)
      pts.emplace_back(r.ell, std::pow(r.err_grad_p, 1.0 / p));
  return pts;
}

inline std::vector<std::pair<double, double>> w1p_error_points(const std::vector<SweepRecord>& recs)
{
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : recs)
    if (r.converged)
      pts.emplace_back(r.ell, r.err_w1p);
  return pts;
}

struct SweepFits {
  RateFit exponential; // on err_grad_p^(1/p)
  RateFit power;       // on err_w1p
};

inline SweepFits fit_sweep(const std::vector<SweepRecord>& recs, double p, double floor_exponential,
                           double floor_power)
{
  return {fit_rate(grad_error_points(recs, p), RateModel::exponential, floor_exponential),
          fit_rate(w1p_error_points(recs), RateModel::power, floor_power)};
}

// ---------------------------------------------------------------------------
// Verdicts

enum class VerdictStatus { pass, fail, skipped };

inline std::string to_string(VerdictStatus s)
{
  switch (s) {
  case VerdictStatus::pass: return "pass";
  case VerdictStatus::fail: return "fail";
  case VerdictStatus::skipped: return "skipped";
  }
  return "?";
}

struct Verdict {
  std::string id;
  VerdictStatus status = VerdictStatus::skipped;
  std::string detail;
  std::map<std::string, double> measured;
};

struct VerdictThresholds {
  double bounded_ratio = 2.0;       // max/min of an energy ratio that must stay bounded
  double monotone_slack = 1e-12;    // absolute slack for nonincreasing sequences
  double decay_factor = 1e-2;       // final hgrad_p <= factor * first, unless at the floor
  double power_slack = 0.5;         // fitted exponent <= bound + slack
  double power_min_r2 = 0.9;
  double exponential_min_r2 = 0.98;
  double floor = 1e-8;              // errors at or below are solver-floor values
};

/// One verdict per checked statement; statements whose hypotheses the density
/// does not satisfy are skipped.
inline std::vector<Verdict> theorem_verdicts(const std::vector<SweepRecord>& all,
                                             const EnergyDensity& d, const SweepFits& fits,
                                             const VerdictThresholds& th = {})
{
  std::vector<SweepRecord> recs;
  for (const auto& r : all)
    if (r.converged)
      recs.push_back(r);
  const double r = double(d.r());
  const double p = d.p(), k = d.k();
  std::vector<Verdict> out;

  auto ratio_verdict = [&](const std::string& id, auto value_of, const std::string& what) {
    Verdict v;
    v.id = id;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& rec : recs) {
      const double x = value_of(rec);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    if (recs.empty()) {
      v.detail = "no converged records";
      return v;
    }
    v.measured["min"] = lo;
    v.measured["max"] = hi;
    if (hi <= th.floor) {
      v.status = VerdictStatus::pass;
      v.detail = what + " vanishes (at the floor)";
      return v;
    }
    const double ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    v.measured["max_over_min"] = ratio;
    v.status = ratio <= th.bounded_ratio ? VerdictStatus::pass : VerdictStatus::fail;
    v.detail = what + " bounded in ell";
    return v;
  };

  out.push_back(ratio_verdict(
      "coarse-energy-bound",
      [&](const SweepRecord& rec) { return rec.total_grad_energy / std::pow(rec.ell, r); },
      "total gradient energy / ell^r"));
  out.push_back(ratio_verdict(
      "local-energy-bound", [](const SweepRecord& rec) { return rec.local_grad_energy; },
      "gradient energy on Omega_ell0"));

  {
    Verdict v;
    v.id = "horizontal-gradient-vanishes";
    if (recs.empty()) {
      v.detail = "no converged records";
    } else {
      bool monotone = true;
      for (std::size_t i = 1; i < recs.size(); ++i)
        monotone = monotone && recs[i].hgrad_p <= recs[i - 1].hgrad_p + th.monotone_slack;
      const double first = recs.front().hgrad_p, last = recs.back().hgrad_p;
      v.measured["first"] = first;
      v.measured["last"] = last;
      const bool small = last <= th.floor || last <= th.decay_factor * first;
      v.detail = "hgrad_p nonincreasing and decayed";
      if (!monotone || small) {
        v.status = monotone ? VerdictStatus::pass : VerdictStatus::fail;
      } else if (recs.size() < 3) {
        v.status = VerdictStatus::skipped;
        v.detail = "insufficient data: decay not yet resolved with fewer than 3 records";
      } else {
        v.status = VerdictStatus::fail;
      }
    }
    out.push_back(v);
  }

  {
    Verdict v;
    v.id = "power-rate";
    const bool applicable = k > 0.0 && k < p && r < k * p / (p - k);
    if (!applicable) {
      v.detail = "requires 0 < k < p and r < kp/(p-k)";
    } else {
      const double bound = r - k * p / (p - k);
      v.measured["bound_exponent"] = bound;
      bool all_floor = !recs.empty();
      for (const auto& rec : recs)
        all_floor = all_floor && rec.err_w1p <= fits.power.floor;
      if (all_floor) {
        v.status = VerdictStatus::pass;
        v.detail = "every error at the floor";
      } else if (!fits.power.sufficient) {
        v.status = VerdictStatus::skipped;
        v.detail = "insufficient data: fewer than 3 points above the floor";
      } else {
        v.measured["fitted_exponent"] = fits.power.exponent;
        v.measured["r2"] = fits.power.r2;
        v.measured["points"] = double(fits.power.points_used);
        const bool ok = fits.power.points_used >= 3 && fits.power.r2 >= th.power_min_r2 &&
                        fits.power.exponent <= bound + th.power_slack;
        v.status = ok ? VerdictStatus::pass : VerdictStatus::fail;
        v.detail = "fitted exponent <= r - kp/(p-k) + slack";
      }
    }
    out.push_back(v);
  }

  {
    Verdict v;
    v.id = "exponential-rate";
    const bool applicable = k == 0.0 && d.beta() > 0.0;
    if (!applicable) {
      v.detail = "requires k = 0 and uniformly strictly convex F''";
    } else {
      bool all_floor = !recs.empty();
      for (const auto& rec : recs)
        all_floor = all_floor && std::pow(rec.err_grad_p, 1.0 / p) <= fits.exponential.floor;
      if (all_floor) {
        v.status = VerdictStatus::pass;
        v.detail = "every error at the floor";
      } else if (!fits.exponential.sufficient) {
        v.status = VerdictStatus::skipped;
        v.detail = "insufficient data: fewer than 3 points above the floor";
      } else {
        v.measured["alpha"] = fits.exponential.exponent;
        v.measured["r2"] = fits.exponential.r2;
        v.measured["points"] = double(fits.exponential.points_used);
        const bool ok = fits.exponential.exponent > 0.0 && fits.exponential.r2 >= th.exponential_min_r2;
        v.status = ok ? VerdictStatus::pass : VerdictStatus::fail;
        v.detail = "alpha > 0 with R^2 above threshold";
      }
    }
    out.push_back(v);
  }
  return out;
}

} // namespace elongate
