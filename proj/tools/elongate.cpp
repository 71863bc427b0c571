// elongate: command-line front end for solves, sweeps, decay profiles and
// density audits.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 solver failure,
// 3 verdict or audit failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "elongate.hpp"

namespace fs = std::filesystem;
using namespace elongate;

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kSolver = 2, kVerdict = 3 };

struct Common {
  std::string config;
  std::string out;
};

RunConfig read_config(const Common& c)
{
  RunConfig cfg = load_config(c.config);
  if (!c.out.empty())
    cfg.output.directory = c.out;
  cfg.validate();
  return cfg;
}

void print_budget(const RunConfig& cfg, const std::vector<double>& ells)
{
  for (double ell : ells) {
    const double nodes = estimate_node_count(cfg.domain_spec(ell), cfg.grid.target_h);
    std::printf("ell = %g: %.0f nodes\n", ell, nodes);
  }
  std::printf("node budget: %zu\n", cfg.grid.max_nodes);
}

void write_resolved(const RunConfig& cfg)
{
  write_json_atomic(fs::path(cfg.output.directory) / "resolved-config.json", to_json(cfg));
}

void dump_field(const RunConfig& cfg, const ScalarField& f, const std::string& stem)
{
  const fs::path dir(cfg.output.directory);
  if (cfg.wants("bin"))
    write_file_atomic(dir / (stem + ".bin"), encode_field(f));
  if (cfg.wants("csv"))
    write_file_atomic(dir / (stem + ".csv"), field_csv(f));
}

struct SingleSolve {
  SolveResult u;
  SolveResult limit;
  ScalarField limit_ext;
};

SingleSolve solve_largest(const RunConfig& cfg)
{
  const double ell = cfg.domain.ell_list.back();
  const auto spec = cfg.domain_spec(ell);
  const auto d = cfg.make_density();
  const auto f = cfg.make_load();
  const auto opts = cfg.solve_options();
  auto grid = std::make_shared<const Grid>(spec, cfg.grid.target_h, cfg.grid.max_nodes);
  auto vgrid = std::make_shared<const Grid>(Grid::vertical(spec, cfg.grid.target_h, cfg.grid.max_nodes));
  auto limit = solve_limit(vgrid, d, f, opts);
  auto u = minimize(grid, d, f, opts);
  auto ext = extend_vertical(limit.field, grid);
  return {std::move(u), std::move(limit), std::move(ext)};
}

int cmd_solve(const Common& c, bool dry_run)
{
  const RunConfig cfg = read_config(c);
  if (dry_run) {
    print_budget(cfg, {cfg.domain.ell_list.back()});
    return kOk;
  }
  write_resolved(cfg);
  auto s = solve_largest(cfg);
  const auto d = cfg.make_density();
  const auto f = cfg.make_load();

  MinimalityAuditOptions ao;
  ao.perturbations = cfg.study.audit_perturbations;
  ao.blends = cfg.study.audit_blends;
  ao.seed = cfg.study.audit_seed;
  ao.grad_tol = cfg.solve_options().grad_tol;
  const auto audit = minimality_audit(s.u.field, s.limit_ext, d, f, ao);

  const auto rec = measure(s.u.field, s.limit_ext, d.p(), std::min(cfg.study.ell0, cfg.domain.ell_list.back()));
  const fs::path dir(cfg.output.directory);
  dump_field(cfg, s.u.field, "field");
  dump_field(cfg, s.limit.field, "limit-field");
  write_json_atomic(dir / "solve-report.json",
                    {{"ell", cfg.domain.ell_list.back()},
                     {"solve", to_json(s.u.report)},
                     {"limit_solve", to_json(s.limit.report)},
                     {"measurements", to_json(rec)}});
  write_json_atomic(dir / "minimality-audit.json", to_json(audit));

  std::printf("solve: ell=%g converged=%d iterations=%zu energy=%.12g\n", cfg.domain.ell_list.back(),
              int(s.u.report.converged), s.u.report.iterations, s.u.report.energy);
  std::printf("minimality audit: %zu trials, %zu violations\n", audit.trials, audit.violations);
  if (!s.u.report.converged || !s.limit.report.converged) {
    std::fprintf(stderr, "error: solver did not converge\n");
    return kSolver;
  }
  return audit.passed() ? kOk : kVerdict;
}

std::vector<std::pair<double, double>> plot_points(const std::vector<std::pair<double, double>>& pts,
                                                   bool log_x)
{
  std::vector<std::pair<double, double>> out;
  for (const auto& [ell, e] : pts)
    if (e > 0.0)
      out.emplace_back(log_x ? std::log(ell) : ell, std::log(e));
  return out;
}

int cmd_sweep(const Common& c, bool dry_run)
{
  const RunConfig cfg = read_config(c);
  if (dry_run) {
    print_budget(cfg, cfg.domain.ell_list);
    return kOk;
  }
  write_resolved(cfg);
  const auto sc = cfg.sweep_config();
  const auto result = run_sweep(sc);
  const double p = sc.density.p();
  const double floor = cfg.fit_floor();
  const auto fits = fit_sweep(result.records, p, floor, floor);
  VerdictThresholds th;
  th.floor = floor;
  const auto verdicts = theorem_verdicts(result.records, sc.density, fits, th);

  const fs::path dir(cfg.output.directory);
  if (cfg.wants("csv"))
    write_file_atomic(dir / "sweep.csv", sweep_csv(result.records));
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : result.records)
    recs.push_back(to_json(r));
  if (cfg.wants("json"))
    write_json_atomic(dir / "records.json", recs);

  nlohmann::json fj = nlohmann::json::object();
  nlohmann::json vj = nlohmann::json::array();
  for (auto m : cfg.study.fit_models)
    fj[to_string(m)] = to_json(m == RateModel::exponential ? fits.exponential : fits.power);
  for (const auto& v : verdicts)
    vj.push_back(to_json(v));
  write_json_atomic(dir / "fits.json", fj);
  write_json_atomic(dir / "verdicts.json", vj);
  write_file_atomic(dir / "plot-exponential.dat", two_column(plot_points(grad_error_points(result.records, p), false)));
  write_file_atomic(dir / "plot-power.dat", two_column(plot_points(w1p_error_points(result.records), true)));

  for (const auto& r : result.records) {
    std::printf("ell=%-6g iters=%-6zu converged=%d err_grad_p=%.6e err_w1p=%.6e hgrad_p=%.6e\n", r.ell,
                r.iters, int(r.converged), r.err_grad_p, r.err_w1p, r.hgrad_p);
    if (!r.converged)
      std::fprintf(stderr, "warning: ell = %g did not converge; excluded from fits\n", r.ell);
  }
  for (auto m : cfg.study.fit_models) {
    const auto& fit = m == RateModel::exponential ? fits.exponential : fits.power;
    if (!fit.sufficient)
      std::fprintf(stderr, "warning: %s fit has insufficient data (%zu points above floor %.3g)\n",
                   to_string(m).c_str(), fit.points_used, fit.floor);
    else
      std::printf("%s fit: exponent=%.6g C=%.6g R2=%.6f points=%zu\n", to_string(m).c_str(), fit.exponent,
                  fit.C, fit.r2, fit.points_used);
  }
  bool failed = false;
  for (const auto& v : verdicts) {
    std::printf("verdict %-30s %s\n", v.id.c_str(), to_string(v.status).c_str());
    failed = failed || v.status == VerdictStatus::fail;
  }
  return failed ? kVerdict : kOk;
}

int cmd_profile(const Common& c, bool dry_run)
{
  const RunConfig cfg = read_config(c);
  const double ell = cfg.domain.ell_list.back();
  if (dry_run) {
    print_budget(cfg, {ell});
    return kOk;
  }
  write_resolved(cfg);
  auto s = solve_largest(cfg);
  if (!s.u.report.converged || !s.limit.report.converged) {
    std::fprintf(stderr, "error: solver did not converge\n");
    return kSolver;
  }
  std::vector<double> ts;
  for (int t = 1; double(t) <= ell + 1e-12; ++t)
    ts.push_back(double(t));
  const auto prof = saint_venant_profile(s.u.field, s.limit_ext, cfg.make_density().p(), ts);
  const fs::path dir(cfg.output.directory);
  write_file_atomic(dir / "profile.csv", profile_csv(prof));
  write_json_atomic(dir / "solve-report.json",
                    {{"ell", ell}, {"solve", to_json(s.u.report)}, {"limit_solve", to_json(s.limit.report)}});
  for (const auto& [t, g] : prof.points)
    std::printf("t=%-4g g=%.6e\n", t, g);
  return kOk;
}

struct AuditArgs {
  std::string kind = "p-dirichlet";
  double p = 4.0;
  int r = 1;
  int n = 2;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  std::optional<double> lambda, Lambda, beta;
};

int cmd_audit_density(const AuditArgs& a, const Common& c, bool dry_run)
{
  EnergyDensity d = EnergyDensity::quadratic(1, 2);
  std::string out_dir = c.out;
  if (!c.config.empty()) {
    RunConfig cfg = load_config(c.config);
    if (out_dir.empty())
      out_dir = cfg.output.directory;
    d = cfg.make_density();
  } else {
    try {
      d = EnergyDensity::make(density_kind_from_string(a.kind), a.p, a.r, a.n);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (a.lambda)
    d = d.with_lambda(*a.lambda);
  if (a.Lambda)
    d = d.with_Lambda(*a.Lambda);
  if (a.beta)
    d = d.with_beta(*a.beta);
  if (a.samples == 0)
    throw ConfigError("--samples must be positive");
  if (dry_run) {
    std::printf("audit of %s (p = %g): %zu samples per hypothesis, no grid\n", to_string(d.kind()).c_str(),
                d.p(), a.samples);
    return kOk;
  }

  std::vector<HypothesisReport> reports;
  reports.push_back(audit_growth(d, a.samples, a.seed));
  reports.push_back(audit_convexity_midpoint(d, a.samples, a.seed));
  if (d.beta() > 0.0)
    reports.push_back(audit_uniform_strict_convexity(d, a.samples, a.seed));

  nlohmann::json rj = nlohmann::json::array();
  bool ok = true;
  for (const auto& r : reports) {
    rj.push_back(to_json(r));
    ok = ok && r.passed();
  }
  const nlohmann::json doc{{"density",
                            {{"kind", to_string(d.kind())},
                             {"p", d.p()},
                             {"r", d.r()},
                             {"n", d.n()},
                             {"k", d.k()},
                             {"beta", d.beta()},
                             {"full_bounds", {{"lambda", d.full_bounds().lambda}, {"Lambda", d.full_bounds().Lambda}}},
                             {"split_bounds",
                              {{"lambda", d.split_bounds().lambda}, {"Lambda", d.split_bounds().Lambda}}}}},
                           {"seed", a.seed},
                           {"reports", rj},
                           {"passed", ok}};
  if (!out_dir.empty())
    write_json_atomic(fs::path(out_dir) / "audit-density.json", doc);
  std::cout << doc.dump(2) << "\n";
  return ok ? kOk : kVerdict;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Variational minimisation on elongated domains"};
  app.require_subcommand(1);
  bool dry_run = false;
  app.add_flag("--dry-run", dry_run, "Validate the configuration and print the node budget without solving");

  Common solve_args, sweep_args, profile_args, audit_common;
  AuditArgs audit_args;

  auto add_common = [](CLI::App* sub, Common& c, bool config_required) {
    auto* opt = sub->add_option("--config", c.config, "JSON run configuration");
    if (config_required)
      opt->required();
    sub->add_option("--out", c.out, "Output directory (overrides output.directory)");
  };

  auto* solve = app.add_subcommand("solve", "Solve one problem at the largest ell and audit minimality");
  add_common(solve, solve_args, true);
  auto* sweep = app.add_subcommand("sweep", "Run an ell sweep with rate fits and verdicts");
  add_common(sweep, sweep_args, true);
  auto* profile = app.add_subcommand("profile", "Decay profile g(t) at the largest ell");
  add_common(profile, profile_args, true);
  auto* audit = app.add_subcommand("audit-density", "Sample the hypotheses of an energy density");
  add_common(audit, audit_common, false);
  audit->add_option("--kind", audit_args.kind, "p-dirichlet, separable-p or quadratic");
  audit->add_option("--p", audit_args.p, "Exponent p >= 2");
  audit->add_option("--r", audit_args.r, "Number of horizontal variables");
  audit->add_option("--n", audit_args.n, "Total dimension");
  audit->add_option("--samples", audit_args.samples, "Samples per hypothesis");
  audit->add_option("--seed", audit_args.seed, "Random seed");
  audit->add_option("--lambda", audit_args.lambda, "Override the coercivity constant");
  audit->add_option("--Lambda", audit_args.Lambda, "Override the growth constant");
  audit->add_option("--beta", audit_args.beta, "Override the strict convexity constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (solve->parsed())
      return cmd_solve(solve_args, dry_run);
    if (sweep->parsed())
      return cmd_sweep(sweep_args, dry_run);
    if (profile->parsed())
      return cmd_profile(profile_args, dry_run);
    if (audit->parsed())
      return cmd_audit_density(audit_args, audit_common, dry_run);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kSolver;
  } catch (const ResourceError& e) {
    std::fprintf(stderr, "resource error: %s\n", e.what());
    return kConfig;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  }
  return kConfig;
}
