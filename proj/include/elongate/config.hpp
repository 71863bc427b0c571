#pragma once

// Run configuration: a single JSON document with the sections domain, grid,
// density, load, solver, study and output. Absent keys take defaults; the
// resolved form written back by `to_json` has every key explicit, so reading it
// again reproduces the run.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "elongate/density.hpp"
#include "elongate/field.hpp"
#include "elongate/geometry.hpp"
#include "elongate/solver.hpp"
#include "elongate/study.hpp"

namespace elongate {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  struct Domain {
    int r = 1;
    int n = 2;
    Shape cross_section = Shape::unit_box;
    std::vector<double> ell_list{2, 4, 6};
    std::vector<double> vertical_halfwidths{1.0};
  } domain;

  struct GridSection {
    double target_h = 0.0625;
    std::size_t max_nodes = kDefaultNodeBudget;
  } grid;

  struct DensitySection {
    DensityKind kind = DensityKind::quadratic;
    double p = 2.0;
    std::optional<double> lambda;
    std::optional<double> Lambda;
    std::optional<double> beta;
  } density;

  struct LoadSection {
    Load::Kind kind = Load::Kind::constant;
    double value = 2.0;
    std::vector<double> values;
  } load;

  struct SolverSection {
    std::optional<Method> method;
    std::optional<double> grad_tol;
    std::size_t max_iters = 200000;
    bool warm_start = true;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    double initial_step = 0.1;
  } solver;

  struct StudySection {
    double ell0 = 1.0;
    std::optional<double> floor;
    std::vector<RateModel> fit_models{RateModel::exponential, RateModel::power};
    std::size_t audit_perturbations = 100;
    std::size_t audit_blends = 20;
    std::uint64_t audit_seed = 1;
  } study;

  struct OutputSection {
    std::string directory = "out";
    std::vector<std::string> formats{"csv", "json", "bin"};
  } output;

  bool wants(const std::string& format) const
  {
    return std::find(output.formats.begin(), output.formats.end(), format) != output.formats.end();
  }

  DomainSpec domain_spec(double ell) const
  {
    DomainSpec s;
    s.cross_section = CrossSection::make(domain.cross_section, domain.r);
    s.n = domain.n;
    s.vertical_halfwidths = domain.vertical_halfwidths;
    s.ell = ell;
    return s;
  }

  EnergyDensity make_density() const
  {
    auto d = EnergyDensity::make(density.kind, density.p, domain.r, domain.n);
    if (density.lambda)
      d = d.with_lambda(*density.lambda);
    if (density.Lambda)
      d = d.with_Lambda(*density.Lambda);
    if (density.beta)
      d = d.with_beta(*density.beta);
    return d;
  }

  Load make_load() const
  {
    return load.kind == Load::Kind::constant ? Load::constant(load.value, density.p)
                                             : Load::sampled(load.values, density.p);
  }

  SolveOptions solve_options() const
  {
    SolveOptions o = SolveOptions::defaults_for(make_density());
    if (solver.method)
      o.method = *solver.method;
    if (solver.grad_tol)
      o.grad_tol = *solver.grad_tol;
    o.max_iters = solver.max_iters;
    o.armijo_c = solver.armijo_c;
    o.backtrack = solver.backtrack;
    o.initial_step = solver.initial_step;
    return o;
  }

  /// grad_tol times the gradient scale of the first grid, times 100.
  double default_floor() const
  {
    const auto spec = domain_spec(domain.ell_list.front());
    const Grid vg = Grid::vertical(spec, grid.target_h, grid.max_nodes);
    double vol = vg.cell_volume();
    for (int d = 0; d < domain.r; ++d) {
      const double extent = 2.0 * spec.ell;
      vol *= extent / double(detail::cells_for(extent, grid.target_h));
    }
    const double fs = make_load().sup_norm();
    return 100.0 * solve_options().grad_tol * (fs > 0.0 ? fs : 1.0) * vol;
  }

  double fit_floor() const { return study.floor ? *study.floor : default_floor(); }

  /// Checks every precondition that can be checked without solving. Throws
  /// ConfigError (or ResourceError for the node budget).
  void validate() const
  {
    try {
      if (domain.ell_list.empty())
        throw ConfigError("domain.ell_list must not be empty");
      for (std::size_t i = 1; i < domain.ell_list.size(); ++i)
        if (!(domain.ell_list[i] > domain.ell_list[i - 1]))
          throw ConfigError("domain.ell_list must be strictly ascending");
      for (double ell : domain.ell_list)
        domain_spec(ell).validate();
      if (!(grid.target_h > 0.0))
        throw ConfigError("grid.target_h must be positive");
      const auto d = make_density();
      if (load.kind == Load::Kind::sampled) {
        const Grid vg = Grid::vertical(domain_spec(domain.ell_list.front()), grid.target_h,
                                       grid.max_nodes);
        if (load.values.size() != vg.num_nodes())
          throw ConfigError("load.values must hold one value per vertical grid node (" +
                            std::to_string(vg.num_nodes()) + ")");
      }
      const auto o = solve_options();
      o.validate();
      if (o.method == Method::linear_cg && !d.is_quadratic_form())
        throw ConfigError("solver.method linear-cg requires p = 2");
      if (!(study.ell0 > 0.0 && study.ell0 <= domain.ell_list.front()))
        throw ConfigError("study.ell0 must lie in (0, smallest ell]");
      if (study.floor && !(*study.floor >= 0.0))
        throw ConfigError("study.floor must be nonnegative");
      if (output.directory.empty())
        throw ConfigError("output.directory must not be empty");
      for (const auto& fmt : output.formats)
        if (fmt != "csv" && fmt != "json" && fmt != "bin")
          throw ConfigError("unknown output format '" + fmt + "'");
      for (double ell : domain.ell_list)
        Grid::vertical(domain_spec(ell), grid.target_h, grid.max_nodes);
      const double largest = estimate_node_count(domain_spec(domain.ell_list.back()), grid.target_h);
      if (largest > double(grid.max_nodes))
        throw ResourceError("grid for ell = " + std::to_string(domain.ell_list.back()) + " needs " +
                            std::to_string(static_cast<long long>(largest)) +
                            " nodes, above grid.max_nodes = " + std::to_string(grid.max_nodes));
    } catch (const ConfigError&) {
      throw;
    } catch (const ResourceError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  SweepConfig sweep_config() const
  {
    SweepConfig s;
    s.domain = domain_spec(domain.ell_list.front());
    s.ells = domain.ell_list;
    s.target_h = grid.target_h;
    s.node_budget = grid.max_nodes;
    s.density = make_density();
    s.load = make_load();
    s.solver = solve_options();
    s.warm_start = solver.warm_start;
    s.ell0 = study.ell0;
    return s;
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback)
{
  if (!j.contains(key) || j.at(key).is_null())
    return fallback;
  return j.at(key).get<T>();
}

template <class T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key)
{
  if (!j.contains(key) || j.at(key).is_null())
    return std::nullopt;
  return j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, const char* section,
                           std::initializer_list<const char*> known)
{
  if (!j.is_object())
    throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + std::string(section) + "." + key + "'");
  }
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j)
{
  using detail::get_opt;
  using detail::get_or;
  RunConfig c;
  try {
    detail::reject_unknown(j, "config", {"domain", "grid", "density", "load", "solver", "study", "output"});
    if (j.contains("domain")) {
      const auto& d = j.at("domain");
      detail::reject_unknown(d, "domain", {"r", "n", "cross_section", "ell_list", "vertical_halfwidths"});
      c.domain.r = get_or(d, "r", c.domain.r);
      c.domain.n = get_or(d, "n", c.domain.n);
      c.domain.cross_section =
          shape_from_string(get_or<std::string>(d, "cross_section", to_string(c.domain.cross_section)));
      c.domain.ell_list = get_or(d, "ell_list", c.domain.ell_list);
      c.domain.vertical_halfwidths =
          get_or(d, "vertical_halfwidths",
                 std::vector<double>(std::size_t(std::max(c.domain.n - c.domain.r, 0)), 1.0));
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      detail::reject_unknown(g, "grid", {"target_h", "max_nodes"});
      c.grid.target_h = get_or(g, "target_h", c.grid.target_h);
      c.grid.max_nodes = get_or(g, "max_nodes", c.grid.max_nodes);
    }
    if (j.contains("density")) {
      const auto& d = j.at("density");
      detail::reject_unknown(d, "density", {"kind", "p", "lambda", "Lambda", "beta"});
      c.density.kind = density_kind_from_string(get_or<std::string>(d, "kind", to_string(c.density.kind)));
      c.density.p = get_or(d, "p", c.density.kind == DensityKind::quadratic ? 2.0 : c.density.p);
      c.density.lambda = get_opt<double>(d, "lambda");
      c.density.Lambda = get_opt<double>(d, "Lambda");
      c.density.beta = get_opt<double>(d, "beta");
    }
    if (j.contains("load")) {
      const auto& l = j.at("load");
      detail::reject_unknown(l, "load", {"kind", "value", "values"});
      const auto kind = get_or<std::string>(l, "kind", "constant");
      if (kind == "constant")
        c.load.kind = Load::Kind::constant;
      else if (kind == "sampled")
        c.load.kind = Load::Kind::sampled;
      else
        throw ConfigError("unknown load kind '" + kind + "'");
      c.load.value = get_or(l, "value", c.load.value);
      c.load.values = get_or(l, "values", c.load.values);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      detail::reject_unknown(s, "solver", {"method", "grad_tol", "max_iters", "warm_start", "armijo_c",
                                           "backtrack", "initial_step"});
      if (auto m = get_opt<std::string>(s, "method"))
        c.solver.method = method_from_string(*m);
      c.solver.grad_tol = get_opt<double>(s, "grad_tol");
      c.solver.max_iters = get_or(s, "max_iters", c.solver.max_iters);
      c.solver.warm_start = get_or(s, "warm_start", c.solver.warm_start);
      c.solver.armijo_c = get_or(s, "armijo_c", c.solver.armijo_c);
      c.solver.backtrack = get_or(s, "backtrack", c.solver.backtrack);
      c.solver.initial_step = get_or(s, "initial_step", c.solver.initial_step);
    }
    if (j.contains("study")) {
      const auto& s = j.at("study");
      detail::reject_unknown(s, "study", {"ell0", "floor", "fit_models", "audit_perturbations",
                                          "audit_blends", "audit_seed"});
      c.study.ell0 = get_or(s, "ell0", c.study.ell0);
      c.study.floor = get_opt<double>(s, "floor");
      if (s.contains("fit_models")) {
        c.study.fit_models.clear();
        for (const auto& m : s.at("fit_models"))
          c.study.fit_models.push_back(rate_model_from_string(m.get<std::string>()));
      }
      c.study.audit_perturbations = get_or(s, "audit_perturbations", c.study.audit_perturbations);
      c.study.audit_blends = get_or(s, "audit_blends", c.study.audit_blends);
      c.study.audit_seed = get_or(s, "audit_seed", c.study.audit_seed);
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      detail::reject_unknown(o, "output", {"directory", "formats"});
      c.output.directory = get_or(o, "directory", c.output.directory);
      c.output.formats = get_or(o, "formats", c.output.formats);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

/// Resolved form: every default made explicit.
inline nlohmann::json to_json(const RunConfig& c)
{
  const auto opts = c.solve_options();
  nlohmann::json density{{"kind", to_string(c.density.kind)}, {"p", c.density.p}};
  if (c.density.lambda)
    density["lambda"] = *c.density.lambda;
  if (c.density.Lambda)
    density["Lambda"] = *c.density.Lambda;
  if (c.density.beta)
    density["beta"] = *c.density.beta;

  nlohmann::json load{{"kind", c.load.kind == Load::Kind::constant ? "constant" : "sampled"}};
  if (c.load.kind == Load::Kind::constant)
    load["value"] = c.load.value;
  else
    load["values"] = c.load.values;

  std::vector<std::string> models;
  for (auto m : c.study.fit_models)
    models.push_back(to_string(m));

  return {
      {"domain",
       {{"r", c.domain.r},
        {"n", c.domain.n},
        {"cross_section", to_string(c.domain.cross_section)},
        {"ell_list", c.domain.ell_list},
        {"vertical_halfwidths", c.domain.vertical_halfwidths}}},
      {"grid", {{"target_h", c.grid.target_h}, {"max_nodes", c.grid.max_nodes}}},
      {"density", density},
      {"load", load},
      {"solver",
       {{"method", to_string(opts.method)},
        {"grad_tol", opts.grad_tol},
        {"max_iters", opts.max_iters},
        {"warm_start", c.solver.warm_start},
        {"armijo_c", opts.armijo_c},
        {"backtrack", opts.backtrack},
        {"initial_step", opts.initial_step}}},
      {"study",
       {{"ell0", c.study.ell0},
        {"floor", c.fit_floor()},
        {"fit_models", models},
        {"audit_perturbations", c.study.audit_perturbations},
        {"audit_blends", c.study.audit_blends},
        {"audit_seed", c.study.audit_seed}}},
      {"output", {{"directory", c.output.directory}, {"formats", c.output.formats}}}};
}

inline RunConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

} // namespace elongate
