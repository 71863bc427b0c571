#include <catch_amalgamated.hpp>

#include <random>

#include "elongate/solver.hpp"

using namespace elongate;
using Catch::Approx;

namespace {

DomainSpec strip(double ell) { return DomainSpec{CrossSection::unit_box(1), ell, {1.0}, 2}; }

GridPtr vertical_grid(double h) { return std::make_shared<const Grid>(Grid::vertical(strip(1), h)); }

SolveOptions tight(const EnergyDensity& d)
{
  auto o = SolveOptions::defaults_for(d);
  o.grad_tol = d.is_quadratic_form() ? 1e-12 : 1e-10;
  return o;
}

} // namespace

TEST_CASE("1-D oracle satisfies the first-order condition")
{
  const auto o2 = oracle_1d(2, 2);
  CHECK(o2(0.0) == Approx(1.0));
  CHECK(o2(0.5) == Approx(0.75));
  const auto o4 = oracle_1d(4, 2);
  CHECK(o4(0.0) == Approx(0.75 * std::cbrt(2.0)));
  CHECK(o4(0.0) == Approx(0.94494).epsilon(1e-5));
  for (double p : {2.0, 3.0, 4.0, 7.0})
    for (double f : {0.5, 2.0, 5.0}) {
      const auto u = oracle_1d(p, f);
      CHECK(u(1.0) == Approx(0.0).margin(1e-15));
      CHECK(u(-1.0) == Approx(0.0).margin(1e-15));
      // (|u'|^(p-2) u')' = -f, checked by differences of the flux and of u.
      for (double x : {-0.8, -0.3, 0.2, 0.65}) {
        const double h = 1e-5;
        auto flux = [&](double y) {
          const double du = u.derivative(y);
          return std::pow(std::abs(du), p - 2.0) * du;
        };
        CHECK((flux(x + h) - flux(x - h)) / (2 * h) == Approx(-f).epsilon(1e-6));
        CHECK((u(x + h) - u(x - h)) / (2 * h) == Approx(u.derivative(x)).epsilon(1e-6));
      }
    }
  CHECK_THROWS_AS(oracle_1d(1.5, 2), std::invalid_argument);
  CHECK_THROWS_AS(oracle_1d(2, 0), std::invalid_argument);
}

TEST_CASE("quadratic limit problem reproduces 1 - x^2")
{
  const auto d = EnergyDensity::quadratic(1, 2);
  const Load f = Load::constant(2.0);
  std::vector<double> interp_err;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    auto vg = vertical_grid(h);
    const auto res = solve_limit(vg, d, f, tight(d));
    REQUIRE(res.report.converged);
    double nodal = 0, between = 0;
    for (std::size_t i = 0; i < vg->num_nodes(); ++i) {
      const double x = vg->node_coordinate(i, 0);
      nodal = std::max(nodal, std::abs(res.field[i] - (1 - x * x)));
      if (i + 1 < vg->num_nodes()) {
        const double xm = x + 0.5 * h;
        const double um = 0.5 * (res.field[i] + res.field[i + 1]);
        between = std::max(between, std::abs(um - (1 - xm * xm)));
      }
    }
    CHECK(nodal <= 10 * h * h);
    interp_err.push_back(std::max(nodal, between));
  }
  // Nodal values are exact up to round-off for this scheme, so refinement is
  // measured on the piecewise-linear reconstruction.
  for (std::size_t i = 1; i < interp_err.size(); ++i)
    CHECK(interp_err[i - 1] / interp_err[i] >= 3.5);
}

TEST_CASE("p = 4 limit problem matches the closed form")
{
  const auto d = EnergyDensity::p_dirichlet(4, 1, 2);
  const auto u = oracle_1d(4, 2);
  for (double h : {1.0 / 16, 1.0 / 32}) {
    auto vg = vertical_grid(h);
    const auto res = solve_limit(vg, d, Load::constant(2.0, 4), tight(d));
    REQUIRE(res.report.converged);
    double err = 0;
    for (std::size_t i = 0; i < vg->num_nodes(); ++i)
      err = std::max(err, std::abs(res.field[i] - u(vg->node_coordinate(i, 0))));
    CHECK(err <= 10 * h);
  }
}

TEST_CASE("zero load gives the zero field")
{
  for (const auto& d : {EnergyDensity::quadratic(1, 2), EnergyDensity::p_dirichlet(4, 1, 2),
                        EnergyDensity::separable_p(3, 1, 2)}) {
    auto g = std::make_shared<const Grid>(strip(2), 0.25);
    const auto res = minimize(g, d, Load::constant(0.0, d.p()), SolveOptions::defaults_for(d));
    CHECK(res.report.converged);
    CHECK(res.field.max_abs() == 0.0);
    CHECK(res.report.energy == 0.0);
    const auto lim = solve_limit(vertical_grid(0.25), d, Load::constant(0.0, d.p()), SolveOptions::defaults_for(d));
    CHECK(lim.field.max_abs() == 0.0);
  }
}

TEST_CASE("converged solves meet the gradient threshold and descend monotonically")
{
  auto g = std::make_shared<const Grid>(strip(2), 1.0 / 8);
  for (auto method : {Method::linear_cg, Method::nonlinear_cg, Method::gradient_descent})
    for (const auto& d : {EnergyDensity::quadratic(1, 2), EnergyDensity::p_dirichlet(4, 1, 2)}) {
      if (method == Method::linear_cg && !d.is_quadratic_form())
        continue;
      SolveOptions o = SolveOptions::defaults_for(d);
      o.method = method;
      o.grad_tol = 1e-8;
      o.record_history = true;
      const Load f = Load::constant(2.0, d.p());
      const auto res = minimize(g, d, f, o);
      INFO(to_string(method) << " p=" << d.p());
      REQUIRE(res.report.converged);
      CHECK(res.report.grad_norm <= res.report.grad_threshold);
      CHECK(res.report.grad_threshold == Approx(1e-8 * gradient_scale(*g, f)));
      CHECK(res.report.method == to_string(method));
      const auto& hist = res.report.energy_history;
      REQUIRE(!hist.empty());
      for (std::size_t i = 1; i < hist.size(); ++i)
        CHECK(hist[i] <= hist[i - 1] + 1e-14 * std::max(1.0, std::abs(hist[i - 1])));
      CHECK(res.report.energy < 0.0);
      // First-order optimality through the public assembly.
      const auto grad = assemble_energy_gradient(res.field, d, f);
      double gmax = 0;
      for (double x : grad)
        gmax = std::max(gmax, std::abs(x));
      CHECK(gmax <= res.report.grad_threshold * (1 + 1e-9));
    }
}

TEST_CASE("solver option validation")
{
  auto g = std::make_shared<const Grid>(strip(1), 0.25);
  SolveOptions o;
  o.method = Method::linear_cg;
  CHECK_THROWS_AS(minimize(g, EnergyDensity::p_dirichlet(4, 1, 2), Load::constant(1.0, 4), o),
                  std::invalid_argument);
  o = {};
  o.grad_tol = 0;
  CHECK_THROWS(o.validate());
  o = {};
  o.armijo_c = 1.0;
  CHECK_THROWS(o.validate());
  o = {};
  o.backtrack = 0.0;
  CHECK_THROWS(o.validate());
  CHECK(method_from_string("nonlinear-cg") == Method::nonlinear_cg);
  CHECK_THROWS(method_from_string("newton"));
  CHECK_THROWS_AS(minimize(g, EnergyDensity::quadratic(1, 3), Load::constant(1.0), SolveOptions{}),
                  std::invalid_argument);
}

TEST_CASE("iteration cap is reported, not fatal")
{
  auto g = std::make_shared<const Grid>(strip(2), 1.0 / 16);
  const auto d = EnergyDensity::p_dirichlet(4, 1, 2);
  SolveOptions o = SolveOptions::defaults_for(d);
  o.max_iters = 3;
  const auto res = minimize(g, d, Load::constant(2.0, 4), o);
  CHECK_FALSE(res.report.converged);
  CHECK(res.report.iterations <= 3);
  CHECK(res.report.energy < 0.0);
}

TEST_CASE("warm start reaches the same energy")
{
  const auto d = EnergyDensity::p_dirichlet(4, 1, 2);
  const Load f = Load::constant(2.0, 4);
  const auto o = SolveOptions::defaults_for(d);
  auto small = std::make_shared<const Grid>(strip(2), 1.0 / 8);
  auto big = std::make_shared<const Grid>(strip(3), 1.0 / 8);
  const auto prev = minimize(small, d, f, o);
  const auto warm = embed_field(prev.field, big);
  REQUIRE(warm.has_value());
  const auto a = minimize(big, d, f, o);
  const auto b = minimize(big, d, f, o, warm);
  REQUIRE(a.report.converged);
  REQUIRE(b.report.converged);
  CHECK(std::abs(a.report.energy - b.report.energy) <= 10 * o.grad_tol * gradient_scale(*big, f));
  CHECK(b.report.iterations < a.report.iterations);
}

TEST_CASE("solves are deterministic")
{
  const auto d = EnergyDensity::p_dirichlet(4, 1, 2);
  auto g = std::make_shared<const Grid>(strip(2), 1.0 / 8);
  const auto a = minimize(g, d, Load::constant(2.0, 4), SolveOptions::defaults_for(d));
  const auto b = minimize(g, d, Load::constant(2.0, 4), SolveOptions::defaults_for(d));
  CHECK(a.report.iterations == b.report.iterations);
  CHECK(a.report.energy == b.report.energy);
  for (std::size_t i = 0; i < a.field.size(); ++i)
    CHECK(a.field[i] == b.field[i]);
}

TEST_CASE("limit energy beats random admissible fields")
{
  const auto d = EnergyDensity::quadratic(1, 2);
  auto vg = vertical_grid(1.0 / 16);
  const Load f = Load::constant(2.0);
  const auto res = solve_limit(vg, d, f, SolveOptions::defaults_for(d));
  const double j = assemble_limit_energy(res.field, d, f);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 0.3);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> w(vg->num_nodes());
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = res.field[i] + N(rng);
    CHECK(j <= assemble_limit_energy(ScalarField(vg, w), d, f));
  }
}

TEST_CASE("minimality audit on converged and perturbed solutions")
{
  for (const auto& d : {EnergyDensity::quadratic(1, 2), EnergyDensity::p_dirichlet(4, 1, 2)}) {
    const auto spec = strip(3);
    auto g = std::make_shared<const Grid>(spec, 1.0 / 8);
    auto vg = std::make_shared<const Grid>(Grid::vertical(spec, 1.0 / 8));
    const Load f = Load::constant(2.0, d.p());
    const auto o = SolveOptions::defaults_for(d);
    const auto u = minimize(g, d, f, o);
    const auto lim = solve_limit(vg, d, f, o);
    const auto ext = extend_vertical(lim.field, g);
    MinimalityAuditOptions ao;
    ao.grad_tol = o.grad_tol;
    const auto rep = minimality_audit(u.field, ext, d, f, ao);
    INFO("p = " << d.p() << " worst " << rep.worst_excess << " (" << rep.worst_kind << ")");
    CHECK(rep.passed());
    CHECK(rep.trials == 1 + ao.perturbations + ao.blends + 1 + ao.far_field_cuts);
    CHECK(rep.reference_energy <= 0.0);
    CHECK(rep.worst_excess >= 0.0); // the identity trial
    CHECK(rep.worst_excess <= rep.tolerance);

    // A field that is not a minimiser must be caught.
    std::vector<double> half(u.field.values().begin(), u.field.values().end());
    for (auto& x : half)
      x *= 0.5;
    const auto bad = minimality_audit(ScalarField(g, half), ext, d, f, ao);
    CHECK(bad.violations > 0);
    CHECK_FALSE(bad.violating.empty());
  }
}
