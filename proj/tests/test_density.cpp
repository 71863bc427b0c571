#include <catch_amalgamated.hpp>

#include <random>

#include "elongate/density.hpp"

using namespace elongate;
using Catch::Approx;

namespace {

std::vector<EnergyDensity> builtins(int r = 1, int n = 2)
{
  return {EnergyDensity::quadratic(r, n),        EnergyDensity::p_dirichlet(2, r, n),
          EnergyDensity::p_dirichlet(3, r, n),   EnergyDensity::p_dirichlet(4, r, n),
          EnergyDensity::p_dirichlet(6.5, r, n), EnergyDensity::separable_p(2, r, n),
          EnergyDensity::separable_p(3, r, n),   EnergyDensity::separable_p(4, r, n)};
}

std::vector<double> random_vector(std::mt19937_64& rng, int n, double scale = 1.0)
{
  std::normal_distribution<double> N(0.0, scale);
  std::vector<double> x(n);
  for (auto& v : x)
    v = N(rng);
  return x;
}

double norm2(std::span<const double> x)
{
  double s = 0;
  for (double v : x)
    s += v * v;
  return s;
}

} // namespace

TEST_CASE("density values at reference points")
{
  CHECK(EnergyDensity::p_dirichlet(2, 1, 2).value(std::vector<double>{3, 4}) == Approx(12.5));
  CHECK(EnergyDensity::p_dirichlet(4, 1, 2).value(std::vector<double>{1, 1}) == Approx(1.0));
  CHECK(EnergyDensity::p_dirichlet(4, 1, 2).value_vertical(std::vector<double>{1}) == Approx(0.25));
  for (const auto& d : builtins(1, 3)) {
    CHECK(d.value(std::vector<double>{0, 0, 0}) == 0.0);
    CHECK(d.value_vertical(std::vector<double>{0, 0}) == 0.0);
  }
  CHECK_THROWS_AS(EnergyDensity::p_dirichlet(1.5, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(EnergyDensity::quadratic(2, 2), std::invalid_argument);
  CHECK_THROWS_AS(EnergyDensity::quadratic(1, 2).value(std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("built-in parameter table")
{
  const auto q = EnergyDensity::quadratic(1, 2);
  CHECK(q.p() == 2.0);
  CHECK(q.k() == 0.0);
  CHECK(q.beta() == 0.5);
  CHECK(EnergyDensity::p_dirichlet(2, 1, 2).k() == 0.0);
  CHECK(EnergyDensity::p_dirichlet(4, 1, 2).k() == 2.0);
  CHECK(EnergyDensity::p_dirichlet(4, 1, 2).split_bounds().lambda == 0.25);
  CHECK(EnergyDensity::p_dirichlet(4, 1, 2).split_bounds().Lambda == 0.25);
  CHECK(EnergyDensity::separable_p(4, 1, 2).k() == 0.0);
  CHECK(density_kind_from_string("pdirichlet") == DensityKind::p_dirichlet);
  CHECK(density_kind_from_string("p-dirichlet") == DensityKind::p_dirichlet);
  CHECK_THROWS_AS(density_kind_from_string("cubic"), std::invalid_argument);
  for (const auto& d : builtins()) {
    CHECK(d.full_bounds().lambda <= d.full_bounds().Lambda);
    CHECK(d.split_bounds().lambda <= d.split_bounds().Lambda);
  }
}

TEST_CASE("analytic gradients")
{
  std::vector<double> g(2);
  EnergyDensity::quadratic(1, 2).gradient(std::vector<double>{3, 4}, g);
  CHECK(g == std::vector<double>{3, 4});
  EnergyDensity::p_dirichlet(4, 1, 2).gradient(std::vector<double>{1, 0}, g);
  CHECK(g[0] == Approx(1.0));
  CHECK(g[1] == 0.0);
  for (const auto& d : builtins()) {
    d.gradient(std::vector<double>{0, 0}, g);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
  }
}

TEST_CASE("gradient matches central finite differences")
{
  std::mt19937_64 rng(11);
  for (const auto& d : builtins(1, 3))
    for (int i = 0; i < 100; ++i) {
      auto xi = random_vector(rng, 3);
      std::vector<double> g(3);
      d.gradient(xi, g);
      const double h = 1e-5;
      double err = 0, mag = 0;
      for (int j = 0; j < 3; ++j) {
        auto a = xi, b = xi;
        a[j] += h;
        b[j] -= h;
        const double fd = (d.value(a) - d.value(b)) / (2 * h);
        err = std::max(err, std::abs(fd - g[j]));
        mag = std::max(mag, std::abs(g[j]));
      }
      CHECK(err <= 1e-6 * std::max(mag, 1.0));
    }
}

TEST_CASE("vertical part equals F at zero horizontal gradient")
{
  std::mt19937_64 rng(3);
  for (const auto& d : builtins(1, 3))
    for (int i = 0; i < 100; ++i) {
      auto xv = random_vector(rng, 2, 3.0);
      std::vector<double> xi{0.0, xv[0], xv[1]};
      CHECK(std::abs(d.value(xi) - d.value_vertical(xv)) <= 1e-14 * (1 + std::abs(d.value(xi))));
      std::vector<double> gf(3), gv(2);
      d.gradient(xi, gf);
      d.gradient_vertical(xv, gv);
      CHECK(gv[0] == Approx(gf[1]));
      CHECK(gv[1] == Approx(gf[2]));
    }
}

TEST_CASE("split identity, nonnegativity of G and its closed forms")
{
  std::mt19937_64 rng(5);
  const auto p4 = EnergyDensity::p_dirichlet(4, 2, 4);
  const auto s3 = EnergyDensity::separable_p(3, 2, 4);
  for (int i = 0; i < 1000; ++i) {
    const auto xi = random_vector(rng, 4, 2.0);
    for (const auto& d : builtins(2, 4)) {
      const double F = d.value(xi);
      const double G = d.split_remainder(xi);
      const double Fv = d.value_vertical(std::span<const double>(xi).subspan(2));
      CHECK(std::abs(F - Fv - G) <= 1e-14 * (1 + std::abs(F)));
      CHECK(G >= -1e-14);
    }
    // (a + b)^2 - b^2 = a^2 + 2ab with a = |xi'|^2, b = |xi''|^2.
    const double a = xi[0] * xi[0] + xi[1] * xi[1];
    const double b = xi[2] * xi[2] + xi[3] * xi[3];
    CHECK(p4.split_remainder(xi) == Approx((a * a + 2 * a * b) / 4).epsilon(1e-13));
    CHECK(s3.split_remainder(xi) == Approx(std::pow(a, 1.5) / 3).epsilon(1e-13));
  }
  for (const auto& d : builtins(1, 2))
    CHECK(d.split_remainder(std::vector<double>{0.0, 1.7}) == Approx(0.0).margin(1e-15));
}

TEST_CASE("certified split constants hold on a dense ratio scan")
{
  // G / (|xi'|^p + k|xi''|^(p-k)|xi'|^k) depends only on |xi'| / |xi''| by
  // homogeneity; scan that ratio over many decades.
  for (double p : {3.0, 4.0, 5.0, 6.5, 9.0}) {
    const auto d = EnergyDensity::p_dirichlet(p, 1, 2);
    const double k = d.k();
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (int i = 0; i <= 4000; ++i) {
      const double x = std::pow(10.0, -6.0 + 12.0 * i / 4000.0);
      const std::vector<double> xi{x, 1.0};
      const double coupled = std::pow(x, p) + k * std::pow(x, k);
      const double ratio = d.split_remainder(xi) / coupled;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    INFO("p = " << p);
    CHECK(d.split_bounds().lambda <= lo * (1 + 1e-9));
    CHECK(d.split_bounds().Lambda >= hi * (1 - 1e-9));
  }
}

TEST_CASE("growth audits pass with certified constants")
{
  for (const auto& d : builtins(1, 2)) {
    const auto rep = audit_growth(d, 20000, 9);
    INFO(to_string(d.kind()) << " p=" << d.p() << " worst=" << rep.worst_margin);
    CHECK(rep.passed());
    CHECK(rep.worst_margin <= 0.0);
    CHECK(rep.samples == 20000);
  }
}

TEST_CASE("growth audit detects a wrong coercivity constant")
{
  const auto rep = audit_growth(EnergyDensity::quadratic(1, 2).with_lambda(0.6), 2000, 1);
  CHECK(rep.violations > 0);
  CHECK(rep.worst_margin > 0.0);
  REQUIRE(!rep.witnesses.empty());
  CHECK(rep.witnesses.size() <= kMaxWitnesses);
  CHECK(rep.witnesses.front().margin > 0.0);
}

TEST_CASE("uniform strict convexity audit")
{
  CHECK(audit_uniform_strict_convexity(EnergyDensity::quadratic(1, 3), 20000, 2).passed());
  const auto bad = audit_uniform_strict_convexity(EnergyDensity::quadratic(1, 3).with_beta(0.6), 2000, 2);
  CHECK(bad.violations > 0);
  CHECK(bad.worst_margin > 0.0);
  CHECK_THROWS_AS(audit_uniform_strict_convexity(EnergyDensity::p_dirichlet(4, 1, 2), 10, 1),
                  std::invalid_argument);

  const auto d = EnergyDensity::quadratic(1, 2);
  const std::vector<double> a{1.3}, b{-0.4};
  CHECK(strict_convexity_margin(d, 0.5, a, b, 0.0) == 0.0);
  CHECK(strict_convexity_margin(d, 0.5, a, b, 1.0) == 0.0);
  // Parallelogram identity: the quadratic excess is exactly theta mu |a-b|^2 / 2.
  CHECK(strict_convexity_margin(d, 0.5, a, b, 0.3) == 0.0);
}

TEST_CASE("empirical beta of the quadratic density")
{
  const double beta = estimate_beta(EnergyDensity::quadratic(1, 2), 2000, 4);
  CHECK(beta == Approx(0.5).margin(1e-6));
}

TEST_CASE("midpoint convexity")
{
  for (const auto& d : builtins(1, 2))
    CHECK(audit_convexity_midpoint(d, 5000, 3).passed());
  auto concave = [](std::span<const double> x) { return -norm2(x); };
  const auto rep = audit_convexity_midpoint(concave, 2, 1000, 3);
  CHECK(rep.violations > 0);
  CHECK(rep.worst_margin > 0.0);
}

TEST_CASE("audits are deterministic and violation count matches the worst margin")
{
  const auto d = EnergyDensity::quadratic(1, 2).with_lambda(0.55);
  const auto a = audit_growth(d, 3000, 42), b = audit_growth(d, 3000, 42);
  CHECK(a.violations == b.violations);
  CHECK(a.worst_margin == b.worst_margin);
  REQUIRE(a.witnesses.size() == b.witnesses.size());
  for (std::size_t i = 0; i < a.witnesses.size(); ++i)
    CHECK(a.witnesses[i].xi == b.witnesses[i].xi);
  for (const auto& rep : {a, audit_growth(EnergyDensity::quadratic(1, 2), 3000, 42)})
    CHECK((rep.violations == 0) == (rep.worst_margin <= 0.0));
}
