#pragma once

// Convex energy densities F on R^n split as F(xi', xi'') = F''(xi'') + G(xi),
// and sampling audits of the structural hypotheses they are declared to satisfy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elongate/geometry.hpp"
#include "elongate/parallel.hpp"

namespace elongate {

enum class DensityKind { p_dirichlet, separable_p, quadratic };

inline std::string to_string(DensityKind k)
{
  switch (k) {
  case DensityKind::p_dirichlet: return "p-dirichlet";
  case DensityKind::separable_p: return "separable-p";
  case DensityKind::quadratic: return "quadratic";
  }
  return "?";
}

inline DensityKind density_kind_from_string(const std::string& s)
{
  if (s == "p-dirichlet" || s == "pdirichlet")
    return DensityKind::p_dirichlet;
  if (s == "separable-p")
    return DensityKind::separable_p;
  if (s == "quadratic")
    return DensityKind::quadratic;
  throw std::invalid_argument("unknown density kind '" + s + "'");
}

/// Two-sided constants lambda <= Lambda of a power bound.
struct GrowthBounds {
  double lambda = 0.0;
  double Lambda = 0.0;
};

namespace detail {

// s^(p/2) for s >= 0, with exact fast paths for the common exponents.
inline double pow_half(double s, double p)
{
  if (p == 2.0)
    return s;
  if (p == 4.0)
    return s * s;
  if (s == 0.0)
    return 0.0;
  return std::pow(s, 0.5 * p);
}

inline double squared_norm(std::span<const double> x)
{
  double s = 0.0;
  for (double v : x)
    s += v * v;
  return s;
}

} // namespace detail

/// Built-in energy density with certified hypothesis constants.
///
///  - p-dirichlet  F = |xi|^p / p,                  k = 2 (p > 2) or 0 (p = 2)
///  - separable-p  F = (|xi'|^p + |xi''|^p) / p,    k = 0
///  - quadratic    F = |xi|^2 / 2,                  p = 2, k = 0, beta = 1/2
///
/// `full` holds the constants of lambda|xi|^p <= F <= Lambda(|xi|^p + 1) and
/// `split` those of the two-sided bound on G. `beta` is the coefficient of the
/// uniform strict convexity excess of F'' (0 when not claimed).
class EnergyDensity {
public:
  static EnergyDensity p_dirichlet(double p, int r, int n)
  {
    check_dims(r, n);
    check_p(p);
    EnergyDensity d(DensityKind::p_dirichlet, p, r, n);
    d.full_ = {1.0 / p, 1.0 / p};
    if (p == 2.0) {
      d.k_ = 0.0;
      d.split_ = {0.5, 0.5};
      d.beta_ = 0.5;
    } else if (p == 4.0) {
      // G = (|xi'|^4 + 2|xi'|^2|xi''|^2)/4 exactly.
      d.k_ = 2.0;
      d.split_ = {0.25, 0.25};
    } else {
      // With q = p/2, a = |xi'|^2, b = |xi''|^2:
      //   max(a^q, q a b^(q-1)) <= (a+b)^q - b^q <= q max(1, 2^(q-2)) (a^q + a b^(q-1)).
      const double q = 0.5 * p;
      d.k_ = 2.0;
      d.split_ = {std::min(1.0, 0.5 * q) / (2.0 * p), std::max(1.0, std::pow(2.0, q - 2.0)) / 2.0};
    }
    return d;
  }

  static EnergyDensity separable_p(double p, int r, int n)
  {
    check_dims(r, n);
    check_p(p);
    EnergyDensity d(DensityKind::separable_p, p, r, n);
    // 2^(1-p/2)|xi|^p <= |xi'|^p + |xi''|^p <= |xi|^p for p >= 2.
    d.full_ = {std::pow(2.0, 1.0 - 0.5 * p) / p, 1.0 / p};
    d.split_ = {1.0 / p, 1.0 / p};
    d.k_ = 0.0;
    d.beta_ = p == 2.0 ? 0.5 : 0.0;
    return d;
  }

  static EnergyDensity quadratic(int r, int n)
  {
    check_dims(r, n);
    EnergyDensity d(DensityKind::quadratic, 2.0, r, n);
    d.full_ = {0.5, 0.5};
    d.split_ = {0.5, 0.5};
    d.k_ = 0.0;
    d.beta_ = 0.5;
    return d;
  }

  static EnergyDensity make(DensityKind kind, double p, int r, int n)
  {
    switch (kind) {
    case DensityKind::p_dirichlet: return p_dirichlet(p, r, n);
    case DensityKind::separable_p: return separable_p(p, r, n);
    case DensityKind::quadratic: return quadratic(r, n);
    }
    throw std::invalid_argument("unknown density kind");
  }

  DensityKind kind() const { return kind_; }
  double p() const { return p_; }
  double k() const { return k_; }
  double beta() const { return beta_; }
  int r() const { return r_; }
  int n() const { return n_; }
  const GrowthBounds& full_bounds() const { return full_; }
  const GrowthBounds& split_bounds() const { return split_; }

  /// True when the density is a quadratic form in xi (p = 2 for every kind).
  bool is_quadratic_form() const { return p_ == 2.0; }

  /// Overrides the coercivity constant lambda on both bounds (used to probe
  /// audits with deliberately wrong constants).
  EnergyDensity with_lambda(double lambda) const
  {
    EnergyDensity d = *this;
    d.full_.lambda = lambda;
    d.split_.lambda = lambda;
    return d;
  }

  EnergyDensity with_Lambda(double Lambda) const
  {
    EnergyDensity d = *this;
    d.full_.Lambda = Lambda;
    d.split_.Lambda = Lambda;
    return d;
  }

  EnergyDensity with_bounds(GrowthBounds full, GrowthBounds split) const
  {
    EnergyDensity d = *this;
    d.full_ = full;
    d.split_ = split;
    return d;
  }

  EnergyDensity with_beta(double beta) const
  {
    if (beta < 0.0)
      throw std::invalid_argument("beta must be nonnegative");
    EnergyDensity d = *this;
    d.beta_ = beta;
    return d;
  }

  double value(std::span<const double> xi) const
  {
    check_len(xi.size(), n_);
    switch (kind_) {
    case DensityKind::quadratic:
      return 0.5 * detail::squared_norm(xi);
    case DensityKind::p_dirichlet:
      return detail::pow_half(detail::squared_norm(xi), p_) / p_;
    case DensityKind::separable_p:
      return (detail::pow_half(detail::squared_norm(xi.first(r_)), p_) +
              detail::pow_half(detail::squared_norm(xi.subspan(r_)), p_)) / p_;
    }
    return 0.0;
  }

  void gradient(std::span<const double> xi, std::span<double> out) const
  {
    check_len(xi.size(), n_);
    check_len(out.size(), n_);
    switch (kind_) {
    case DensityKind::quadratic:
      std::copy(xi.begin(), xi.end(), out.begin());
      return;
    case DensityKind::p_dirichlet: {
      const double w = radial_weight(detail::squared_norm(xi));
      for (int i = 0; i < n_; ++i)
        out[i] = w * xi[i];
      return;
    }
    case DensityKind::separable_p: {
      const double wh = radial_weight(detail::squared_norm(xi.first(r_)));
      const double wv = radial_weight(detail::squared_norm(xi.subspan(r_)));
      for (int i = 0; i < n_; ++i)
        out[i] = (i < r_ ? wh : wv) * xi[i];
      return;
    }
    }
  }

  /// F''(xi'') = F(0, xi'').
  double value_vertical(std::span<const double> xv) const
  {
    check_len(xv.size(), n_ - r_);
    const double s = detail::squared_norm(xv);
    return kind_ == DensityKind::quadratic ? 0.5 * s : detail::pow_half(s, p_) / p_;
  }

  void gradient_vertical(std::span<const double> xv, std::span<double> out) const
  {
    check_len(xv.size(), n_ - r_);
    const double w = kind_ == DensityKind::quadratic ? 1.0 : radial_weight(detail::squared_norm(xv));
    for (std::size_t i = 0; i < xv.size(); ++i)
      out[i] = w * xv[i];
  }

  /// G(xi) = F(xi) - F''(xi'').
  double split_remainder(std::span<const double> xi) const
  {
    check_len(xi.size(), n_);
    const double a = detail::squared_norm(xi.first(r_));
    if (kind_ == DensityKind::separable_p)
      return detail::pow_half(a, p_) / p_;
    if (kind_ == DensityKind::quadratic || p_ == 2.0)
      return 0.5 * a;
    const double b = detail::squared_norm(xi.subspan(r_));
    if (p_ == 4.0)
      return (a * a + 2.0 * a * b) / 4.0;
    if (b == 0.0)
      return detail::pow_half(a, p_) / p_;
    // (a + b)^(p/2) - b^(p/2) without cancellation.
    return std::pow(b, 0.5 * p_) * std::expm1(0.5 * p_ * std::log1p(a / b)) / p_;
  }

private:
  EnergyDensity(DensityKind kind, double p, int r, int n) : kind_(kind), p_(p), r_(r), n_(n) {}

  // |x|^(p-2) given |x|^2, continuous at 0 for p >= 2.
  double radial_weight(double s) const
  {
    if (p_ == 2.0)
      return 1.0;
    if (p_ == 4.0)
      return s;
    if (s == 0.0)
      return 0.0;
    return std::pow(s, 0.5 * (p_ - 2.0));
  }

  static void check_dims(int r, int n)
  {
    if (!(n > r && r >= 1 && n <= kMaxDim))
      throw std::invalid_argument("density: need kMaxDim >= n > r >= 1");
  }

  static void check_p(double p)
  {
    if (!(p >= 2.0))
      throw std::invalid_argument("density: exponent p must be >= 2");
  }

  static void check_len(std::size_t got, int want)
  {
    if (static_cast<int>(got) != want)
      throw std::invalid_argument("density: expected vector of length " + std::to_string(want) +
                                  ", got " + std::to_string(got));
  }

  DensityKind kind_;
  double p_;
  double k_ = 0.0;
  double beta_ = 0.0;
  int r_;
  int n_;
  GrowthBounds full_{};
  GrowthBounds split_{};
};

// ---------------------------------------------------------------------------
// Hypothesis audits

struct Witness {
  std::vector<double> xi;
  std::vector<double> zeta;
  double theta = 0.0;
  double margin = 0.0;
};

/// Result of sampling one hypothesis. A margin is the amount by which the
/// inequality fails, normalised by the magnitude of its terms: positive means
/// violated, values within round-off of zero are reported as exactly 0.
struct HypothesisReport {
  std::string hypothesis;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  std::vector<Witness> witnesses;

  bool passed() const { return violations == 0; }
};

inline constexpr double kAuditTolerance = 1e-12;
inline constexpr std::size_t kMaxWitnesses = 8;

namespace detail {

// splitmix64 finaliser; one independent stream per sample index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline double normalized_margin(double lhs, double rhs, double magnitude)
{
  const double m = (lhs - rhs) / (1e-300 + magnitude);
  return std::abs(m) <= kAuditTolerance ? 0.0 : m;
}

// Random vector of length `len` with log-uniform magnitude in [1e-3, 1e3] and
// a uniformly distributed direction.
template <class Rng>
void sample_vector(Rng& rng, std::span<double> out)
{
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> expo(-3.0, 3.0);
  double s = 0.0;
  do {
    s = 0.0;
    for (double& v : out) {
      v = normal(rng);
      s += v * v;
    }
  } while (s == 0.0);
  const double scale = std::pow(10.0, expo(rng)) / std::sqrt(s);
  for (double& v : out)
    v *= scale;
}

struct SampleOutcome {
  double margin;
  Witness witness;
};

// Collects per-sample margins computed in parallel into a report, in sample
// order, so the report does not depend on the thread count.
template <class Sampler>
HypothesisReport run_audit(std::string name, std::size_t samples, Sampler&& sampler)
{
  if (samples < 1)
    throw std::invalid_argument("audit: samples must be >= 1");
  std::vector<SampleOutcome> outcomes(samples);
  parallel_for(samples, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      outcomes[i] = sampler(i);
  }, 4096);

  HypothesisReport rep;
  rep.hypothesis = std::move(name);
  rep.samples = samples;
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < samples; ++i) {
    rep.worst_margin = std::max(rep.worst_margin, outcomes[i].margin);
    if (outcomes[i].margin > 0.0) {
      ++rep.violations;
      bad.push_back(i);
    }
  }
  std::stable_sort(bad.begin(), bad.end(), [&](std::size_t a, std::size_t b) {
    return outcomes[a].margin > outcomes[b].margin;
  });
  for (std::size_t j = 0; j < bad.size() && j < kMaxWitnesses; ++j)
    rep.witnesses.push_back(outcomes[bad[j]].witness);
  return rep;
}

} // namespace detail

/// Samples lambda|xi|^p <= F <= Lambda(|xi|^p + 1) and
/// lambda_G(|xi'|^p + k|xi''|^(p-k)|xi'|^k) <= G <= Lambda_G(same).
/// Each sample reports the worst of the four inequalities.
inline HypothesisReport audit_growth(const EnergyDensity& d, std::size_t samples,
                                     std::uint64_t seed)
{
  const int n = d.n(), r = d.r();
  const double p = d.p(), k = d.k();
  const auto full = d.full_bounds();
  const auto split = d.split_bounds();
  return detail::run_audit("growth", samples, [&](std::size_t i) {
    std::mt19937_64 rng(detail::mix_seed(seed, i));
    std::array<double, kMaxDim> buf{};
    std::span<double> xi(buf.data(), n);
    // Independent magnitudes for the two blocks probe every ratio |xi'|/|xi''|.
    detail::sample_vector(rng, xi.first(r));
    detail::sample_vector(rng, xi.subspan(r));

    const double F = d.value(xi);
    const double G = d.split_remainder(xi);
    const double np = detail::pow_half(detail::squared_norm(xi), p);
    const double hp = std::sqrt(detail::squared_norm(xi.first(r)));
    const double vp = std::sqrt(detail::squared_norm(xi.subspan(r)));
    const double coupled = std::pow(hp, p) + (k > 0.0 ? k * std::pow(vp, p - k) * std::pow(hp, k) : 0.0);

    const double m1 = detail::normalized_margin(full.lambda * np, F, full.lambda * np + F);
    const double m2 = detail::normalized_margin(F, full.Lambda * (np + 1.0), F + full.Lambda * (np + 1.0));
    const double m3 = detail::normalized_margin(split.lambda * coupled, G, split.lambda * coupled + std::abs(G));
    const double m4 = detail::normalized_margin(G, split.Lambda * coupled, std::abs(G) + split.Lambda * coupled);
    const double m = std::max({m1, m2, m3, m4});
    return detail::SampleOutcome{m, Witness{{xi.begin(), xi.end()}, {}, 0.0, m}};
  });
}

/// Margin of F''(theta a + mu b) <= theta F''(a) + mu F''(b)
///   - beta theta mu (theta^(p-1) + mu^(p-1)) |a - b|^p,   mu = 1 - theta.
inline double strict_convexity_margin(const EnergyDensity& d, double beta,
                                      std::span<const double> a,
                                      std::span<const double> b, double theta)
{
  const double mu = 1.0 - theta;
  const double p = d.p();
  std::array<double, kMaxDim> mix{};
  double dist2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mix[i] = theta * a[i] + mu * b[i];
    dist2 += (a[i] - b[i]) * (a[i] - b[i]);
  }
  const double lhs = d.value_vertical({mix.data(), a.size()});
  const double fa = theta * d.value_vertical(a);
  const double fb = mu * d.value_vertical(b);
  const double excess = beta * theta * mu * (std::pow(theta, p - 1.0) + std::pow(mu, p - 1.0)) *
                        detail::pow_half(dist2, p);
  return detail::normalized_margin(lhs, fa + fb - excess, std::abs(lhs) + fa + fb + excess);
}

/// Samples the uniform strict convexity inequality of F'' with the declared beta.
inline HypothesisReport audit_uniform_strict_convexity(const EnergyDensity& d,
                                                       std::size_t samples,
                                                       std::uint64_t seed)
{
  if (!(d.beta() > 0.0))
    throw std::invalid_argument("audit_uniform_strict_convexity: density declares beta = 0");
  const int m = d.n() - d.r();
  const double beta = d.beta();
  return detail::run_audit("uniform-strict-convexity", samples, [&](std::size_t i) {
    std::mt19937_64 rng(detail::mix_seed(seed, i));
    std::array<double, kMaxDim> a{}, b{};
    detail::sample_vector(rng, {a.data(), std::size_t(m)});
    detail::sample_vector(rng, {b.data(), std::size_t(m)});
    const double theta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double mg = strict_convexity_margin(d, beta, {a.data(), std::size_t(m)},
                                              {b.data(), std::size_t(m)}, theta);
    return detail::SampleOutcome{
        mg, Witness{{a.begin(), a.begin() + m}, {b.begin(), b.begin() + m}, theta, mg}};
  });
}

/// Largest beta in [0, beta_max] for which `samples` random triples satisfy the
/// uniform strict convexity inequality; found by bisection. Empirical only.
inline double estimate_beta(const EnergyDensity& d, std::size_t samples, std::uint64_t seed,
                            double beta_max = 1.0, int iterations = 40)
{
  double lo = 0.0, hi = beta_max;
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (audit_uniform_strict_convexity(d.with_beta(mid), samples, seed).passed())
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

/// Midpoint convexity F((a+b)/2) <= (F(a) + F(b))/2 of any callable
/// double(std::span<const double>) on R^dim.
template <class Fn>
HypothesisReport audit_convexity_midpoint(Fn&& f, int dim, std::size_t samples,
                                          std::uint64_t seed)
{
  if (dim < 1 || dim > kMaxDim)
    throw std::invalid_argument("audit_convexity_midpoint: bad dimension");
  return detail::run_audit("midpoint-convexity", samples, [&](std::size_t i) {
    std::mt19937_64 rng(detail::mix_seed(seed, i));
    std::array<double, kMaxDim> a{}, b{}, mid{};
    detail::sample_vector(rng, {a.data(), std::size_t(dim)});
    detail::sample_vector(rng, {b.data(), std::size_t(dim)});
    for (int j = 0; j < dim; ++j)
      mid[j] = 0.5 * (a[j] + b[j]);
    const double fm = f(std::span<const double>(mid.data(), dim));
    const double fa = f(std::span<const double>(a.data(), dim));
    const double fb = f(std::span<const double>(b.data(), dim));
    const double mg = detail::normalized_margin(fm, 0.5 * (fa + fb),
                                                std::abs(fm) + 0.5 * (std::abs(fa) + std::abs(fb)));
    return detail::SampleOutcome{
        mg, Witness{{a.begin(), a.begin() + dim}, {b.begin(), b.begin() + dim}, 0.5, mg}};
  });
}

inline HypothesisReport audit_convexity_midpoint(const EnergyDensity& d, std::size_t samples,
                                                 std::uint64_t seed)
{
  return audit_convexity_midpoint([&d](std::span<const double> x) { return d.value(x); },
                                  d.n(), samples, seed);
}

} // namespace elongate
