#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rdq/analysis.hpp"
#include "rdq/error.hpp"

using namespace rdq;

namespace {

const NoiseParams& k1() {
  static const NoiseParams p = solve_weibull_integer(1.0);
  return p;
}

// Integral of f over (0, inf) in t = sqrt(x), split at the kink t = s/2.
double boost_mass(const NoiseParams& p) {
  auto g = [&](double t) { return 2.0 * t * density_squared_marginal(p, t * t); };
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  return ts.integrate(g, 0.0, p.s / 2.0) + es.integrate(g, p.s / 2.0, INFINITY);
}

}  // namespace

TEST_CASE("density of the squared marginal") {
  const auto& p = k1();
  CHECK(density_squared_marginal(p, -1.0) == 0.0);
  CHECK(density_squared_marginal(p, 0.0) == 0.0);
  CHECK(boost_mass(p) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(boost_mass(solve_weibull_integer(0.5)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(density_squared_mass(p, 0.0, 1e4) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(density_squared_mass(p, 0.0, 1.0) == doctest::Approx(boost::math::quadrature::tanh_sinh<double>().integrate(
                                                  [&](double t) { return 2.0 * t * density_squared_marginal(p, t * t); },
                                                  0.0, 1.0))
                                                  .epsilon(1e-10));
  // Near zero sqrt(x) f(x) tends to half of 2/s (1 - exp(-(s/(2 lambda))^k)):
  // the density of |sU+Z| at 0 is C and dx = 2t dt contributes the other 1/2.
  const double c = 2.0 / p.s * (1.0 - std::exp(-std::pow(p.s / (2.0 * p.lambda), p.k)));
  CHECK(std::sqrt(1e-10) * density_squared_marginal(p, 1e-10) == doctest::Approx(c / 2.0).epsilon(1e-4));
}

TEST_CASE("first two moments of the marginal are the matching targets") {
  const auto& p = k1();
  boost::math::quadrature::tanh_sinh<double> ts;
  // The Weibull tail is below 1e-50 by t = 60.
  auto moment = [&](int r) {
    auto g = [&](double t) { return std::pow(t * t, r) * 2.0 * t * density_squared_marginal(p, t * t); };
    return ts.integrate(g, 0.0, p.s / 2.0) + ts.integrate(g, p.s / 2.0, 60.0);
  };
  const double m1 = moment(1);
  CHECK(m1 == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(moment(2) - m1 * m1 == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("chi-squared density") {
  CHECK(chi2_density(2, 0.5) == doctest::Approx(0.5 * std::exp(-0.25)).epsilon(1e-14));
  CHECK(chi2_density(3, -1.0) == 0.0);
  const double c5 = 1.0 / (std::pow(2.0, 2.5) * boost::math::tgamma(2.5));
  CHECK(chi2_density(5, 1.7) == doctest::Approx(c5 * std::pow(1.7, 1.5) * std::exp(-0.85)).epsilon(1e-13));
  boost::math::quadrature::exp_sinh<double> es;
  const double mean = es.integrate([](double x) { return x * chi2_density(10, x); }, 0.0, INFINITY);
  CHECK(std::abs(mean - 10.0) < 1e-8);
  // Large n stays finite thanks to log space.
  CHECK(std::isfinite(chi2_density(2000, 2000.0)));
  CHECK(chi2_log_density(2000, 2000.0) == doctest::Approx(std::log(chi2_density(2000, 2000.0))));
}

TEST_CASE("grid convolution") {
  const auto& p = k1();
  const double dx = p.s * p.s / 400.0;
  const auto base = make_marginal_grid(p, dx, 60.0);
  CHECK(base.mass() == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : base.values) REQUIRE(v >= 0.0);
  CHECK(base.mean() == doctest::Approx(1.0).epsilon(1e-3));

  const auto one = convolve_n(base, 1);
  REQUIRE(one.grid.values.size() == base.values.size());
  double diff = 0.0;
  for (std::size_t i = 0; i < base.values.size(); ++i) diff = std::max(diff, std::abs(one.grid.values[i] - base.values[i]));
  CHECK(diff < 1e-9);

  const auto two = convolve_n(base, 2);
  CHECK(two.grid.mass() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(two.grid.mean() == doctest::Approx(2.0 * base.mean()).epsilon(1e-3));

  // At n = 10 the range n + 12 sqrt(n) clips about 0.4% of the variance, so
  // the 0.1% check starts at n = 20.
  for (int n : {20, 40}) {
    CAPTURE(n);
    const double upper = n + 12.0 * std::sqrt(static_cast<double>(n));
    const auto g = make_marginal_grid(p, std::min(0.01, dx), upper);
    const auto c = convolve_n(g, n);
    CHECK(c.mass_error < 1e-4);
    CHECK(c.grid.mean() == doctest::Approx(n).epsilon(1e-3));
    CHECK(c.grid.variance() == doctest::Approx(2.0 * n).epsilon(1e-3));
  }
  CHECK_THROWS_AS(convolve_n(base, 0), Error);
}

TEST_CASE("exact divergence decays like 1/n") {
  const std::vector<int> ns = {10, 20, 40, 80, 160, 320};
  std::vector<double> kl;
  for (int n : ns) {
    const auto r = kl_exact(k1(), n);
    CHECK(r.method == KLMethod::kFftExact);
    CHECK(r.kl_bits >= 0.0);
    CHECK(r.diagnostics.grid_mass_error < 1e-4);
    kl.push_back(r.kl_bits);
  }
  for (std::size_t i = 0; i + 1 < kl.size(); ++i) CHECK(kl[i + 1] < kl[i]);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double cnt = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double lx = std::log(ns[i]), ly = std::log(kl[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  CHECK(slope >= -1.25);
  CHECK(slope <= -0.75);
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 2; i < ns.size(); ++i) {
    lo = std::min(lo, kl[i] * ns[i]);
    hi = std::max(hi, kl[i] * ns[i]);
  }
  CHECK(hi / lo < 3.0);
  CHECK_THROWS_AS(kl_exact(k1(), 4), Error);
  NoiseParams d4 = k1();
  d4.lattice = make_lattice(LatticeName::kD4);
  CHECK_THROWS_AS(kl_exact(d4, 20), Error);
}

TEST_CASE("sample estimator agrees with the exact divergence") {
  Rng rng(5);
  const auto knn = kl_knn(k1(), 20, 100000, 5, rng);
  const auto exact = kl_exact(k1(), 20);
  CHECK(knn.method == KLMethod::kKnnSample);
  CHECK(knn.diagnostics.knn_k == 5);
  CHECK(knn.diagnostics.standard_error > 0.0);
  CHECK(std::abs(knn.kl_bits_raw - exact.kl_bits) < 3.0 * knn.diagnostics.standard_error);
  CHECK(knn.kl_bits >= 0.0);

  Rng a(6), b(6);
  CHECK(kl_knn(k1(), 10, 20000, 5, a).kl_bits_raw == kl_knn(k1(), 10, 20000, 5, b).kl_bits_raw);
  CHECK_THROWS_AS(kl_knn(k1(), 10, 5000, 5, a), Error);
}

TEST_CASE("sample estimator sees no divergence between identical distributions") {
  Rng rng(7);
  std::vector<double> p(100000), q(100000);
  auto chi2 = [&](int n) {
    double s = 0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.normal();
      s += g * g;
    }
    return s;
  };
  for (auto& v : p) v = chi2(20);
  for (auto& v : q) v = chi2(20);
  const auto est = knn_divergence_1d(p, q, 5);
  CHECK(std::abs(est.bits) < 0.01);
}

TEST_CASE("excess information of the root lattices") {
  // Printed bound per lattice, bits per dimension.
  const std::vector<std::pair<const char*, double>> printed = {
      {"A1", 0.25461}, {"A2", 0.22686}, {"A3", 0.21376}, {"A4", 0.20709}, {"D4", 0.19387}, {"D5", 0.18613},
      {"D6", 0.18427}, {"D7", 0.18518}, {"D8", 0.18735}, {"E6", 0.17230}, {"E7", 0.16139}, {"E8", 0.14597},
  };
  for (const auto& [name, value] : printed) {
    CAPTURE(name);
    CHECK(std::abs(excess_bound_lattice(parse_lattice(name)) - value) < 1e-4);
  }
  const auto leech = excess_bound_lattice_detail(make_lattice(LatticeName::kLeech));
  CHECK(std::abs(leech.bits_per_dim - 0.08389) <= 0.00081);
  CHECK(leech.uncertainty == doctest::Approx(0.00081).epsilon(0.05));
  // Z^n is a scaled product of A1 cells; the bound is scale and product invariant.
  CHECK(excess_bound_lattice(make_lattice(LatticeName::kZn, 3)) ==
        doctest::Approx(excess_bound_lattice(make_lattice(LatticeName::kA1))).epsilon(1e-12));
}

TEST_CASE("excess information of layered quantization") {
  const double ref = 0.5 * std::log2(std::numbers::pi) +
                     (1.0 - boost::math::digamma(1.5)) / (2.0 * std::numbers::ln2) - 1.0;
  const double v = excess_bound_layered();
  CHECK(v == doctest::Approx(ref).epsilon(1e-14));
  CHECK(v <= 0.521);
  CHECK(std::abs(v - 0.5208) < 5e-4);
  CHECK(v > 2.0 * excess_bound_lattice(make_lattice(LatticeName::kA1)) - 0.02);
}

TEST_CASE("empirical rate") {
  ChannelConfig cfg;
  cfg.n = 64;
  cfg.noise = solve_weibull_integer(1.0);
  cfg.seeds = {1, 2, 3};
  Rng rng(8);
  const auto r = rate_estimate(cfg, 0.3, 10000, rng);
  CHECK(r.trials == 10000);
  CHECK(r.mutual_info_per_dim == doctest::Approx(0.5 * std::log2(1.09)));
  CHECK(r.excess_per_dim == doctest::Approx(r.h_k_per_dim - r.mutual_info_per_dim));
  CHECK(r.excess_per_dim >= 0.0);
  CHECK(r.excess_per_dim <= 0.6);

  Rng again(8);
  CHECK(rate_estimate(cfg, 0.3, 10000, again).h_k_per_dim == r.h_k_per_dim);

  // For a wide source each K_i is a dithered step-s quantization of N(0, sigma^2),
  // so the pooled marginal entropy exceeds I by about 1/2 log2(2 pi e / s^2).
  Rng wide(10);
  const double limit = 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e / (cfg.noise.s * cfg.noise.s));
  CHECK(std::abs(rate_estimate(cfg, 10.0, 10000, wide).excess_per_dim - limit) < 0.01);

  Rng small(9);
  const auto tiny = rate_estimate(cfg, 1e-3, 10000, small);
  CHECK(tiny.h_k_per_dim <= 2.0);
  CHECK_THROWS_AS(rate_estimate(cfg, 1.0, 100, small), Error);
}
