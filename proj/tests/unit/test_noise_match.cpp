#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "rdq/error.hpp"
#include "rdq/noise_match.hpp"
#include "rdq/stats.hpp"

using namespace rdq;

namespace {

// Per-coordinate (sU + Z)^2 samples for integer-lattice parameters.
std::vector<double> squared_samples(const NoiseParams& p, std::size_t count, Rng& rng) {
  std::vector<double> out(count);
  for (auto& v : out) {
    const double e = p.s * (rng.uniform() - 0.5) + sample_weibull_one(p.lambda, p.k, rng);
    v = e * e;
  }
  return out;
}

}  // namespace

TEST_CASE("integer matching agrees with bracketing on the original equations") {
  // Frozen from the oracle (and separately from a scipy root find).
  struct Row {
    double k, s, lambda;
  };
  const std::vector<Row> frozen = {
      {0.5, 3.253244215469569, 0.07012890102324741},
      {1.0, 2.711252359948532, 0.4401283260157161},
      {1.2, 2.420104549964122, 0.5833053572133288},
  };
  for (const auto& row : frozen) {
    CAPTURE(row.k);
    const auto p = solve_weibull_integer(row.k);
    const auto o = oracle::integer_match(row.k);
    CHECK(p.s == doctest::Approx(o.s).epsilon(1e-12));
    CHECK(p.lambda == doctest::Approx(o.lambda).epsilon(1e-11));
    CHECK(p.s == doctest::Approx(row.s).epsilon(1e-12));
    CHECK(p.lambda == doctest::Approx(row.lambda).epsilon(1e-11));
    const auto r = integer_match_residuals(p);
    CHECK(std::abs(r[0]) < 1e-9);
    CHECK(std::abs(r[1]) < 1e-9);
  }
}

TEST_CASE("light-tailed shapes cannot reach the target variance") {
  CHECK_THROWS_AS(solve_weibull_integer(2.0), Error);
  try {
    solve_weibull_integer(5.0);
    FAIL("expected DiscriminantNegative");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDiscriminantNegative);
  }
  CHECK_NOTHROW(solve_weibull_integer(1.44));
  try {
    solve_weibull_integer(-1.0);
    FAIL("expected DomainError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomainError);
  }
}

TEST_CASE("scale gap is positive and matches the direct difference") {
  for (double k : {0.05, 0.1, 0.3, 0.5, 1.0, 1.4}) {
    CAPTURE(k);
    const double gap = integer_scale_gap(k);
    CHECK(gap > 0.0);
    CHECK(gap == doctest::Approx(2.0 * std::numbers::sqrt3 - solve_weibull_integer(k).s).epsilon(1e-6));
  }
  // Small shapes push both lambda and the gap toward zero.
  CHECK(integer_scale_gap(0.05) < 1e-2);
  CHECK(solve_weibull_integer(0.05).lambda < 1e-2);
}

TEST_CASE("gamma function and targets") {
  CHECK(gamma_fn(5.0) == doctest::Approx(24.0).epsilon(1e-14));
  CHECK(gamma_fn(0.5) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-14));
  CHECK_THROWS_AS(gamma_fn(0.0), Error);
  CHECK_THROWS_AS(gamma_fn(-2.5), Error);
  const auto t = moment_targets(1);
  CHECK(t.mean == 1.0);
  CHECK(t.variance == 2.0);
  CHECK(moment_targets(240).variance == 480.0);
  CHECK_THROWS_AS(moment_targets(0), Error);
}

TEST_CASE("monte-carlo per-coordinate moments hit the chi-squared targets") {
  for (double k : {0.5, 1.0}) {
    CAPTURE(k);
    const auto p = solve_weibull_integer(k);
    Rng rng(derive_seed(31, static_cast<std::uint64_t>(k * 10)));
    const auto x = squared_samples(p, 400000, rng);
    const auto m = stats::sample_moments(x);
    CHECK(std::abs(m.mean - 1.0) < 4.0 * m.se_mean);
    CHECK(std::abs(m.variance - 2.0) < 4.0 * m.se_variance);
  }
}

TEST_CASE("weibull sampler matches its analytic moments") {
  NoiseParams p;
  p.k = 1.3;
  p.lambda = 0.7;
  Rng rng(8);
  const auto z = sample_weibull(p, 200000, rng);
  const auto m = stats::sample_moments(z);
  CHECK(std::abs(m.mean - oracle::weibull_moment(0.7, 1.3, 1)) < 4.0 * m.se_mean);
}

TEST_CASE("general matching on D4 and E8") {
  for (auto name : {LatticeName::kD4, LatticeName::kE8}) {
    const auto l = make_lattice(name);
    CAPTURE(l.label());
    Rng rng(17);
    const auto est = estimate_block_moments(l, 200000, rng);
    CHECK(est.odd_cross < 0.05);
    // Tabulated mean is E||V||^2 / m for root lattices.
    CHECK(est.mean_sq / l.dim() == doctest::Approx(l.analytic_moments()->mean.value()).epsilon(0.01));
    const auto g = solve_general(est, l, 1.0);
    CHECK(std::abs(g.residuals[0]) < 1e-6);
    CHECK(std::abs(g.residuals[1]) < 1e-6);
    CHECK(g.params.s * g.params.s * est.mean_sq < l.dim());
    const auto r = general_match_residuals(est, g.params);
    CHECK(std::abs(r[0]) < 1e-6);
  }
}

TEST_CASE("general matching on Z1 reproduces the closed form") {
  const auto l = make_lattice(LatticeName::kZn, 1);
  Rng rng(4);
  auto est = estimate_block_moments(l, 1000, rng);
  // Replace the estimates with the exact uniform moments.
  est.mean_sq = 1.0 / 12.0;
  est.mean_quartic = 1.0 / 80.0;
  est.offdiag = 0.0;
  const auto g = solve_general(est, l, 1.0);
  const auto p = solve_weibull_integer(1.0);
  CHECK(g.params.s == doctest::Approx(p.s).epsilon(1e-9));
  CHECK(g.params.lambda == doctest::Approx(p.lambda).epsilon(1e-9));
}
