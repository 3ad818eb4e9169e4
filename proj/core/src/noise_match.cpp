#include "rdq/noise_match.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rdq {

namespace {

constexpr double kTwoSqrt3 = 2.0 * std::numbers::sqrt3;
constexpr double kIntegerResidualTol = 1e-9;
constexpr double kGeneralResidualTol = 1e-6;
constexpr int kMaxNewtonIterations = 200;

void require_shape(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw Error(ErrorCode::kDomainError, "Weibull shape must be positive, got " + std::to_string(k));
  }
}

// ln Gamma(1 + r/k); Gamma(1 + r/k) overflows a double once r/k > 170.
double log_weibull_moment_factor(double r, double k) { return std::lgamma(1.0 + r / k); }

// z = E[Z^2] = lambda^2 Gamma(1+2/k) for the integer lattice. The closed form
// for s and lambda is rearranged as z = 6 / (6 + sqrt(30 (rho - 3))) with
// rho = Gamma(1+4/k) / Gamma(1+2/k)^2, which avoids the 0/0 at rho = 4.2.
double integer_noise_power(double k) {
  require_shape(k);
  const double log_rho = log_weibull_moment_factor(4.0, k) - 2.0 * log_weibull_moment_factor(2.0, k);
  const double rho = std::exp(log_rho);
  const double disc = rho - 3.0;
  if (!(disc >= 0.0)) {
    throw Error(ErrorCode::kDiscriminantNegative,
                "Gamma(1+4/k) - 3 Gamma(1+2/k)^2 < 0 at k = " + std::to_string(k));
  }
  return 6.0 / (6.0 + std::sqrt(30.0 * disc));
}

// Weibull raw moments mu_r = lambda^r Gamma(1 + r/k), r = 1..4, and their
// lambda-derivatives.
struct WeibullMoments {
  std::array<double, 5> mu{};
  std::array<double, 5> dmu{};
};

WeibullMoments weibull_moments(double lambda, double k) {
  WeibullMoments w;
  w.mu[0] = 1.0;
  for (int r = 1; r <= 4; ++r) {
    const double g = std::exp(log_weibull_moment_factor(r, k));
    w.mu[static_cast<std::size_t>(r)] = std::pow(lambda, r) * g;
    w.dmu[static_cast<std::size_t>(r)] = r * std::pow(lambda, r - 1) * g;
  }
  return w;
}

struct BlockEval {
  double mean = 0.0;
  double var = 0.0;
  // Jacobian of (mean, var) w.r.t. (s, lambda).
  double dmean_ds = 0.0;
  double dmean_dl = 0.0;
  double dvar_ds = 0.0;
  double dvar_dl = 0.0;
};

// ||sV + Z||^2 = s^2 A + 2 s B + C with A = ||V||^2, B = <V, Z>, C = ||Z||^2.
// Terms odd in V vanish by the symmetry V -> -V of the Voronoi cell.
BlockEval evaluate_block(const BlockMomentEstimates& est, double s, double lambda, double k) {
  const double m = est.m;
  const double a = est.mean_sq;
  const double a2 = est.mean_quartic;
  const double off = est.offdiag;
  const auto w = weibull_moments(lambda, k);
  const double mu1 = w.mu[1], mu2 = w.mu[2], mu4 = w.mu[4];
  const double dmu1 = w.dmu[1], dmu2 = w.dmu[2], dmu4 = w.dmu[4];

  const double e_b2 = a * mu2 + off * mu1 * mu1;
  const double e_c = m * mu2;
  const double e_c2 = m * mu4 + m * (m - 1.0) * mu2 * mu2;
  const double s2 = s * s;

  BlockEval out;
  out.mean = s2 * a + e_c;
  const double e4 = s2 * s2 * a2 + 4.0 * s2 * e_b2 + e_c2 + 2.0 * s2 * a * e_c;
  out.var = e4 - out.mean * out.mean;

  out.dmean_ds = 2.0 * s * a;
  out.dmean_dl = m * dmu2;
  const double de4_ds = 4.0 * s2 * s * a2 + 8.0 * s * e_b2 + 4.0 * s * a * e_c;
  const double de_b2_dl = a * dmu2 + 2.0 * off * mu1 * dmu1;
  const double de_c2_dl = m * dmu4 + 2.0 * m * (m - 1.0) * mu2 * dmu2;
  const double de4_dl = 4.0 * s2 * de_b2_dl + de_c2_dl + 2.0 * s2 * a * m * dmu2;
  out.dvar_ds = de4_ds - 2.0 * out.mean * out.dmean_ds;
  out.dvar_dl = de4_dl - 2.0 * out.mean * out.dmean_dl;
  return out;
}

}  // namespace

double gamma_fn(double x) {
  if (!(x > 0.0)) throw Error(ErrorCode::kDomainError, "gamma_fn needs x > 0, got " + std::to_string(x));
  return std::tgamma(x);
}

NoiseParams solve_weibull_integer(double k) {
  const double z = integer_noise_power(k);
  NoiseParams p;
  p.k = k;
  p.s = kTwoSqrt3 * std::sqrt(1.0 - z);
  p.lambda = std::sqrt(z * std::exp(-log_weibull_moment_factor(2.0, k)));
  p.lattice = make_lattice(LatticeName::kZn, 1);
  const auto res = integer_match_residuals(p);
  if (!(std::abs(res[0]) < kIntegerResidualTol && std::abs(res[1]) < kIntegerResidualTol)) {
    throw Error(ErrorCode::kNumericalFailure, "matching residuals too large at k = " + std::to_string(k));
  }
  return p;
}

double integer_scale_gap(double k) {
  const double z = integer_noise_power(k);
  return kTwoSqrt3 * z / (1.0 + std::sqrt(1.0 - z));
}

std::array<double, 2> integer_match_residuals(const NoiseParams& p) {
  require_shape(p.k);
  const double s2 = p.s * p.s;
  if (p.lambda == 0.0) {
    return {-(1.0 - s2 / 12.0), -(7.0 * s2 * s2 / 240.0 - s2 / 2.0 + 3.0)};
  }
  const double log_l = std::log(p.lambda);
  const double ez2 = std::exp(2.0 * log_l + log_weibull_moment_factor(2.0, p.k));
  const double ez4 = std::exp(4.0 * log_l + log_weibull_moment_factor(4.0, p.k));
  return {ez2 - (1.0 - s2 / 12.0), ez4 - (7.0 * s2 * s2 / 240.0 - s2 / 2.0 + 3.0)};
}

MomentTargets moment_targets(int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "dimension must be >= 1");
  return {static_cast<double>(n), 2.0 * static_cast<double>(n)};
}

BlockMomentEstimates estimate_block_moments(const LatticeSpec& lattice, std::size_t samples, Rng& rng) {
  if (!lattice.supports_decoding()) {
    throw Error(ErrorCode::kUnsupportedLattice, lattice.label() + " cannot be sampled");
  }
  if (samples < 1000) throw Error(ErrorCode::kInsufficientSamples, "need at least 1000 samples");
  const int m = lattice.dim();
  const auto mm = static_cast<std::size_t>(m);
  Eigen::VectorXd w(m);
  std::vector<double> cross(mm, 0.0);
  double sum_sq = 0.0, sum_quartic = 0.0, sum_off = 0.0;
  for (std::size_t t = 0; t < samples; ++t) {
    detail::sample_voronoi_into(lattice, rng, {w.data(), mm});
    const double sq = w.squaredNorm();
    const double total = w.sum();
    sum_sq += sq;
    sum_quartic += sq * sq;
    sum_off += total * total - sq;
    for (std::size_t j = 0; j < mm; ++j) cross[j] += sq * w[static_cast<Eigen::Index>(j)];
  }
  const double n = static_cast<double>(samples);
  BlockMomentEstimates est;
  est.m = m;
  est.samples = samples;
  est.mean_sq = sum_sq / n;
  est.mean_quartic = sum_quartic / n;
  est.offdiag = sum_off / n;
  for (double c : cross) est.odd_cross = std::max(est.odd_cross, std::abs(c / n));
  return est;
}

MomentTargets block_moments(const BlockMomentEstimates& est, double s, double lambda, double k) {
  require_shape(k);
  const auto e = evaluate_block(est, s, lambda, k);
  return {e.mean, e.var};
}

std::array<double, 2> general_match_residuals(const BlockMomentEstimates& est, const NoiseParams& p) {
  const auto e = block_moments(est, p.s, p.lambda, p.k);
  return {e.mean - est.m, e.variance - 2.0 * est.m};
}

GeneralMatch solve_general(const BlockMomentEstimates& est, const LatticeSpec& lattice, double k) {
  require_shape(k);
  const double m = est.m;
  const NoiseParams start = solve_weibull_integer(k);
  double s = start.s / std::sqrt(est.mean_sq * 12.0 / m);
  double lambda = start.lambda;

  auto residual_of = [&](double ss, double ll) {
    const auto e = evaluate_block(est, ss, ll, k);
    return std::array<double, 2>{e.mean - m, e.var - 2.0 * m};
  };
  auto norm_of = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };

  auto res = residual_of(s, lambda);
  int iter = 0;
  for (; iter < kMaxNewtonIterations; ++iter) {
    if (std::max(std::abs(res[0]), std::abs(res[1])) < 1e-13 * m) break;
    const auto e = evaluate_block(est, s, lambda, k);
    const double det = e.dmean_ds * e.dvar_dl - e.dmean_dl * e.dvar_ds;
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) break;
    const double ds = -(e.dvar_dl * res[0] - e.dmean_dl * res[1]) / det;
    const double dl = -(-e.dvar_ds * res[0] + e.dmean_ds * res[1]) / det;
    double step = 1.0;
    bool improved = false;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      const double s_new = s + step * ds;
      const double l_new = lambda + step * dl;
      if (!(s_new > 0.0) || !(l_new >= 0.0)) continue;
      const auto r_new = residual_of(s_new, l_new);
      if (norm_of(r_new) < norm_of(res)) {
        s = s_new;
        lambda = l_new;
        res = r_new;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  NoiseParams p;
  p.k = k;
  p.s = s;
  p.lambda = lambda;
  p.lattice = lattice;
  if (!(std::abs(res[0]) < kGeneralResidualTol && std::abs(res[1]) < kGeneralResidualTol)) {
    if (s * s * est.mean_sq >= m) {
      throw Error(ErrorCode::kInfeasibleScale,
                  "matching requires E[Z^2] < 0 for " + lattice.label() + " at k = " + std::to_string(k));
    }
    throw NoConvergenceError("Newton stalled for " + lattice.label(), p, res);
  }
  if (s * s * est.mean_sq > m * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kInfeasibleScale, "solution has E[Z^2] < 0");
  }
  return GeneralMatch{p, res, iter, est};
}

NoiseParams solve_general(const LatticeSpec& lattice, double k, std::size_t mc_samples, Rng& rng) {
  require_shape(k);
  const auto est = estimate_block_moments(lattice, mc_samples, rng);
  return solve_general(est, lattice, k).params;
}

std::vector<double> sample_weibull(const NoiseParams& params, std::size_t count, Rng& rng) {
  require_shape(params.k);
  std::vector<double> out(count);
  for (auto& z : out) z = sample_weibull_one(params.lambda, params.k, rng);
  return out;
}

}  // namespace rdq
