#pragma once

// Moment matching of the scaled, perturbed lattice error ||s V + Z||^2 to the
// chi-squared target, with per-coordinate Weibull perturbation Z.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rdq/error.hpp"
#include "rdq/lattice.hpp"
#include "rdq/random.hpp"

namespace rdq {

/// Weibull shape k and scale lambda of the perturbation, and the lattice scale s.
struct NoiseParams {
  double k = 1.0;
  double lambda = 0.0;
  double s = 1.0;
  LatticeSpec lattice = make_lattice(LatticeName::kZn, 1);
};

/// Gamma function, relative accuracy ~1e-15 (std::tgamma). Throws DomainError for x <= 0.
double gamma_fn(double x);

/// Closed-form matching for the integer lattice with Weibull(lambda, k) noise.
/// Throws DiscriminantNegative when Gamma(1+4/k) < 3 Gamma(1+2/k)^2, i.e. the
/// Weibull family is not heavy-tailed enough to reach variance 2 (k > ~1.4418).
NoiseParams solve_weibull_integer(double k);

/// 2*sqrt(3) - s(k), evaluated without cancellation.
double integer_scale_gap(double k);

/// Residuals of the two integer-lattice matching equations:
///   lambda^2 Gamma(1+2/k) - (1 - s^2/12)
///   lambda^4 Gamma(1+4/k) - (7 s^4/240 - s^2/2 + 3)
std::array<double, 2> integer_match_residuals(const NoiseParams& params);

struct MomentTargets {
  double mean = 0.0;
  double variance = 0.0;
};

/// Chi-squared mean and variance of ||G||^2 for G ~ N(0, I_n).
MomentTargets moment_targets(int n);

/// Monte-Carlo estimates of the Voronoi-cell moments that enter E and Var of
/// ||s V + Z||^2 for one lattice block.
struct BlockMomentEstimates {
  int m = 1;
  std::size_t samples = 0;
  double mean_sq = 0.0;       // E ||V||^2
  double mean_quartic = 0.0;  // E ||V||^4
  double offdiag = 0.0;       // sum_{i != j} E[V_i V_j]
  double odd_cross = 0.0;     // max_j |E[||V||^2 V_j]|, zero by symmetry; diagnostic only
};

BlockMomentEstimates estimate_block_moments(const LatticeSpec& lattice, std::size_t samples, Rng& rng);

/// Mean and variance of ||s V + Z||^2 over one block, from the lattice moment
/// estimates and exact Weibull moments lambda^r Gamma(1 + r/k).
MomentTargets block_moments(const BlockMomentEstimates& est, double s, double lambda, double k);

/// Residuals (mean - m, variance - 2m) of the block matching system.
std::array<double, 2> general_match_residuals(const BlockMomentEstimates& est, const NoiseParams& params);

/// Raised by solve_general when Newton fails; carries the best iterate.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, NoiseParams best, std::array<double, 2> residuals)
      : Error(ErrorCode::kNoConvergence, what), best_(std::move(best)), residuals_(residuals) {}

  const NoiseParams& best() const { return best_; }
  const std::array<double, 2>& residuals() const { return residuals_; }

 private:
  NoiseParams best_;
  std::array<double, 2> residuals_;
};

struct GeneralMatch {
  NoiseParams params;
  std::array<double, 2> residuals{};
  int iterations = 0;
  BlockMomentEstimates moments;
};

/// Numerical matching for an arbitrary decodable lattice (damped 2-D Newton).
NoiseParams solve_general(const LatticeSpec& lattice, double k, std::size_t mc_samples, Rng& rng);

/// Same, starting from precomputed moment estimates and reporting diagnostics.
GeneralMatch solve_general(const BlockMomentEstimates& est, const LatticeSpec& lattice, double k);

/// Inverse-CDF Weibull draws, Z = lambda (-ln U)^(1/k).
std::vector<double> sample_weibull(const NoiseParams& params, std::size_t count, Rng& rng);

/// Single Weibull draw.
inline double sample_weibull_one(double lambda, double k, Rng& rng) {
  if (lambda == 0.0) return 0.0;
  return lambda * std::pow(-std::log(rng.uniform_open()), 1.0 / k);
}

}  // namespace rdq
