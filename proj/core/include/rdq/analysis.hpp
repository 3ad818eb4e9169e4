#pragma once

// Divergence of the matched channel error from the chi-squared target, excess
// information bounds and empirical rate.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "rdq/channel.hpp"
#include "rdq/lattice.hpp"
#include "rdq/noise_match.hpp"
#include "rdq/random.hpp"

namespace rdq {

/// Density of (sU + Z)_i^2 for U ~ Unif[-1/2, 1/2) and Z ~ Weibull(lambda, k).
double density_squared_marginal(const NoiseParams& params, double x);

/// Mass of density_squared_marginal over [a, b], 0 <= a <= b, by Gauss-Legendre
/// quadrature in t = sqrt(x) (smooth in t, so the x^-1/2 pole costs nothing).
double density_squared_mass(const NoiseParams& params, double a, double b);

/// Chi-squared density with n degrees of freedom, evaluated in log space.
double chi2_density(int n, double x);
double chi2_log_density(int n, double x);

/// Cell i covers [x0 + i dx, x0 + (i+1) dx); values[i] is the density averaged
/// over that cell, represented at its midpoint.
struct DensityGrid {
  double x0 = 0.0;
  double dx = 0.0;
  std::vector<double> values;

  double mass() const;
  double mean() const;
  double variance() const;
  double midpoint(std::size_t i) const { return x0 + (static_cast<double>(i) + 0.5) * dx; }
};

/// Cell-averaged grid of density_squared_marginal on [0, upper), renormalized
/// to unit mass.
DensityGrid make_marginal_grid(const NoiseParams& params, double dx, double upper);

struct ConvolutionResult {
  DensityGrid grid;
  /// |mass - 1| of the n-fold convolution on the retained range, before
  /// renormalization.
  double mass_error = 0.0;
};

/// n-fold self-convolution by FFT, raising the transform to the n-th power by
/// repeated squaring. The result keeps `base.values.size()` cells and starts at
/// n * base.x0 + (n - 1) dx / 2. Throws GridTooCoarse if the retained mass is
/// off by more than 1e-4.
ConvolutionResult convolve_n(const DensityGrid& base, int n);

enum class KLMethod { kFftExact, kKnnSample };

std::string_view kl_method_name(KLMethod m);

struct KLDiagnostics {
  double grid_mass_error = 0.0;  // fft_exact
  double grid_dx = 0.0;          // fft_exact
  int knn_k = 0;                 // knn_sample
  double standard_error = 0.0;   // knn_sample, bits
};

struct KLReport {
  int n = 0;
  /// Divergence in bits, clamped at zero.
  double kl_bits = 0.0;
  /// Unclamped estimate; can dip slightly below zero for the sample method.
  double kl_bits_raw = 0.0;
  KLMethod method = KLMethod::kFftExact;
  KLDiagnostics diagnostics;
};

/// D(P_{||sU+Z||^2} || chi2_n) in bits via the cell-averaged density and FFT
/// convolution on [0, n + 12 sqrt(n)]. dx = min(0.01, s^2/400), refined further
/// when grid_points > 0 asks for more cells. Requires n >= 5 and integer-lattice
/// parameters.
KLReport kl_exact(const NoiseParams& params, int n, std::size_t grid_points = 0);

/// Two-sample k-nearest-neighbour estimate of the same divergence from
/// `samples` draws of ||sU+Z||^2 and of ||G||^2. Needs samples >= 10^4.
KLReport kl_knn(const NoiseParams& params, int n, std::size_t samples, int k_nn, Rng& rng);

/// One-dimensional two-sample k-NN divergence estimate in bits (P from p, Q
/// from q); standard error from the spread of the per-sample terms.
struct KnnEstimate {
  double bits = 0.0;
  double standard_error = 0.0;
};
KnnEstimate knn_divergence_1d(std::vector<double> p, std::vector<double> q, int k_nn);

struct ExcessBound {
  double bits_per_dim = 0.0;
  /// Propagated from the tabulated mean's uncertainty (Leech only).
  double uncertainty = 0.0;
};

/// 1/2 log2(2 pi e) - log2(vol)/m + 1/2 log2(E||V||^2 / m).
double excess_bound_lattice(const LatticeSpec& lattice);
ExcessBound excess_bound_lattice_detail(const LatticeSpec& lattice);

/// 1/2 log2(pi) + (1 - psi(3/2)) / (2 ln 2) - 1.
double excess_bound_layered();

struct RateEstimate {
  double h_k_per_dim = 0.0;
  double mutual_info_per_dim = 0.0;
  double excess_per_dim = 0.0;
  std::size_t trials = 0;
};

/// Plug-in entropy of the pooled k_coords over `trials` encodings of
/// X ~ N(0, source_sigma^2 I), next to I(X;Y)/n = 1/2 log2(1 + sigma^2).
/// Throws InsufficientSamples for fewer than 10^4 trials and NumericalFailure
/// when the estimate falls more than 0.05 bits below the information term.
RateEstimate rate_estimate(const ChannelConfig& cfg, double source_sigma, std::size_t trials, Rng& rng);

}  // namespace rdq
