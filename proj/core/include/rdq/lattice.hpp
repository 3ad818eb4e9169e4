#pragma once

// Root lattices, closest-vector quantization, Voronoi-cell sampling and
// Voronoi-cell second/fourth moments.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rdq/random.hpp"

namespace rdq {

enum class LatticeName {
  kZn,
  kA1,
  kA2,
  kA3,
  kA4,
  kD4,
  kD5,
  kD6,
  kD7,
  kD8,
  kE6,
  kE7,
  kE8,
  kLeech,
};

/// Exact fraction; converted to double on read.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Voronoi-cell moments of the squared norm as tabulated: E||V||^2 / m and
/// Var ||V||^2 / m for the root lattices, plain totals (n/12, n/180) for Z^n.
/// See moment_divisor(). The Leech lattice only has a numerically estimated
/// mean with an uncertainty.
struct TabulatedMoments {
  Rational mean;
  std::optional<Rational> variance;
  double mean_uncertainty = 0.0;
};

class LatticeSpec {
 public:
  LatticeName name() const { return name_; }
  int dim() const { return dim_; }
  /// Generator matrix; row i is basis vector e_i. Empty for the Leech lattice.
  const Eigen::MatrixXd& basis() const { return basis_; }
  double cell_volume() const { return cell_volume_; }
  double covering_radius() const { return covering_radius_; }
  const std::optional<TabulatedMoments>& analytic_moments() const { return moments_; }
  /// Canonical label ("Z", "A2", "E8", "Leech", ...).
  std::string label() const;
  /// True when quantize/sample_voronoi are available.
  bool supports_decoding() const { return name_ != LatticeName::kLeech; }

  bool operator==(const LatticeSpec& other) const {
    return name_ == other.name_ && dim_ == other.dim_;
  }

 private:
  friend LatticeSpec make_lattice(LatticeName name, int dim);
  friend struct LatticeAccess;

  LatticeName name_ = LatticeName::kZn;
  int dim_ = 1;
  Eigen::MatrixXd basis_;
  double cell_volume_ = 1.0;
  double covering_radius_ = 0.5;
  std::optional<TabulatedMoments> moments_;

  // Precomputed decoding data.
  Eigen::MatrixXd basis_t_inverse_;  // maps an embedding to integer coefficients
  Eigen::MatrixXd gram_upper_;       // upper-triangular R with R^T R = B B^T
  Eigen::MatrixXd enum_map_;         // x -> y with ||B^T k - x|| = ||R k - y||
  Eigen::MatrixXd helmert_;          // A_n only: (m+1) x m orthonormal sum-zero frame
};

/// Builds a named lattice. `dim` is only consulted for Z^n (defaults to 1).
LatticeSpec make_lattice(LatticeName name, int dim = 1);

/// Case-insensitive parse: "Z", "Z8", "A2", "d4", "E8", "Leech", "Lambda24".
LatticeSpec parse_lattice(std::string_view text);

/// The thirteen tabulated lattices A1..A4, D4..D8, E6..E8, Leech, in that order.
std::vector<LatticeSpec> table_lattices();

struct LatticePoint {
  std::vector<std::int64_t> coords;
  Eigen::VectorXd embedding;
};

/// Closest lattice point. Exact ties resolve to the lexicographically smallest
/// coefficient vector.
LatticePoint quantize(const LatticeSpec& lattice, const Eigen::VectorXd& x);

/// Exact closest point by enumerating every coefficient vector whose embedding
/// lies within `radius` of x.
LatticePoint quantize_bruteforce(const LatticeSpec& lattice, const Eigen::VectorXd& x,
                                 double radius);

/// Uniform sample from the Voronoi cell around the origin.
Eigen::VectorXd sample_voronoi(const LatticeSpec& lattice, Rng& rng);

struct VoronoiMoments {
  double mean = 0.0;
  std::optional<double> variance;
  double mean_uncertainty = 0.0;
};

VoronoiMoments moments_analytic(const LatticeSpec& lattice);

struct MonteCarloMoments {
  double mean = 0.0;
  double variance = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
};

/// Divisor that maps E||V||^2 and Var ||V||^2 to the tabulated convention:
/// the block dimension m for root lattices, 1 for Z^n.
double moment_divisor(const LatticeSpec& lattice);

/// Per-dimension second moment E||V||^2 / m from the tabulated mean.
double second_moment_per_dim(const LatticeSpec& lattice);

/// Plug-in estimates of E||V||^2 and Var ||V||^2, each divided by moment_divisor()
/// so they compare directly with moments_analytic(), with delete-one jackknife
/// standard errors.
MonteCarloMoments moments_montecarlo(const LatticeSpec& lattice, std::size_t samples, Rng& rng);

/// Row-major basis as CSV with 17 significant digits.
std::string basis_csv(const LatticeSpec& lattice);

namespace detail {

/// Allocation-free decoder used on hot paths. Writes the closest point's
/// embedding into `out` and its coefficients into `coords`.
void quantize_into(const LatticeSpec& lattice, std::span<const double> x, std::span<double> out,
                   std::span<std::int64_t> coords);

/// Allocation-free Voronoi sample into `out` (length dim).
void sample_voronoi_into(const LatticeSpec& lattice, Rng& rng, std::span<double> out);

}  // namespace detail

}  // namespace rdq
