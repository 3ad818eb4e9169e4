#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rdq/random.hpp"

namespace rdq {

/// A rotation drawn from the Haar measure on SO(n).
///
/// The matrix is kept in factored form, R = H_1 H_2 ... H_{n-1} D, where H_j is
/// the Householder reflector that the QR factorization of an n x n standard
/// Gaussian matrix produces at column j and D holds the signs of the triangular
/// factor's diagonal (with the last sign flipped when needed so det R = +1).
/// Applying R or R^T costs O(n^2); `dense()` materializes the matrix.
class RotationMatrix {
 public:
  static RotationMatrix identity(int n);

  int n() const { return n_; }
  std::uint64_t seed() const { return seed_; }

  /// R x, or R^T x when `transpose` is set.
  Eigen::VectorXd apply(const Eigen::VectorXd& x, bool transpose = false) const;
  /// In-place variant for hot loops.
  void apply_inplace(Eigen::Ref<Eigen::VectorXd> x, bool transpose = false) const;

  Eigen::MatrixXd dense() const;

 private:
  friend RotationMatrix sample_haar(int n, Rng& rng, std::uint64_t seed);

  int n_ = 1;
  std::uint64_t seed_ = 0;
  // Householder vector j is stored in reflectors_[offset_j, offset_j + n - j)
  // and scaled so that H_j = I - 2 v v^T.
  std::vector<double> reflectors_;
  std::vector<double> signs_;
};

/// Haar-random rotation. `seed` is recorded on the result for provenance; the
/// randomness itself comes from `rng`.
RotationMatrix sample_haar(int n, Rng& rng, std::uint64_t seed = 0);

/// Haar-random rotation drawn from a generator seeded with `seed`.
RotationMatrix sample_haar(int n, std::uint64_t seed);

}  // namespace rdq
