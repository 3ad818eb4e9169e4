#include "rdq/rotation.hpp"

#include <cmath>

#include "rdq/error.hpp"

namespace rdq {

namespace {

inline std::size_t reflector_offset(int n, int j) {
  // Sum of lengths n, n-1, ..., n-j+1.
  return static_cast<std::size_t>(j) * static_cast<std::size_t>(n) -
         static_cast<std::size_t>(j) * static_cast<std::size_t>(j - 1) / 2;
}

}  // namespace

RotationMatrix RotationMatrix::identity(int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "rotation dimension must be >= 1");
  RotationMatrix r;
  r.n_ = n;
  r.signs_.assign(static_cast<std::size_t>(n), 1.0);
  return r;
}

RotationMatrix sample_haar(int n, Rng& rng, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "rotation dimension must be >= 1");
  RotationMatrix r;
  r.n_ = n;
  r.seed_ = seed;
  r.signs_.assign(static_cast<std::size_t>(n), 1.0);
  r.reflectors_.resize(n > 1 ? reflector_offset(n, n - 1) : 0);

  // Householder QR of a Gaussian matrix: after reflecting column j the trailing
  // block is again an independent Gaussian matrix, so column j + 1 can be drawn
  // fresh instead of being updated.
  double det_sign = 1.0;
  for (int j = 0; j + 1 < n; ++j) {
    const int len = n - j;
    double* v = r.reflectors_.data() + reflector_offset(n, j);
    double norm2 = 0.0;
    for (int i = 0; i < len; ++i) {
      v[i] = rng.normal();
      norm2 += v[i] * v[i];
    }
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0)) throw Error(ErrorCode::kNumericalFailure, "degenerate Gaussian column");
    // H v = alpha e_1 with alpha = -sign(v_1) ||v||; the R-factor diagonal is alpha.
    const double alpha = v[0] >= 0.0 ? -norm : norm;
    r.signs_[static_cast<std::size_t>(j)] = alpha > 0.0 ? 1.0 : -1.0;
    v[0] -= alpha;
    const double unorm = std::sqrt(norm2 - 2.0 * alpha * (v[0] + alpha) + alpha * alpha);
    if (!(unorm > 0.0)) throw Error(ErrorCode::kNumericalFailure, "degenerate reflector");
    for (int i = 0; i < len; ++i) v[i] /= unorm;
    det_sign *= -r.signs_[static_cast<std::size_t>(j)];
  }
  const double last = rng.normal();
  if (last == 0.0) throw Error(ErrorCode::kNumericalFailure, "degenerate Gaussian diagonal");
  r.signs_[static_cast<std::size_t>(n - 1)] = last > 0.0 ? 1.0 : -1.0;
  det_sign *= r.signs_[static_cast<std::size_t>(n - 1)];
  // Restrict to SO(n) by negating the last column.
  if (det_sign < 0.0) r.signs_[static_cast<std::size_t>(n - 1)] *= -1.0;
  return r;
}

RotationMatrix sample_haar(int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_haar(n, rng, seed);
}

void RotationMatrix::apply_inplace(Eigen::Ref<Eigen::VectorXd> x, bool transpose) const {
  if (x.size() != n_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "rotation is " + std::to_string(n_) + "-dimensional, vector has " + std::to_string(x.size()));
  }
  const bool has_reflectors = !reflectors_.empty();
  auto reflect = [&](int j) {
    const int len = n_ - j;
    const double* v = reflectors_.data() + reflector_offset(n_, j);
    double* y = x.data() + j;
    double dot = 0.0;
    for (int i = 0; i < len; ++i) dot += v[i] * y[i];
    dot *= 2.0;
    for (int i = 0; i < len; ++i) y[i] -= dot * v[i];
  };
  if (!transpose) {
    // R x = H_1 (H_2 (... H_{n-1} (D x)))
    for (int i = 0; i < n_; ++i) x[i] *= signs_[static_cast<std::size_t>(i)];
    if (has_reflectors) {
      for (int j = n_ - 2; j >= 0; --j) reflect(j);
    }
  } else {
    // R^T x = D H_{n-1} ... H_1 x
    if (has_reflectors) {
      for (int j = 0; j + 1 < n_; ++j) reflect(j);
    }
    for (int i = 0; i < n_; ++i) x[i] *= signs_[static_cast<std::size_t>(i)];
  }
}

Eigen::VectorXd RotationMatrix::apply(const Eigen::VectorXd& x, bool transpose) const {
  Eigen::VectorXd y = x;
  apply_inplace(y, transpose);
  return y;
}

Eigen::MatrixXd RotationMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n_, n_);
  for (int c = 0; c < n_; ++c) {
    Eigen::VectorXd col = m.col(c);
    apply_inplace(col, false);
    m.col(c) = col;
  }
  return m;
}

}  // namespace rdq
