#pragma once

// Rotated dithered-quantization channel simulation, the one-dimensional
// layered-quantization baseline, and covariance colouring.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rdq/lattice.hpp"
#include "rdq/noise_match.hpp"
#include "rdq/random.hpp"
#include "rdq/rotation.hpp"

namespace rdq {

/// Shared-randomness identifiers. Encoder and decoder regenerate R, V' and Z
/// from these; nothing else random crosses the channel.
struct ChannelSeeds {
  std::uint64_t rotation_seed = 0;
  std::uint64_t dither_seed = 0;
  std::uint64_t perturb_seed = 0;

  /// Independent seeds for Monte-Carlo trial `trial`.
  ChannelSeeds for_trial(std::uint64_t trial) const {
    return {derive_seed(rotation_seed, trial), derive_seed(dither_seed, trial),
            derive_seed(perturb_seed, trial)};
  }

  bool operator==(const ChannelSeeds&) const = default;
};

/// Switches that replace a random ingredient by its neutral value. Used by
/// tests to reduce the scheme to plain rounding.
struct ChannelHooks {
  bool identity_rotation = false;
  bool zero_dither = false;
  bool zero_perturbation = false;

  bool operator==(const ChannelHooks&) const = default;
};

struct ChannelConfig {
  int n = 1;
  LatticeSpec lattice = make_lattice(LatticeName::kZn, 1);
  NoiseParams noise;
  /// A with Sigma = A A^T; identity covariance when absent.
  std::optional<Eigen::MatrixXd> covariance_factor;
  ChannelSeeds seeds;
  ChannelHooks hooks;

  /// Throws DimensionMismatch / UnsupportedLattice / SingularMatrix.
  void validate() const;
};

using ConfigDigest = std::array<std::uint8_t, 32>;

/// SHA-256 over the channel parameters (dimension, lattice, noise, covariance
/// factor, hooks). Seeds are excluded and checked separately.
ConfigDigest config_digest(const ChannelConfig& cfg);

struct EncodedMessage {
  std::vector<std::int64_t> k_coords;
  ChannelSeeds seeds;
  ConfigDigest config_digest{};
};

/// Wire format: 32-byte digest, rotation/dither/perturb seeds as little-endian
/// u64, then k_coords as little-endian i64.
std::vector<std::uint8_t> serialize_message(const EncodedMessage& msg);
EncodedMessage parse_message(std::span<const std::uint8_t> bytes);

/// A validated configuration with the per-configuration work (digest,
/// factorization of A) done once. Cheap to share across threads.
class Channel {
 public:
  explicit Channel(ChannelConfig cfg);

  const ChannelConfig& config() const { return cfg_; }
  const ConfigDigest& digest() const { return digest_; }

  /// Encodes with the configured seeds, or with `seeds.for_trial(trial)`.
  EncodedMessage encode(const Eigen::VectorXd& x, std::optional<std::uint64_t> trial = {}) const;
  Eigen::VectorXd decode(const EncodedMessage& msg, std::optional<std::uint64_t> trial = {}) const;

  struct Transmission {
    EncodedMessage message;
    Eigen::VectorXd y;
  };
  /// encode followed by decode with the shared randomness generated once.
  Transmission transmit(const Eigen::VectorXd& x, std::optional<std::uint64_t> trial = {}) const;

  /// Quantization error V = (R^T x' / s - V') - K_embed of the block decoder,
  /// which lies in the Voronoi cell block by block.
  Eigen::VectorXd quantization_error(const Eigen::VectorXd& x,
                                     std::optional<std::uint64_t> trial = {}) const;

  /// The shared rotation for a seed set (identity under the test hook).
  RotationMatrix rotation(const ChannelSeeds& seeds) const;
  /// Block-concatenated dither V'.
  Eigen::VectorXd dither(const ChannelSeeds& seeds) const;
  /// Per-coordinate Weibull perturbation Z.
  Eigen::VectorXd perturbation(const ChannelSeeds& seeds) const;

 private:
  ChannelSeeds seeds_for(std::optional<std::uint64_t> trial) const;
  Eigen::VectorXd whiten(const Eigen::VectorXd& x) const;
  Eigen::VectorXd scaled_input(const Eigen::VectorXd& x, const RotationMatrix& r) const;
  EncodedMessage encode_with(const Eigen::VectorXd& x, const ChannelSeeds& seeds, const RotationMatrix& r,
                             const Eigen::VectorXd& dither) const;
  Eigen::VectorXd decode_with(const EncodedMessage& msg, const ChannelSeeds& seeds, const RotationMatrix& r,
                              Eigen::VectorXd dither) const;

  ChannelConfig cfg_;
  ConfigDigest digest_{};
  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

EncodedMessage encode(const ChannelConfig& cfg, const Eigen::VectorXd& x);
Eigen::VectorXd decode(const ChannelConfig& cfg, const EncodedMessage& msg);

/// Layered quantization: S = 2 sigma sqrt(Gamma), Gamma ~ Gamma(3/2, rate 1/2),
/// K = round(x / S - U'), y = (K + U') S.
struct LayeredSample {
  std::int64_t k = 0;
  double scale = 0.0;
  double y = 0.0;
};

LayeredSample layered_simulate(double x, double sigma, Rng& rng);

/// Deterministic core of layered_simulate with the shared randomness supplied.
LayeredSample layered_reconstruct(double x, double sigma, double gamma_draw, double dither);

/// Returns A y. Throws SingularMatrix when A is not safely invertible.
Eigen::VectorXd colorize(const Eigen::MatrixXd& a, const Eigen::VectorXd& y_white);

/// Condition number threshold above which a covariance factor is rejected.
inline constexpr double kMaxConditionNumber = 1e12;

}  // namespace rdq
