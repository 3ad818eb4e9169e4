#include "rdq/channel.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include <openssl/evp.h>

#include "rdq/error.hpp"

namespace rdq {

namespace {

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t read_u64(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[offset + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

void append_double(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(bits));
  append_u64(out, bits);
}

double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double smallest = sv[sv.size() - 1];
  if (!(smallest > 0.0)) return std::numeric_limits<double>::infinity();
  return sv[0] / smallest;
}

void require_invertible(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::kDimensionMismatch, "covariance factor must be square");
  const double cond = condition_number(a);
  if (!(cond < kMaxConditionNumber)) {
    throw Error(ErrorCode::kSingularMatrix, "condition number " + std::to_string(cond));
  }
}

inline double round_half_down(double v) { return std::ceil(v - 0.5); }

}  // namespace

void ChannelConfig::validate() const {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "channel dimension must be >= 1");
  if (!lattice.supports_decoding()) {
    throw Error(ErrorCode::kUnsupportedLattice, lattice.label() + " cannot be used in a channel");
  }
  if (n % lattice.dim() != 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "n = " + std::to_string(n) + " is not a multiple of " + lattice.label() + " dimension " +
                    std::to_string(lattice.dim()));
  }
  if (!(noise.s > 0.0) || !(noise.lambda >= 0.0) || !(noise.k > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise parameters must satisfy s > 0, lambda >= 0, k > 0");
  }
  if (covariance_factor) {
    if (covariance_factor->rows() != n || covariance_factor->cols() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "covariance factor must be n x n");
    }
    require_invertible(*covariance_factor);
  }
}

ConfigDigest config_digest(const ChannelConfig& cfg) {
  std::vector<std::uint8_t> buf;
  const std::string tag = "rdq-channel-v1";
  buf.insert(buf.end(), tag.begin(), tag.end());
  append_u64(buf, static_cast<std::uint64_t>(cfg.n));
  const std::string label = cfg.lattice.label();
  append_u64(buf, label.size());
  buf.insert(buf.end(), label.begin(), label.end());
  append_u64(buf, static_cast<std::uint64_t>(cfg.lattice.dim()));
  append_double(buf, cfg.noise.k);
  append_double(buf, cfg.noise.lambda);
  append_double(buf, cfg.noise.s);
  buf.push_back(cfg.hooks.identity_rotation ? 1 : 0);
  buf.push_back(cfg.hooks.zero_dither ? 1 : 0);
  buf.push_back(cfg.hooks.zero_perturbation ? 1 : 0);
  buf.push_back(cfg.covariance_factor ? 1 : 0);
  if (cfg.covariance_factor) {
    const auto& a = *cfg.covariance_factor;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) append_double(buf, a(i, j));
    }
  }
  ConfigDigest out{};
  unsigned int len = 0;
  if (EVP_Digest(buf.data(), buf.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error(ErrorCode::kNumericalFailure, "SHA-256 failed");
  }
  return out;
}

std::vector<std::uint8_t> serialize_message(const EncodedMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(32 + 24 + 8 * msg.k_coords.size());
  out.insert(out.end(), msg.config_digest.begin(), msg.config_digest.end());
  append_u64(out, msg.seeds.rotation_seed);
  append_u64(out, msg.seeds.dither_seed);
  append_u64(out, msg.seeds.perturb_seed);
  for (auto k : msg.k_coords) append_u64(out, static_cast<std::uint64_t>(k));
  return out;
}

EncodedMessage parse_message(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 32 + 24;
  if (bytes.size() < kHeader || (bytes.size() - kHeader) % 8 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "malformed message of " + std::to_string(bytes.size()) + " bytes");
  }
  EncodedMessage msg;
  std::copy_n(bytes.begin(), 32, msg.config_digest.begin());
  msg.seeds.rotation_seed = read_u64(bytes, 32);
  msg.seeds.dither_seed = read_u64(bytes, 40);
  msg.seeds.perturb_seed = read_u64(bytes, 48);
  const std::size_t count = (bytes.size() - kHeader) / 8;
  msg.k_coords.resize(count);
  for (std::size_t i = 0; i < count; ++i) msg.k_coords[i] = static_cast<std::int64_t>(read_u64(bytes, kHeader + 8 * i));
  return msg;
}

Channel::Channel(ChannelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  digest_ = config_digest(cfg_);
  if (cfg_.covariance_factor) lu_.emplace(*cfg_.covariance_factor);
}

ChannelSeeds Channel::seeds_for(std::optional<std::uint64_t> trial) const {
  return trial ? cfg_.seeds.for_trial(*trial) : cfg_.seeds;
}

RotationMatrix Channel::rotation(const ChannelSeeds& seeds) const {
  if (cfg_.hooks.identity_rotation) return RotationMatrix::identity(cfg_.n);
  return sample_haar(cfg_.n, seeds.rotation_seed);
}

Eigen::VectorXd Channel::dither(const ChannelSeeds& seeds) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(cfg_.n);
  if (cfg_.hooks.zero_dither) return v;
  const int m = cfg_.lattice.dim();
  for (int b = 0; b < cfg_.n / m; ++b) {
    Rng rng = Rng::stream(seeds.dither_seed, static_cast<std::uint64_t>(b));
    detail::sample_voronoi_into(cfg_.lattice, rng, {v.data() + b * m, static_cast<std::size_t>(m)});
  }
  return v;
}

Eigen::VectorXd Channel::perturbation(const ChannelSeeds& seeds) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(cfg_.n);
  if (cfg_.hooks.zero_perturbation) return z;
  const int m = cfg_.lattice.dim();
  for (int b = 0; b < cfg_.n / m; ++b) {
    Rng rng = Rng::stream(seeds.perturb_seed, static_cast<std::uint64_t>(b));
    for (int i = 0; i < m; ++i) z[b * m + i] = sample_weibull_one(cfg_.noise.lambda, cfg_.noise.k, rng);
  }
  return z;
}

Eigen::VectorXd Channel::whiten(const Eigen::VectorXd& x) const {
  if (x.size() != cfg_.n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input has length " + std::to_string(x.size()) + ", channel has n = " + std::to_string(cfg_.n));
  }
  if (!x.allFinite()) throw Error(ErrorCode::kDomainError, "non-finite channel input");
  if (lu_) return lu_->solve(x);
  return x;
}

Eigen::VectorXd Channel::scaled_input(const Eigen::VectorXd& x, const RotationMatrix& r) const {
  Eigen::VectorXd t = whiten(x);
  r.apply_inplace(t, /*transpose=*/true);
  t /= cfg_.noise.s;
  return t;
}

EncodedMessage Channel::encode_with(const Eigen::VectorXd& x, const ChannelSeeds& seeds, const RotationMatrix& r,
                                    const Eigen::VectorXd& dither) const {
  Eigen::VectorXd t = scaled_input(x, r);
  t -= dither;
  const int m = cfg_.lattice.dim();
  const auto mm = static_cast<std::size_t>(m);
  EncodedMessage msg;
  msg.seeds = seeds;
  msg.config_digest = digest_;
  msg.k_coords.resize(static_cast<std::size_t>(cfg_.n));
  std::vector<double> point(mm);
  for (int b = 0; b < cfg_.n / m; ++b) {
    detail::quantize_into(cfg_.lattice, {t.data() + b * m, mm}, point,
                          {msg.k_coords.data() + static_cast<std::size_t>(b) * mm, mm});
  }
  return msg;
}

Eigen::VectorXd Channel::decode_with(const EncodedMessage& msg, const ChannelSeeds& seeds, const RotationMatrix& r,
                                     Eigen::VectorXd w) const {
  if (!(msg.seeds == seeds)) throw Error(ErrorCode::kSeedMismatch, "message seeds differ from the decoder's");
  if (msg.config_digest != digest_) throw Error(ErrorCode::kDigestMismatch, "message was encoded for another config");
  if (msg.k_coords.size() != static_cast<std::size_t>(cfg_.n)) {
    throw Error(ErrorCode::kDimensionMismatch, "message carries " + std::to_string(msg.k_coords.size()) + " coordinates");
  }
  const int m = cfg_.lattice.dim();
  const auto& basis = cfg_.lattice.basis();
  for (int b = 0; b < cfg_.n / m; ++b) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int i = 0; i < m; ++i) acc += static_cast<double>(msg.k_coords[static_cast<std::size_t>(b * m + i)]) * basis(i, j);
      w[b * m + j] += acc;
    }
  }
  w *= cfg_.noise.s;
  w += perturbation(seeds);
  r.apply_inplace(w, /*transpose=*/false);
  if (cfg_.covariance_factor) return *cfg_.covariance_factor * w;
  return w;
}

EncodedMessage Channel::encode(const Eigen::VectorXd& x, std::optional<std::uint64_t> trial) const {
  const ChannelSeeds seeds = seeds_for(trial);
  return encode_with(x, seeds, rotation(seeds), dither(seeds));
}

Eigen::VectorXd Channel::decode(const EncodedMessage& msg, std::optional<std::uint64_t> trial) const {
  const ChannelSeeds seeds = seeds_for(trial);
  if (!(msg.seeds == seeds)) throw Error(ErrorCode::kSeedMismatch, "message seeds differ from the decoder's");
  return decode_with(msg, seeds, rotation(seeds), dither(seeds));
}

Channel::Transmission Channel::transmit(const Eigen::VectorXd& x, std::optional<std::uint64_t> trial) const {
  const ChannelSeeds seeds = seeds_for(trial);
  const RotationMatrix r = rotation(seeds);
  Eigen::VectorXd v = dither(seeds);
  Transmission out;
  out.message = encode_with(x, seeds, r, v);
  out.y = decode_with(out.message, seeds, r, std::move(v));
  return out;
}

Eigen::VectorXd Channel::quantization_error(const Eigen::VectorXd& x, std::optional<std::uint64_t> trial) const {
  const ChannelSeeds seeds = seeds_for(trial);
  Eigen::VectorXd t = scaled_input(x, rotation(seeds)) - dither(seeds);
  const int m = cfg_.lattice.dim();
  const auto mm = static_cast<std::size_t>(m);
  std::vector<double> point(mm);
  std::vector<std::int64_t> coords(mm);
  for (int b = 0; b < cfg_.n / m; ++b) {
    detail::quantize_into(cfg_.lattice, {t.data() + b * m, mm}, point, coords);
    for (int i = 0; i < m; ++i) t[b * m + i] -= point[static_cast<std::size_t>(i)];
  }
  return t;
}

EncodedMessage encode(const ChannelConfig& cfg, const Eigen::VectorXd& x) { return Channel(cfg).encode(x); }

Eigen::VectorXd decode(const ChannelConfig& cfg, const EncodedMessage& msg) { return Channel(cfg).decode(msg); }

LayeredSample layered_reconstruct(double x, double sigma, double gamma_draw, double dither) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kDomainError, "sigma must be positive");
  LayeredSample out;
  out.scale = 2.0 * sigma * std::sqrt(gamma_draw);
  out.k = static_cast<std::int64_t>(round_half_down(x / out.scale - dither));
  out.y = (static_cast<double>(out.k) + dither) * out.scale;
  return out;
}

LayeredSample layered_simulate(double x, double sigma, Rng& rng) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kDomainError, "sigma must be positive");
  // Gamma(shape 3/2, rate 1/2) is chi-squared with three degrees of freedom.
  double gamma_draw = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double g = rng.normal();
    gamma_draw += g * g;
  }
  const double dither = rng.uniform() - 0.5;
  return layered_reconstruct(x, sigma, gamma_draw, dither);
}

Eigen::VectorXd colorize(const Eigen::MatrixXd& a, const Eigen::VectorXd& y_white) {
  require_invertible(a);
  if (a.cols() != y_white.size()) throw Error(ErrorCode::kDimensionMismatch, "colorize: size mismatch");
  return a * y_white;
}

}  // namespace rdq
