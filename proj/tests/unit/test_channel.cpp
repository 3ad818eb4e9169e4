#include <doctest.h>

#include <cmath>
#include <vector>

#include "rdq/channel.hpp"
#include "rdq/error.hpp"
#include "rdq/stats.hpp"

using namespace rdq;

namespace {

ChannelConfig matched_config(int n, LatticeSpec lattice = make_lattice(LatticeName::kZn, 1)) {
  ChannelConfig cfg;
  cfg.n = n;
  cfg.lattice = lattice;
  cfg.noise = solve_weibull_integer(1.0);
  cfg.seeds = {11, 22, 33};
  return cfg;
}

ChannelConfig plain_rounding(int n) {
  ChannelConfig cfg;
  cfg.n = n;
  cfg.noise.s = 1.0;
  cfg.noise.lambda = 0.0;
  cfg.hooks = {true, true, true};
  return cfg;
}

Eigen::VectorXd gaussian(Rng& rng, int n, double sigma = 1.0) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = sigma * rng.normal();
  return x;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("with every random ingredient neutralized the channel is plain rounding") {
  const Channel ch(plain_rounding(6));
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd x = gaussian(rng, 6, 4.0);
    const auto msg = ch.encode(x);
    for (int i = 0; i < 6; ++i) CHECK(msg.k_coords[static_cast<std::size_t>(i)] == std::llround(x[i]));
    const Eigen::VectorXd y = ch.decode(msg);
    CHECK((y - x).cwiseAbs().maxCoeff() <= 0.5);
  }
}

TEST_CASE("subtractive dither bounds the error by half a cell") {
  auto cfg = plain_rounding(8);
  cfg.hooks.zero_dither = false;
  const Channel ch(cfg);
  Rng rng(2);
  for (std::uint64_t t = 0; t < 500; ++t) {
    const Eigen::VectorXd x = gaussian(rng, 8, 3.0);
    const auto out = ch.transmit(x, t);
    const Eigen::VectorXd e = out.y - x;
    CHECK(e.maxCoeff() < 0.5 + 1e-12);
    CHECK(e.minCoeff() >= -0.5 - 1e-12);
  }
}

TEST_CASE("messages survive serialization") {
  const Channel ch(matched_config(12));
  Rng rng(3);
  const auto msg = ch.encode(gaussian(rng, 12), 5);
  const auto bytes = serialize_message(msg);
  CHECK(bytes.size() == 32 + 24 + 8 * 12);
  const auto back = parse_message(bytes);
  CHECK(back.k_coords == msg.k_coords);
  CHECK(back.seeds == msg.seeds);
  CHECK(back.config_digest == msg.config_digest);
  // Little-endian layout: first seed byte follows the digest.
  CHECK(bytes[32] == static_cast<std::uint8_t>(msg.seeds.rotation_seed & 0xff));
  CHECK(code_of([&] { parse_message(std::span(bytes).first(bytes.size() - 3)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("decoder rejects foreign messages") {
  const Channel ch(matched_config(8));
  Rng rng(4);
  const Eigen::VectorXd x = gaussian(rng, 8);
  const auto msg = ch.encode(x, 1);
  CHECK(code_of([&] { ch.decode(msg, 2); }) == ErrorCode::kSeedMismatch);
  CHECK(code_of([&] { ch.decode(msg); }) == ErrorCode::kSeedMismatch);

  auto other_cfg = matched_config(8);
  other_cfg.noise = solve_weibull_integer(0.5);
  const Channel other(other_cfg);
  CHECK(other.digest() != ch.digest());
  CHECK(code_of([&] { other.decode(msg, 1); }) == ErrorCode::kDigestMismatch);

  auto truncated = msg;
  truncated.k_coords.pop_back();
  CHECK(code_of([&] { ch.decode(truncated, 1); }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { ch.encode(gaussian(rng, 7)); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("configuration validation") {
  CHECK(code_of([] { Channel(matched_config(10, make_lattice(LatticeName::kD4))); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(code_of([] { Channel(matched_config(24, make_lattice(LatticeName::kLeech))); }) ==
        ErrorCode::kUnsupportedLattice);
  auto cfg = matched_config(3);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(2, 2) = 1e-14;
  cfg.covariance_factor = a;
  CHECK(code_of([&] { Channel{cfg}; }) == ErrorCode::kSingularMatrix);
  CHECK(code_of([&] { colorize(a, Eigen::VectorXd::Ones(3)); }) == ErrorCode::kSingularMatrix);
  CHECK(code_of([] { Channel(matched_config(0)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("digest ignores seeds but not parameters") {
  auto a = matched_config(16);
  auto b = a;
  b.seeds = {1, 2, 3};
  CHECK(config_digest(a) == config_digest(b));
  b.hooks.zero_dither = true;
  CHECK(config_digest(a) != config_digest(b));
  auto c = a;
  c.lattice = make_lattice(LatticeName::kD4);
  CHECK(config_digest(a) != config_digest(c));
}

TEST_CASE("shared randomness is regenerated bit-exactly") {
  const Channel ch(matched_config(16, make_lattice(LatticeName::kD4)));
  Rng rng(5);
  for (std::uint64_t t = 0; t < 20; ++t) {
    const Eigen::VectorXd x = gaussian(rng, 16);
    const auto msg = ch.encode(x, t);
    const auto wire = parse_message(serialize_message(msg));
    const Channel decoder(matched_config(16, make_lattice(LatticeName::kD4)));
    const auto out = ch.transmit(x, t);
    CHECK(decoder.decode(wire, t) == out.y);
    CHECK(out.message.k_coords == msg.k_coords);
  }
}

TEST_CASE("quantization error stays in the voronoi cell of each block") {
  for (auto name : {LatticeName::kA2, LatticeName::kD4, LatticeName::kE8}) {
    const auto l = make_lattice(name);
    const int n = 8 * l.dim();
    const Channel ch(matched_config(n, l));
    Rng rng(6);
    for (std::uint64_t t = 0; t < 30; ++t) {
      const Eigen::VectorXd v = ch.quantization_error(gaussian(rng, n, 5.0), t);
      for (int b = 0; b < n / l.dim(); ++b) {
        const auto q = quantize(l, v.segment(b * l.dim(), l.dim()));
        for (auto c : q.coords) CHECK(c == 0);
      }
    }
  }
}

TEST_CASE("output error equals R (Z - s V)") {
  // V = (R^T x / s - V') - K, so y - x = R (s (K + V') + Z) - R s (K + V' + V).
  const Channel ch(matched_config(12, make_lattice(LatticeName::kA3)));
  Rng rng(7);
  const Eigen::VectorXd x = gaussian(rng, 12, 2.0);
  const std::uint64_t t = 9;
  const auto seeds = ch.config().seeds.for_trial(t);
  const Eigen::VectorXd v = ch.quantization_error(x, t);
  const Eigen::VectorXd expected = ch.rotation(seeds).apply(ch.perturbation(seeds) - ch.config().noise.s * v);
  CHECK((ch.transmit(x, t).y - x - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("encoding is equivariant under lattice shifts") {
  const auto l = make_lattice(LatticeName::kD4);
  const Channel ch(matched_config(8, l));
  const auto seeds = ch.config().seeds;
  const auto r = ch.rotation(seeds);
  Rng rng(8);
  const Eigen::VectorXd x = gaussian(rng, 8);
  const std::vector<std::int64_t> shift = {1, -2, 0, 3, -1, 0, 2, 1};
  Eigen::VectorXd lv(8);
  for (int b = 0; b < 2; ++b) {
    Eigen::VectorXd c(4);
    for (int i = 0; i < 4; ++i) c[i] = static_cast<double>(shift[static_cast<std::size_t>(4 * b + i)]);
    lv.segment(4 * b, 4) = l.basis().transpose() * c;
  }
  const auto base = ch.encode(x).k_coords;
  const auto moved = ch.encode(x + r.apply(ch.config().noise.s * lv)).k_coords;
  for (std::size_t i = 0; i < 8; ++i) CHECK(moved[i] == base[i] + shift[i]);
}

TEST_CASE("norm statistics and marginal gaussianity at moderate n") {
  const int n = 64;
  const Channel ch(matched_config(n));
  Rng rng(9);
  const Eigen::VectorXd x = gaussian(rng, n);
  std::vector<double> norms, marginal;
  for (std::uint64_t t = 0; t < 6000; ++t) {
    const Eigen::VectorXd e = ch.transmit(x, t).y - x;
    norms.push_back(e.squaredNorm());
    marginal.push_back(e[3]);
  }
  const auto m = stats::sample_moments(norms);
  CHECK(std::abs(m.mean - n) < 4 * m.se_mean);
  CHECK(std::abs(m.variance - 2.0 * n) < 4 * m.se_variance);
  CHECK(stats::ks_one_sample(marginal, stats::normal_cdf).pvalue > 0.01);
}

TEST_CASE("error distribution does not depend on the input") {
  const int n = 16;
  const Channel ch(matched_config(n));
  std::vector<std::vector<double>> errs;
  Rng rng(10);
  for (double scale : {0.0, 1.0, 25.0}) {
    const Eigen::VectorXd x = gaussian(rng, n, scale);
    std::vector<double> e;
    for (std::uint64_t t = 0; t < 4000; ++t) e.push_back((ch.transmit(x, t + 100000 * errs.size()).y - x)[0]);
    errs.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < errs.size(); ++i)
    for (std::size_t j = i + 1; j < errs.size(); ++j) CHECK(stats::ks_two_sample(errs[i], errs[j]).pvalue > 0.01);
}

TEST_CASE("layered quantization is exactly gaussian") {
  const auto fixed = layered_reconstruct(0.0, 1.0, 2.0, 0.0);
  CHECK(fixed.k == 0);
  CHECK(fixed.y == 0.0);
  const auto r = layered_reconstruct(3.1, 0.5, 1.0, 0.2);
  CHECK(r.scale == doctest::Approx(1.0));
  CHECK(r.y == doctest::Approx((static_cast<double>(r.k) + 0.2) * r.scale));
  CHECK(std::abs(r.y - 3.1) <= 0.5 * r.scale);

  Rng rng(11);
  std::vector<double> e;
  for (int t = 0; t < 100000; ++t) {
    const double x = 3.0 * rng.normal();
    e.push_back((layered_simulate(x, 2.0, rng).y - x) / 2.0);
  }
  CHECK(stats::ks_one_sample(e, stats::normal_cdf).pvalue > 0.01);
  const auto m = stats::sample_moments(e);
  CHECK(std::abs(m.mean) < 4 * m.se_mean);
  CHECK(std::abs(m.variance - 1.0) < 4 * m.se_variance);
  CHECK_THROWS_AS(layered_simulate(0.0, 0.0, rng), Error);
}

TEST_CASE("colouring produces the requested covariance") {
  Eigen::MatrixXd a(3, 3);
  a << 1.0, 0.0, 0.0, 0.5, 2.0, 0.0, -0.3, 0.4, 1.5;
  CHECK(colorize(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(1, 2, 3)) == Eigen::Vector3d(1, 2, 3));

  auto cfg = matched_config(3);
  cfg.covariance_factor = a;
  const Channel ch(cfg);
  Rng rng(12);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  const int trials = 40000;
  const Eigen::VectorXd x = gaussian(rng, 3);
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd e = ch.transmit(x, static_cast<std::uint64_t>(t)).y - x;
    cov += e * e.transpose();
  }
  cov /= trials;
  const Eigen::Matrix3d target = a * a.transpose();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CAPTURE(i);
      CAPTURE(j);
      const double se = std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) / trials);
      CHECK(std::abs(cov(i, j) - target(i, j)) < 0.05 * std::abs(target(i, j)) + 4 * se);
    }
}
