#include "rdq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <map>

#include "rdq/error.hpp"

namespace rdq::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // P(K <= l) = sqrt(2 pi)/l * sum exp(-(2k-1)^2 pi^2 / (8 l^2))
    const double c = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 8; ++k) {
      const double t = 2.0 * k - 1.0;
      cdf += std::exp(c * t * t);
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

namespace {

double ks_pvalue(double d, double n_eff) {
  const double sn = std::sqrt(n_eff);
  return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

}  // namespace

KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw Error(ErrorCode::kInsufficientSamples, "KS test on empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_pvalue(d, n)};
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kInsufficientSamples, "KS test on empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_pvalue(d, na * nb / (na + nb))};
}

SampleMoments sample_moments(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "need at least two samples");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double c = (v - mean) * (v - mean);
    m2 += c;
    m4 += c * c;
  }
  SampleMoments out;
  out.mean = mean;
  out.variance = m2 / (n - 1.0);
  m2 /= n;
  m4 /= n;
  out.se_mean = std::sqrt(out.variance / n);
  out.se_variance = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  return out;
}

void accumulate(Histogram& h, std::span<const std::int64_t> values) {
  for (auto v : values) ++h[v];
}

void merge(Histogram& into, const Histogram& from) {
  for (const auto& [value, count] : from) into[value] += count;
}

double plugin_entropy_bits(const Histogram& counts) {
  std::uint64_t total = 0;
  for (const auto& [value, count] : counts) total += count;
  if (total == 0) return 0.0;
  const double n = static_cast<double>(total);
  double h = 0.0;
  for (const auto& [value, count] : counts) {
    const double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double plugin_entropy_bits(std::span<const std::int64_t> values) {
  Histogram h;
  accumulate(h, values);
  return plugin_entropy_bits(h);
}

}  // namespace rdq::stats
