#pragma once

// Small statistics toolkit shared by the experiments: Kolmogorov-Smirnov tests,
// sample moments with standard errors, plug-in entropy.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace rdq::stats {

double normal_cdf(double x);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double pvalue = 1.0;
};

/// One-sample KS test of `samples` against a continuous CDF. Sorts a copy.
KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf);

/// Two-sample KS test.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se_mean = 0.0;
  double se_variance = 0.0;  // from the fourth central moment
};

SampleMoments sample_moments(std::span<const double> x);

/// Plug-in (maximum likelihood) entropy in bits of an integer sample.
double plugin_entropy_bits(std::span<const std::int64_t> values);

/// Value -> count table; ordered so sums run in a fixed order.
using Histogram = std::map<std::int64_t, std::uint64_t>;

void accumulate(Histogram& h, std::span<const std::int64_t> values);
void merge(Histogram& into, const Histogram& from);
double plugin_entropy_bits(const Histogram& counts);

}  // namespace rdq::stats
