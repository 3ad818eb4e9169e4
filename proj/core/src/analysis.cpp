#include "rdq/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include <fftw3.h>

#include "rdq/error.hpp"
#include "rdq/parallel.hpp"
#include "rdq/stats.hpp"

namespace rdq {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kMaxMassError = 1e-4;
constexpr std::size_t kMinKnnSamples = 10000;
constexpr std::size_t kMinRateTrials = 10000;

// Gauss-Legendre nodes and weights on [-1, 1] by Newton on P_n.
template <int N>
struct GaussLegendre {
  std::array<double, N> x{};
  std::array<double, N> w{};

  GaussLegendre() {
    for (int i = 0; i < N; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = z;
        for (int k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = N * (z * p1 - p0) / (z * z - 1.0);
        const double step = p1 / dp;
        z -= step;
        if (std::abs(step) < 1e-16) break;
      }
      x[static_cast<std::size_t>(i)] = z;
      w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

const GaussLegendre<12>& gauss_legendre() {
  static const GaussLegendre<12> rule;
  return rule;
}

double weibull_survival(double z, double lambda, double k) {
  if (z <= 0.0) return 1.0;
  if (lambda == 0.0) return 0.0;
  return std::exp(-std::pow(z / lambda, k));
}

// 2 t f(t^2), the density of |sU + Z| at t >= 0.
double abs_density(const NoiseParams& p, double t) {
  const double h = 0.5 * p.s;
  if (t <= h) {
    return (2.0 - weibull_survival(t + h, p.lambda, p.k) - weibull_survival(h - t, p.lambda, p.k)) / p.s;
  }
  return (weibull_survival(t - h, p.lambda, p.k) - weibull_survival(t + h, p.lambda, p.k)) / p.s;
}

// Composite rule with panels no wider than a tenth of the smaller of s and
// lambda, so one panel never spans the bulk of the density.
double integrate_abs_density(const NoiseParams& p, double ta, double tb) {
  const auto& rule = gauss_legendre();
  const double width = 0.1 * std::max(std::min(p.s, p.lambda), 1e-3);
  const auto panels = static_cast<std::size_t>(std::clamp(std::ceil((tb - ta) / width), 1.0, 1e6));
  const double h = (tb - ta) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t j = 0; j < panels; ++j) {
    const double mid = ta + (static_cast<double>(j) + 0.5) * h;
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) acc += rule.w[i] * abs_density(p, mid + 0.5 * h * rule.x[i]);
    total += acc * 0.5 * h;
  }
  return total;
}

void require_integer_params(const NoiseParams& p) {
  if (p.lattice.name() != LatticeName::kZn) {
    throw Error(ErrorCode::kInvalidArgument, "density of (sU+Z)^2 needs integer-lattice parameters");
  }
  if (!(p.s > 0.0) || !(p.lambda >= 0.0) || !(p.k > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise parameters must satisfy s > 0, lambda >= 0, k > 0");
  }
}

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// The FFTW planner is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::complex<double> int_power(std::complex<double> base, int n) {
  std::complex<double> result(1.0, 0.0);
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

// Distance from v to its k-th nearest neighbour in `sorted`. `pos` is the
// insertion point of v, or v's own index when exclude_pos is set.
double kth_distance(const std::vector<double>& sorted, double v, std::size_t pos, bool exclude_pos, int k) {
  std::ptrdiff_t left = static_cast<std::ptrdiff_t>(pos) - 1;
  std::size_t right = exclude_pos ? pos + 1 : pos;
  double dist = 0.0;
  for (int found = 0; found < k; ++found) {
    const double dl = left >= 0 ? v - sorted[static_cast<std::size_t>(left)] : std::numeric_limits<double>::infinity();
    const double dr = right < sorted.size() ? sorted[right] - v : std::numeric_limits<double>::infinity();
    if (dl <= dr) {
      dist = dl;
      --left;
    } else {
      dist = dr;
      ++right;
    }
  }
  return dist;
}

}  // namespace

double density_squared_marginal(const NoiseParams& params, double x) {
  if (!(x > 0.0)) return 0.0;
  const double t = std::sqrt(x);
  return abs_density(params, t) / (2.0 * t);
}

double density_squared_mass(const NoiseParams& params, double a, double b) {
  if (!(a >= 0.0) || !(b >= a)) throw Error(ErrorCode::kDomainError, "mass interval must satisfy 0 <= a <= b");
  const double ta = std::sqrt(a);
  const double tb = std::sqrt(b);
  // The density of |sU+Z| has a kink at s/2.
  const double h = 0.5 * params.s;
  if (ta < h && h < tb) return integrate_abs_density(params, ta, h) + integrate_abs_density(params, h, tb);
  return integrate_abs_density(params, ta, tb);
}

double chi2_log_density(int n, double x) {
  if (n < 1) throw Error(ErrorCode::kDomainError, "chi-squared needs n >= 1");
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double h = 0.5 * n;
  return (h - 1.0) * std::log(x) - 0.5 * x - h * kLn2 - std::lgamma(h);
}

double chi2_density(int n, double x) {
  if (!(x > 0.0)) {
    if (n < 1) throw Error(ErrorCode::kDomainError, "chi-squared needs n >= 1");
    return 0.0;
  }
  return std::exp(chi2_log_density(n, x));
}

double DensityGrid::mass() const { return std::accumulate(values.begin(), values.end(), 0.0) * dx; }

double DensityGrid::mean() const {
  double m = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    m += values[i];
    acc += values[i] * midpoint(i);
  }
  return acc / m;
}

double DensityGrid::variance() const {
  const double mu = mean();
  double m = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = midpoint(i) - mu;
    m += values[i];
    acc += values[i] * d * d;
  }
  return acc / m;
}

DensityGrid make_marginal_grid(const NoiseParams& params, double dx, double upper) {
  require_integer_params(params);
  if (!(dx > 0.0) || !(upper > dx)) throw Error(ErrorCode::kInvalidArgument, "grid needs 0 < dx < upper");
  const auto cells = static_cast<std::size_t>(std::ceil(upper / dx));
  DensityGrid g;
  g.x0 = 0.0;
  g.dx = dx;
  g.values.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double a = static_cast<double>(i) * dx;
    g.values[i] = density_squared_mass(params, a, a + dx) / dx;
  }
  const double mass = g.mass();
  if (!(mass > 0.0)) throw Error(ErrorCode::kGridTooCoarse, "marginal grid carries no mass");
  for (auto& v : g.values) v /= mass;
  return g;
}

ConvolutionResult convolve_n(const DensityGrid& base, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "convolution count must be >= 1");
  if (base.values.empty() || !(base.dx > 0.0)) throw Error(ErrorCode::kInvalidArgument, "empty density grid");
  const std::size_t cells = base.values.size();
  ConvolutionResult out;
  out.grid.dx = base.dx;
  out.grid.x0 = n * base.x0 + 0.5 * (n - 1) * base.dx;
  if (n == 1) {
    out.grid.values = base.values;
    const double mass = out.grid.mass();
    out.mass_error = std::abs(mass - 1.0);
    for (auto& v : out.grid.values) v /= mass;
    return out;
  }

  // Mass that a circular transform of length P would fold back lies beyond
  // P dx, far in the tail once P >= 4 cells.
  const std::size_t size = next_pow2(4 * cells);
  const std::size_t bins = size / 2 + 1;
  double* real = fftw_alloc_real(size);
  fftw_complex* spec = fftw_alloc_complex(bins);
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(size), real, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(size), spec, real, FFTW_ESTIMATE);
  }
  std::fill(real, real + size, 0.0);
  for (std::size_t i = 0; i < cells; ++i) real[i] = base.values[i] * base.dx;
  fftw_execute(forward);
  for (std::size_t b = 0; b < bins; ++b) {
    const auto c = int_power(std::complex<double>(spec[b][0], spec[b][1]), n);
    spec[b][0] = c.real();
    spec[b][1] = c.imag();
  }
  fftw_execute(backward);

  out.grid.values.resize(cells);
  const double scale = 1.0 / (static_cast<double>(size) * base.dx);
  for (std::size_t i = 0; i < cells; ++i) out.grid.values[i] = std::max(0.0, real[i] * scale);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  fftw_free(real);
  fftw_free(spec);

  const double mass = out.grid.mass();
  out.mass_error = std::abs(mass - 1.0);
  if (!(out.mass_error <= kMaxMassError)) {
    throw Error(ErrorCode::kGridTooCoarse,
                "convolution mass error " + std::to_string(out.mass_error) + " at n = " + std::to_string(n));
  }
  for (auto& v : out.grid.values) v /= mass;
  return out;
}

std::string_view kl_method_name(KLMethod m) {
  switch (m) {
    case KLMethod::kFftExact:
      return "fft_exact";
    case KLMethod::kKnnSample:
      return "knn_sample";
  }
  return "unknown";
}

KLReport kl_exact(const NoiseParams& params, int n, std::size_t grid_points) {
  if (n < 5) throw Error(ErrorCode::kInvalidArgument, "kl_exact needs n >= 5, got " + std::to_string(n));
  require_integer_params(params);
  const double upper = n + 12.0 * std::sqrt(static_cast<double>(n));
  double dx = std::min(0.01, params.s * params.s / 400.0);
  if (grid_points > 0) dx = std::min(dx, upper / static_cast<double>(grid_points));

  const auto base = make_marginal_grid(params, dx, upper);
  const auto conv = convolve_n(base, n);
  const auto& p = conv.grid.values;
  const double pmax = *std::max_element(p.begin(), p.end());
  // Transform round-off leaves values around 1e-16 pmax; those cells carry no
  // information about p.
  const double floor = pmax * 1e-14;

  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > floor)) continue;
    const double lq = chi2_log_density(n, conv.grid.midpoint(i));
    if (!std::isfinite(lq)) {
      throw Error(ErrorCode::kSupportViolation, "p > 0 where the chi-squared density vanishes");
    }
    acc += p[i] * (std::log(p[i]) - lq);
  }
  KLReport r;
  r.n = n;
  r.method = KLMethod::kFftExact;
  r.kl_bits_raw = acc * dx / kLn2;
  r.kl_bits = std::max(0.0, r.kl_bits_raw);
  r.diagnostics.grid_mass_error = conv.mass_error;
  r.diagnostics.grid_dx = dx;
  return r;
}

KnnEstimate knn_divergence_1d(std::vector<double> p, std::vector<double> q, int k_nn) {
  if (k_nn < 1) throw Error(ErrorCode::kInvalidArgument, "k_nn must be >= 1");
  if (p.size() <= static_cast<std::size_t>(k_nn) || q.size() < static_cast<std::size_t>(k_nn)) {
    throw Error(ErrorCode::kInsufficientSamples, "too few samples for k_nn = " + std::to_string(k_nn));
  }
  std::sort(p.begin(), p.end());
  std::sort(q.begin(), q.end());
  std::vector<double> terms;
  terms.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    const double rho = kth_distance(p, v, i, true, k_nn);
    const auto pos = static_cast<std::size_t>(std::lower_bound(q.begin(), q.end(), v) - q.begin());
    const double nu = kth_distance(q, v, pos, false, k_nn);
    if (!(rho > 0.0) || !(nu > 0.0)) continue;
    terms.push_back(std::log(nu / rho));
  }
  if (terms.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "all nearest-neighbour distances vanished");
  const auto moments = stats::sample_moments(terms);
  const double n = static_cast<double>(p.size());
  const double m = static_cast<double>(q.size());
  KnnEstimate e;
  e.bits = (moments.mean + std::log(m / (n - 1.0))) / kLn2;
  e.standard_error = moments.se_mean / kLn2;
  return e;
}

KLReport kl_knn(const NoiseParams& params, int n, std::size_t samples, int k_nn, Rng& rng) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "dimension must be >= 1");
  if (samples < kMinKnnSamples) {
    throw Error(ErrorCode::kInsufficientSamples, "kl_knn needs at least 10^4 samples");
  }
  if (!(params.s > 0.0) || !(params.lambda >= 0.0) || !(params.k > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise parameters must satisfy s > 0, lambda >= 0, k > 0");
  }
  const std::uint64_t p_seed = rng();
  const std::uint64_t q_seed = rng();
  std::vector<double> p(samples);
  std::vector<double> q(samples);
  parallel_for(samples, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rp = Rng::stream(p_seed, i);
      Rng rq = Rng::stream(q_seed, i);
      double sp = 0.0;
      double sq = 0.0;
      for (int j = 0; j < n; ++j) {
        const double w = params.s * (rp.uniform() - 0.5) + sample_weibull_one(params.lambda, params.k, rp);
        sp += w * w;
        const double g = rq.normal();
        sq += g * g;
      }
      p[i] = sp;
      q[i] = sq;
    }
  });
  const auto est = knn_divergence_1d(std::move(p), std::move(q), k_nn);
  KLReport r;
  r.n = n;
  r.method = KLMethod::kKnnSample;
  r.kl_bits_raw = est.bits;
  r.kl_bits = std::max(0.0, est.bits);
  r.diagnostics.knn_k = k_nn;
  r.diagnostics.standard_error = est.standard_error;
  return r;
}

ExcessBound excess_bound_lattice_detail(const LatticeSpec& lattice) {
  const auto& t = lattice.analytic_moments();
  if (!t) throw Error(ErrorCode::kUnknownLattice, lattice.label() + " has no tabulated moments");
  const double m = lattice.dim();
  const double per_dim = second_moment_per_dim(lattice);
  ExcessBound b;
  b.bits_per_dim = 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e) - std::log2(lattice.cell_volume()) / m +
                   0.5 * std::log2(per_dim);
  // d/dmu of 1/2 log2(mu) is 1 / (2 mu ln 2).
  const double rel = t->mean_uncertainty / t->mean.value();
  b.uncertainty = 0.5 * rel / kLn2;
  return b;
}

double excess_bound_lattice(const LatticeSpec& lattice) { return excess_bound_lattice_detail(lattice).bits_per_dim; }

double excess_bound_layered() {
  constexpr double kEulerGamma = std::numbers::egamma;
  const double psi = 2.0 - kEulerGamma - 2.0 * kLn2;
  return 0.5 * std::log2(std::numbers::pi) + (1.0 - psi) / (2.0 * kLn2) - 1.0;
}

RateEstimate rate_estimate(const ChannelConfig& cfg, double source_sigma, std::size_t trials, Rng& rng) {
  if (!(source_sigma > 0.0)) throw Error(ErrorCode::kDomainError, "source sigma must be positive");
  if (trials < kMinRateTrials) throw Error(ErrorCode::kInsufficientSamples, "rate_estimate needs at least 10^4 trials");
  const Channel channel(cfg);
  const std::uint64_t source_seed = rng();
  // Fixed chunk count so the merged histogram is the same for any RD_THREADS.
  constexpr std::size_t kChunks = 64;
  std::vector<stats::Histogram> partial(kChunks);
  parallel_chunks(trials, kChunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Eigen::VectorXd x(cfg.n);
    for (std::size_t t = begin; t < end; ++t) {
      Rng src = Rng::stream(source_seed, t);
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = source_sigma * src.normal();
      stats::accumulate(partial[c], channel.encode(x, t).k_coords);
    }
  });
  stats::Histogram counts;
  for (const auto& h : partial) stats::merge(counts, h);
  RateEstimate r;
  r.trials = trials;
  r.h_k_per_dim = stats::plugin_entropy_bits(counts);
  r.mutual_info_per_dim = 0.5 * std::log2(1.0 + source_sigma * source_sigma);
  r.excess_per_dim = r.h_k_per_dim - r.mutual_info_per_dim;
  if (r.excess_per_dim < -0.05) {
    throw Error(ErrorCode::kNumericalFailure,
                "entropy estimate " + std::to_string(r.h_k_per_dim) + " falls below the information term");
  }
  return r;
}

}  // namespace rdq
