#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdq/analysis.hpp"
#include "rdq/channel.hpp"
#include "rdq/error.hpp"
#include "rdq/lattice.hpp"
#include "rdq/noise_match.hpp"
#include "rdq/parallel.hpp"
#include "rdq/random.hpp"
#include "rdq/stats.hpp"
#include "rdq/version.hpp"

namespace rdq::cli {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for seed derivation; each random ingredient of a run gets its
// own stream from the one user seed.
enum SeedTag : std::uint64_t {
  kRotationTag = 1,
  kDitherTag = 2,
  kPerturbTag = 3,
  kSourceTag = 4,
  kMomentTag = 5,
  kKnnTag = 6,
  kVoronoiTag = 7,
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CommonOpts {
  std::string format;
  std::string output;
};

void add_common(CLI::App* sub, CommonOpts& c, const std::string& default_format) {
  c.format = default_format;
  sub->add_option("--out", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sub->add_option("--output", c.output, "Write results to this file instead of stdout");
}

class Report {
 public:
  Report(std::string command, const CommonOpts& common) : command_(std::move(command)), common_(common) {}

  Json& config() { return config_; }
  const std::string& format() const { return common_.format; }

  // CSV: '#' header lines with version and resolved config, then the table.
  std::string csv(const std::vector<std::string>& columns, const std::vector<std::vector<std::string>>& rows) const {
    std::string s = "# rdq " + std::string(kVersion) + "\n# command = \"" + command_ + "\"\n";
    for (const auto& [key, value] : config_.items()) s += "# " + key + " = " + value.dump() + "\n";
    s += join(columns) + "\n";
    for (const auto& r : rows) s += join(r) + "\n";
    return s;
  }

  Json json_head() const {
    Json j;
    j["rdq_version"] = std::string(kVersion);
    j["command"] = command_;
    j["config"] = config_;
    return j;
  }

  void emit(const std::string& text, std::ostream& out) const {
    if (common_.output.empty()) {
      out << text;
      out.flush();
      return;
    }
    std::ofstream file(common_.output, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::kInvalidArgument, "cannot open output file " + common_.output);
    file << text;
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s.push_back(',');
      s += cells[i];
    }
    return s;
  }

  std::string command_;
  const CommonOpts& common_;
  Json config_ = Json::object();
};

ChannelSeeds seeds_from(std::uint64_t seed) {
  return {derive_seed(seed, kRotationTag), derive_seed(seed, kDitherTag), derive_seed(seed, kPerturbTag)};
}

NoiseParams matched_noise(const LatticeSpec& lattice, double k, std::size_t mc_samples, std::uint64_t seed) {
  if (lattice.name() == LatticeName::kZn) {
    NoiseParams p = solve_weibull_integer(k);
    p.lattice = lattice;
    return p;
  }
  Rng rng = Rng::stream(seed, kMomentTag);
  return solve_general(lattice, k, mc_samples, rng);
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  CommonOpts common;
  int n = 240;
  std::string lattice = "Z";
  double k = 1.0;
  double sigma = 1.0;
  std::size_t trials = 10000;
  std::uint64_t seed = 1;
  std::size_t mc_samples = 200000;
  int marginal = 0;
};

void setup_simulate(CLI::App& app, SimulateOpts& o) {
  auto* sub = app.add_subcommand("simulate", "Run the channel end to end and summarize y - x");
  sub->add_option("--n", o.n, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lattice", o.lattice, "Lattice name (Z, A2, D4, E8, ...)")->capture_default_str();
  sub->add_option("--k", o.k, "Weibull shape")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--sigma", o.sigma, "Source standard deviation")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--trials", o.trials, "Monte-Carlo trials")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}))->capture_default_str();
  sub->add_option("--seed", o.seed, "Seed")->capture_default_str();
  sub->add_option("--mc-samples", o.mc_samples, "Voronoi samples for non-integer matching")->capture_default_str();
  sub->add_option("--marginal", o.marginal, "Coordinate of y - x used for the KS test")->capture_default_str();
  add_common(sub, o.common, "json");
}

int run_simulate(const SimulateOpts& o, std::ostream& out) {
  Report rep("simulate", o.common);
  auto& c = rep.config();
  c["n"] = o.n;
  c["lattice"] = o.lattice;
  c["k"] = o.k;
  c["sigma"] = o.sigma;
  c["trials"] = o.trials;
  c["seed"] = o.seed;
  c["mc_samples"] = o.mc_samples;
  c["marginal"] = o.marginal;
  if (o.marginal < 0 || o.marginal >= o.n) throw Error(ErrorCode::kInvalidArgument, "--marginal must lie in [0, n)");

  ChannelConfig cfg;
  cfg.n = o.n;
  cfg.lattice = parse_lattice(o.lattice);
  cfg.noise = matched_noise(cfg.lattice, o.k, o.mc_samples, o.seed);
  cfg.seeds = seeds_from(o.seed);
  const Channel channel(cfg);
  const std::uint64_t source_seed = derive_seed(o.seed, kSourceTag);

  std::vector<double> sq(o.trials);
  std::vector<double> marginal(o.trials);
  constexpr std::size_t kChunks = 64;
  std::vector<stats::Histogram> hist(kChunks);
  parallel_chunks(o.trials, kChunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Eigen::VectorXd x(o.n);
    for (std::size_t t = begin; t < end; ++t) {
      Rng src = Rng::stream(source_seed, t);
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = o.sigma * src.normal();
      const auto tx = channel.transmit(x, t);
      const Eigen::VectorXd e = tx.y - x;
      sq[t] = e.squaredNorm();
      marginal[t] = e[o.marginal];
      stats::accumulate(hist[chunk], tx.message.k_coords);
    }
  });
  stats::Histogram counts;
  for (const auto& h : hist) stats::merge(counts, h);
  const auto m = stats::sample_moments(sq);
  const auto ks = stats::ks_one_sample(marginal, stats::normal_cdf);
  const double rate = stats::plugin_entropy_bits(counts);

  if (rep.format() == "csv") {
    rep.emit(rep.csv({"mean_sq_norm", "var_sq_norm", "ks_stat_marginal", "ks_pvalue", "rate_bits_per_dim"},
                     {{num(m.mean), num(m.variance), num(ks.statistic), num(ks.pvalue), num(rate)}}),
             out);
    return kOk;
  }
  Json j = rep.json_head();
  j["noise"] = {{"k", cfg.noise.k}, {"lambda", cfg.noise.lambda}, {"s", cfg.noise.s}};
  j["mean_sq_norm"] = m.mean;
  j["mean_sq_norm_se"] = m.se_mean;
  j["var_sq_norm"] = m.variance;
  j["var_sq_norm_se"] = m.se_variance;
  j["ks_stat_marginal"] = ks.statistic;
  j["ks_pvalue"] = ks.pvalue;
  j["rate_bits_per_dim"] = rate;
  rep.emit(j.dump(2) + "\n", out);
  return kOk;
}

// ---------------------------------------------------------------- match

struct MatchOpts {
  CommonOpts common;
  double k = 1.0;
  std::string lattice = "Z";
  std::string sweep;
  std::size_t mc_samples = 200000;
  std::uint64_t seed = 1;
};

void setup_match(CLI::App& app, MatchOpts& o) {
  auto* sub = app.add_subcommand("match", "Solve for the Weibull perturbation and lattice scale");
  sub->add_option("--k", o.k, "Weibull shape")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lattice", o.lattice, "Lattice name")->capture_default_str();
  sub->add_option("--sweep", o.sweep, "k0:k1:steps, integer lattice closed form, CSV output");
  sub->add_option("--mc-samples", o.mc_samples, "Voronoi samples for non-integer lattices")->capture_default_str();
  sub->add_option("--seed", o.seed, "Seed for non-integer lattices")->capture_default_str();
  add_common(sub, o.common, "");
}

struct SweepSpec {
  double k0 = 0.0;
  double k1 = 0.0;
  int steps = 0;
};

SweepSpec parse_sweep(const std::string& text) {
  SweepSpec s;
  const auto a = text.find(':');
  const auto b = text.find(':', a == std::string::npos ? a : a + 1);
  try {
    if (a == std::string::npos || b == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    s.k0 = std::stod(text.substr(0, a), &used);
    s.k1 = std::stod(text.substr(a + 1, b - a - 1));
    s.steps = std::stoi(text.substr(b + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "--sweep expects k0:k1:steps, got '" + text + "'");
  }
  if (!(s.k0 > 0.0) || !(s.k1 >= s.k0) || s.steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "--sweep needs 0 < k0 <= k1 and steps >= 1");
  }
  return s;
}

int run_match(const MatchOpts& o, std::ostream& out, std::ostream& err) {
  if (!o.sweep.empty()) {
    CommonOpts common = o.common;
    if (common.format.empty()) common.format = "csv";
    if (common.format != "csv") throw Error(ErrorCode::kInvalidArgument, "--sweep writes CSV only");
    const auto lattice = parse_lattice(o.lattice);
    if (lattice.name() != LatticeName::kZn) throw Error(ErrorCode::kInvalidArgument, "--sweep uses the integer lattice");
    const auto sw = parse_sweep(o.sweep);
    Report rep("match", common);
    rep.config()["sweep"] = o.sweep;
    rep.config()["lattice"] = o.lattice;
    std::vector<std::vector<std::string>> rows;
    std::optional<Error> first_failure;
    for (int i = 0; i < sw.steps; ++i) {
      const double k = sw.steps == 1 ? sw.k0 : sw.k0 + (sw.k1 - sw.k0) * i / (sw.steps - 1);
      try {
        const auto p = solve_weibull_integer(k);
        rows.push_back({num(k), num(p.s), num(p.lambda), num(integer_scale_gap(k))});
      } catch (const Error& e) {
        rows.push_back({num(k), num(kNaN), num(kNaN), num(kNaN)});
        if (!first_failure) first_failure = e;
      }
    }
    rep.emit(rep.csv({"k", "s", "lambda", "gap_s"}, rows), out);
    if (first_failure) {
      err << first_failure->what() << "\n";
      return kNumerical;
    }
    return kOk;
  }

  CommonOpts common = o.common;
  if (common.format.empty()) common.format = "json";
  Report rep("match", common);
  rep.config()["k"] = o.k;
  rep.config()["lattice"] = o.lattice;
  const auto lattice = parse_lattice(o.lattice);
  NoiseParams p;
  std::array<double, 2> residuals{};
  if (lattice.name() == LatticeName::kZn) {
    p = solve_weibull_integer(o.k);
    p.lattice = lattice;
    residuals = integer_match_residuals(p);
  } else {
    rep.config()["mc_samples"] = o.mc_samples;
    rep.config()["seed"] = o.seed;
    Rng rng = Rng::stream(o.seed, kMomentTag);
    const auto est = estimate_block_moments(lattice, o.mc_samples, rng);
    const auto g = solve_general(est, lattice, o.k);
    p = g.params;
    residuals = g.residuals;
  }
  if (rep.format() == "csv") {
    rep.emit(rep.csv({"k", "lambda", "s", "residual_mean", "residual_var"},
                     {{num(p.k), num(p.lambda), num(p.s), num(residuals[0]), num(residuals[1])}}),
             out);
    return kOk;
  }
  Json j = rep.json_head();
  j["k"] = p.k;
  j["lambda"] = p.lambda;
  j["s"] = p.s;
  j["residuals"] = {residuals[0], residuals[1]};
  rep.emit(j.dump(2) + "\n", out);
  return kOk;
}

// ---------------------------------------------------------------- kl-scaling

struct KlOpts {
  CommonOpts common;
  double k = 1.0;
  std::vector<int> ns = {10, 20, 40, 80, 160, 320};
  std::string method = "fft";
  std::size_t samples = 100000;
  int knn_k = 5;
  std::uint64_t seed = 1;
  std::size_t grid_points = 0;
};

void setup_kl(CLI::App& app, KlOpts& o) {
  auto* sub = app.add_subcommand("kl-scaling", "KL divergence of ||sU+Z||^2 from chi-squared versus n");
  sub->add_option("--k", o.k, "Weibull shape")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--n", o.ns, "Comma-separated dimensions")->delimiter(',')->capture_default_str();
  sub->add_option("--method", o.method, "fft (exact) or knn (sample)")
      ->check(CLI::IsMember({"fft", "knn", "fft_exact", "knn_sample"}))
      ->capture_default_str();
  sub->add_option("--samples", o.samples, "Samples per distribution for knn")->capture_default_str();
  sub->add_option("--knn-k", o.knn_k, "Neighbour order for knn")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--seed", o.seed, "Seed for knn")->capture_default_str();
  sub->add_option("--grid-points", o.grid_points, "Minimum grid cells for fft (0: default spacing)")->capture_default_str();
  add_common(sub, o.common, "csv");
}

int run_kl(const KlOpts& o, std::ostream& out) {
  const bool knn = o.method.rfind("knn", 0) == 0;
  std::vector<int> ns = o.ns;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  Report rep("kl-scaling", o.common);
  auto& c = rep.config();
  c["k"] = o.k;
  c["n"] = ns;
  c["method"] = knn ? "knn" : "fft";
  if (knn) {
    c["samples"] = o.samples;
    c["knn_k"] = o.knn_k;
    c["seed"] = o.seed;
  } else {
    c["grid_points"] = o.grid_points;
  }

  const auto p = solve_weibull_integer(o.k);
  std::vector<KLReport> reports;
  for (int n : ns) {
    if (knn) {
      Rng rng = Rng::stream(derive_seed(o.seed, kKnnTag), static_cast<std::uint64_t>(n));
      reports.push_back(kl_knn(p, n, o.samples, o.knn_k, rng));
    } else {
      reports.push_back(kl_exact(p, n, o.grid_points));
    }
  }

  if (rep.format() == "csv") {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports) {
      rows.push_back({std::to_string(r.n), num(r.kl_bits), std::string(kl_method_name(r.method)),
                      r.method == KLMethod::kFftExact ? num(r.diagnostics.grid_mass_error) : num(kNaN)});
    }
    rep.emit(rep.csv({"n", "kl_bits", "method", "mass_err"}, rows), out);
    return kOk;
  }
  Json j = rep.json_head();
  j["rows"] = Json::array();
  for (const auto& r : reports) {
    Json row{{"n", r.n}, {"kl_bits", r.kl_bits}, {"kl_bits_raw", r.kl_bits_raw}, {"method", kl_method_name(r.method)}};
    if (r.method == KLMethod::kFftExact) {
      row["mass_err"] = r.diagnostics.grid_mass_error;
      row["dx"] = r.diagnostics.grid_dx;
    } else {
      row["knn_k"] = r.diagnostics.knn_k;
      row["standard_error_bits"] = r.diagnostics.standard_error;
    }
    j["rows"].push_back(row);
  }
  rep.emit(j.dump(2) + "\n", out);
  return kOk;
}

// ---------------------------------------------------------------- excess

struct ExcessOpts {
  CommonOpts common;
  bool all = false;
  bool layered = false;
  std::string lattice;
};

void setup_excess(CLI::App& app, ExcessOpts& o) {
  auto* sub = app.add_subcommand("excess", "Excess-information bounds in bits per dimension");
  auto* all = sub->add_flag("--all", o.all, "Every tabulated lattice");
  auto* layered = sub->add_flag("--layered", o.layered, "The layered-quantization constant");
  auto* lat = sub->add_option("--lattice", o.lattice, "One lattice");
  all->excludes(layered)->excludes(lat);
  layered->excludes(lat);
  add_common(sub, o.common, "csv");
}

int run_excess(const ExcessOpts& o, std::ostream& out) {
  Report rep("excess", o.common);
  if (o.layered) {
    rep.config()["layered"] = true;
    const double v = excess_bound_layered();
    if (rep.format() == "csv") {
      rep.emit(rep.csv({"excess_bits"}, {{num(v)}}), out);
    } else {
      Json j = rep.json_head();
      j["excess_bits"] = v;
      rep.emit(j.dump(2) + "\n", out);
    }
    return kOk;
  }

  std::vector<LatticeSpec> lattices;
  if (!o.lattice.empty()) {
    rep.config()["lattice"] = o.lattice;
    lattices.push_back(parse_lattice(o.lattice));
  } else {
    rep.config()["all"] = true;
    lattices = table_lattices();
  }
  std::vector<std::vector<std::string>> rows;
  Json list = Json::array();
  for (const auto& l : lattices) {
    const auto t = moments_analytic(l);
    const auto b = excess_bound_lattice_detail(l);
    rows.push_back({l.label(), std::to_string(l.dim()), num(l.cell_volume()), num(t.mean),
                    t.variance ? num(*t.variance) : std::string(), num(b.bits_per_dim)});
    Json row{{"lattice", l.label()}, {"m", l.dim()}, {"volume", l.cell_volume()}, {"mean_sq", t.mean}};
    row["var_sq"] = t.variance ? Json(*t.variance) : Json(nullptr);
    row["excess_bits_per_dim"] = b.bits_per_dim;
    if (b.uncertainty > 0.0) row["excess_uncertainty_bits_per_dim"] = b.uncertainty;
    list.push_back(row);
  }
  if (rep.format() == "csv") {
    rep.emit(rep.csv({"lattice", "m", "volume", "mean_sq", "var_sq", "excess_bits_per_dim"}, rows), out);
  } else {
    Json j = rep.json_head();
    j["rows"] = list;
    rep.emit(j.dump(2) + "\n", out);
  }
  return kOk;
}

// ---------------------------------------------------------------- lattices

struct LatticesOpts {
  CommonOpts common;
  std::string basis;
};

void setup_lattices(CLI::App& app, LatticesOpts& o) {
  auto* sub = app.add_subcommand("lattices", "List supported lattices or export a basis");
  sub->add_option("--basis", o.basis, "Export this lattice's generator matrix (rows are basis vectors)");
  add_common(sub, o.common, "csv");
}

int run_lattices(const LatticesOpts& o, std::ostream& out) {
  Report rep("lattices", o.common);
  if (!o.basis.empty()) {
    rep.config()["basis"] = o.basis;
    const auto l = parse_lattice(o.basis);
    const auto& b = l.basis();
    if (b.size() == 0) throw Error(ErrorCode::kUnsupportedLattice, l.label() + " carries no basis");
    if (rep.format() == "csv") {
      std::vector<std::string> cols;
      for (Eigen::Index j = 0; j < b.cols(); ++j) cols.push_back("c" + std::to_string(j));
      std::vector<std::vector<std::string>> rows;
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        std::vector<std::string> r;
        for (Eigen::Index j = 0; j < b.cols(); ++j) r.push_back(num(b(i, j)));
        rows.push_back(r);
      }
      rep.emit(rep.csv(cols, rows), out);
    } else {
      Json j = rep.json_head();
      j["lattice"] = l.label();
      j["basis"] = Json::array();
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < b.cols(); ++k) row.push_back(b(i, k));
        j["basis"].push_back(row);
      }
      rep.emit(j.dump(2) + "\n", out);
    }
    return kOk;
  }

  std::vector<LatticeSpec> lattices{make_lattice(LatticeName::kZn, 1)};
  for (auto& l : table_lattices()) lattices.push_back(l);
  std::vector<std::vector<std::string>> rows;
  Json list = Json::array();
  for (const auto& l : lattices) {
    const auto t = moments_analytic(l);
    rows.push_back({l.label(), std::to_string(l.dim()), num(l.cell_volume()), num(l.covering_radius()), num(t.mean),
                    t.variance ? num(*t.variance) : std::string(), l.supports_decoding() ? "1" : "0"});
    Json row{{"lattice", l.label()}, {"m", l.dim()}, {"volume", l.cell_volume()}, {"covering_radius", l.covering_radius()},
             {"mean_sq", t.mean}};
    row["var_sq"] = t.variance ? Json(*t.variance) : Json(nullptr);
    row["decodable"] = l.supports_decoding();
    list.push_back(row);
  }
  if (rep.format() == "csv") {
    rep.emit(rep.csv({"lattice", "m", "volume", "covering_radius", "mean_sq", "var_sq", "decodable"}, rows), out);
  } else {
    Json j = rep.json_head();
    j["rows"] = list;
    rep.emit(j.dump(2) + "\n", out);
  }
  return kOk;
}

// ---------------------------------------------------------------- moments

struct MomentsOpts {
  CommonOpts common;
  std::vector<std::string> lattices;
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
};

void setup_moments(CLI::App& app, MomentsOpts& o) {
  auto* sub = app.add_subcommand("moments", "Monte-Carlo Voronoi-cell moments against the tabulated values");
  sub->add_option("--lattice", o.lattices, "Lattices (default: every decodable tabulated lattice)")->delimiter(',');
  sub->add_option("--samples", o.samples, "Samples per lattice")->capture_default_str();
  sub->add_option("--seed", o.seed, "Seed")->capture_default_str();
  add_common(sub, o.common, "csv");
}

int run_moments(const MomentsOpts& o, std::ostream& out) {
  Report rep("moments", o.common);
  std::vector<LatticeSpec> lattices;
  if (o.lattices.empty()) {
    for (auto& l : table_lattices()) {
      if (l.supports_decoding()) lattices.push_back(l);
    }
  } else {
    for (const auto& name : o.lattices) lattices.push_back(parse_lattice(name));
  }
  Json names = Json::array();
  for (const auto& l : lattices) names.push_back(l.label());
  rep.config()["lattice"] = names;
  rep.config()["samples"] = o.samples;
  rep.config()["seed"] = o.seed;

  std::vector<MonteCarloMoments> results(lattices.size());
  parallel_for(lattices.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::stream(derive_seed(o.seed, kVoronoiTag), static_cast<std::uint64_t>(lattices[i].name()),
                            static_cast<std::uint64_t>(lattices[i].dim()));
      results[i] = moments_montecarlo(lattices[i], o.samples, rng);
    }
  });

  std::vector<std::vector<std::string>> rows;
  Json list = Json::array();
  for (std::size_t i = 0; i < lattices.size(); ++i) {
    const auto& l = lattices[i];
    const auto& r = results[i];
    const auto t = moments_analytic(l);
    const double tv = t.variance ? *t.variance : kNaN;
    const double z_mean = (r.mean - t.mean) / r.se_mean;
    const double z_var = (r.variance - tv) / r.se_variance;
    rows.push_back({l.label(), std::to_string(l.dim()), std::to_string(o.samples), num(r.mean), num(r.se_mean),
                    num(r.variance), num(r.se_variance), num(t.mean), num(tv), num(z_mean), num(z_var)});
    list.push_back(Json{{"lattice", l.label()}, {"m", l.dim()}, {"samples", o.samples}, {"mean_sq", r.mean},
                        {"mean_sq_se", r.se_mean}, {"var_sq", r.variance}, {"var_sq_se", r.se_variance},
                        {"table_mean_sq", t.mean}, {"table_var_sq", tv}, {"z_mean", z_mean}, {"z_var", z_var}});
  }
  if (rep.format() == "csv") {
    rep.emit(rep.csv({"lattice", "m", "samples", "mean_sq", "mean_sq_se", "var_sq", "var_sq_se", "table_mean_sq",
                      "table_var_sq", "z_mean", "z_var"},
                     rows),
             out);
  } else {
    Json j = rep.json_head();
    j["rows"] = list;
    rep.emit(j.dump(2) + "\n", out);
  }
  return kOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownLattice:
    case ErrorCode::kUnsupportedLattice:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kInvalidArgument:
      return kUsage;
    default:
      return kNumerical;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rotated dithered lattice quantization: channel simulation experiments", "rdq"};
  app.set_config("--config", "", "TOML or INI file; command-line flags take precedence");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);

  SimulateOpts simulate;
  MatchOpts match;
  KlOpts kl;
  ExcessOpts excess;
  LatticesOpts lattices;
  MomentsOpts moments;
  setup_simulate(app, simulate);
  setup_match(app, match);
  setup_kl(app, kl);
  setup_excess(app, excess);
  setup_lattices(app, lattices);
  setup_moments(app, moments);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kOk;
    err << app.help();
    return kUsage;
  }

  const std::string which = app.get_subcommands().front()->get_name();
  try {
    if (which == "simulate") return run_simulate(simulate, out);
    if (which == "match") return run_match(match, out, err);
    if (which == "kl-scaling") return run_kl(kl, out);
    if (which == "excess") return run_excess(excess, out);
    if (which == "lattices") return run_lattices(lattices, out);
    if (which == "moments") return run_moments(moments, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    const int code = exit_code_for(e.code());
    if (code == kUsage) err << app.get_subcommand(which)->help();
    return code;
  } catch (const std::exception& e) {
    err << "NumericalFailure: " << e.what() << "\n";
    return kNumerical;
  }
  err << app.help();
  return kUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("rdq");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace rdq::cli
