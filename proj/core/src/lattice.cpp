#include "rdq/lattice.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "rdq/error.hpp"

namespace rdq {

struct LatticeAccess {
  static const Eigen::MatrixXd& basis_t_inverse(const LatticeSpec& l) { return l.basis_t_inverse_; }
  static const Eigen::MatrixXd& gram_upper(const LatticeSpec& l) { return l.gram_upper_; }
  static const Eigen::MatrixXd& enum_map(const LatticeSpec& l) { return l.enum_map_; }
  static const Eigen::MatrixXd& helmert(const LatticeSpec& l) { return l.helmert_; }
};

namespace {

// Decision margin below which a fast decoder defers to exact enumeration.
constexpr double kDecisionMargin = 1e-10;
// Squared distances closer than this are treated as ties.
constexpr double kTieTolerance = 1e-10;

// Nearest integer with halves rounded down, which is the lexicographically
// smallest choice on a coordinate tie.
inline double round_half_down(double v) { return std::ceil(v - 0.5); }

Eigen::MatrixXd cartan_from_edges(int m, std::initializer_list<std::pair<int, int>> edges) {
  Eigen::MatrixXd c = 2.0 * Eigen::MatrixXd::Identity(m, m);
  for (auto [a, b] : edges) {
    c(a, b) = -1.0;
    c(b, a) = -1.0;
  }
  return c;
}

Eigen::MatrixXd helmert_frame(int m) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  for (int j = 0; j < m; ++j) {
    const double norm = std::sqrt(static_cast<double>((j + 1) * (j + 2)));
    for (int i = 0; i <= j; ++i) h(i, j) = 1.0 / norm;
    h(j + 1, j) = -static_cast<double>(j + 1) / norm;
  }
  return h;
}

Eigen::MatrixXd root_basis_a(int m, const Eigen::MatrixXd& helmert) {
  Eigen::MatrixXd b(m, m);
  for (int i = 0; i < m; ++i) b.row(i) = helmert.row(i) - helmert.row(i + 1);
  return b;
}

Eigen::MatrixXd root_basis_d(int m) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
  b(0, 0) = -1.0;
  b(0, 1) = -1.0;
  for (int i = 1; i < m; ++i) {
    b(i, i - 1) = 1.0;
    b(i, i) = -1.0;
  }
  return b;
}

Eigen::MatrixXd root_basis_e8() {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(8, 8);
  b(0, 0) = 2.0;
  for (int i = 1; i < 7; ++i) {
    b(i, i - 1) = -1.0;
    b(i, i) = 1.0;
  }
  b.row(7).setConstant(0.5);
  return b;
}

// Lower-triangular Cholesky factor of the Cartan matrix: its rows realize the
// simple roots in R^m with the right Gram matrix.
Eigen::MatrixXd basis_from_gram(const Eigen::MatrixXd& gram) {
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  return llt.matrixL();
}

TabulatedMoments tab(std::int64_t mn, std::int64_t md, std::int64_t vn, std::int64_t vd) {
  return TabulatedMoments{Rational{mn, md}, Rational{vn, vd}, 0.0};
}

double a_covering_radius(int m) {
  const int a = (m + 1) / 2;
  return std::sqrt(static_cast<double>(a * (m + 1 - a)) / static_cast<double>(m + 1));
}

bool lex_less(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// ---------------------------------------------------------------------------
// Exact enumeration (Fincke-Pohst with radius shrinking).

struct Enumerator {
  const Eigen::MatrixXd& r;
  std::span<const double> y;
  int m;
  double radius2;
  std::vector<std::int64_t> k;
  std::vector<std::int64_t> best;
  double best_d2 = std::numeric_limits<double>::infinity();
  bool found = false;

  void leaf(double d2) {
    if (!found || d2 < best_d2 - kTieTolerance ||
        (d2 <= best_d2 + kTieTolerance && lex_less(k, best))) {
      best = k;
      best_d2 = found ? std::min(best_d2, d2) : d2;
      found = true;
      radius2 = std::min(radius2, best_d2 + kTieTolerance);
    }
  }

  void level(int i, double partial) {
    double c = y[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < m; ++j) c -= r(i, j) * static_cast<double>(k[static_cast<std::size_t>(j)]);
    const double rii = r(i, i);
    c /= rii;
    const double rem = radius2 - partial;
    if (rem < 0.0) return;
    const double w = std::sqrt(rem) / rii;
    const auto lo = static_cast<std::int64_t>(std::ceil(c - w));
    const auto hi = static_cast<std::int64_t>(std::floor(c + w));
    for (std::int64_t v = lo; v <= hi; ++v) {
      const double d = rii * (static_cast<double>(v) - c);
      const double p = partial + d * d;
      if (p > radius2) continue;
      k[static_cast<std::size_t>(i)] = v;
      if (i == 0) {
        leaf(p);
      } else {
        level(i - 1, p);
      }
    }
  }
};

bool enumerate_closest(const LatticeSpec& lattice, std::span<const double> x, double radius,
                       std::span<std::int64_t> coords) {
  const int m = lattice.dim();
  const auto& r = LatticeAccess::gram_upper(lattice);
  const auto& map = LatticeAccess::enum_map(lattice);
  thread_local std::vector<double> y;
  y.assign(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += map(i, j) * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  Enumerator e{r, y, m, radius * radius, std::vector<std::int64_t>(static_cast<std::size_t>(m), 0),
               {}};
  e.level(m - 1, 0.0);
  if (!e.found) return false;
  std::copy(e.best.begin(), e.best.end(), coords.begin());
  return true;
}

void embed(const LatticeSpec& lattice, std::span<const std::int64_t> coords, std::span<double> out) {
  const auto& b = lattice.basis();
  const int m = lattice.dim();
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += static_cast<double>(coords[static_cast<std::size_t>(i)]) * b(i, j);
    out[static_cast<std::size_t>(j)] = acc;
  }
}

void coords_from_embedding(const LatticeSpec& lattice, std::span<const double> p,
                           std::span<std::int64_t> coords) {
  const auto& inv = LatticeAccess::basis_t_inverse(lattice);
  const int m = lattice.dim();
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += inv(i, j) * p[static_cast<std::size_t>(j)];
    coords[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::llround(acc));
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return d2;
}

// ---------------------------------------------------------------------------
// Fast decoders. Each returns true when a decision was within kDecisionMargin
// of a tie, in which case the caller resolves the point by enumeration.

// D_n: round everything; on odd parity re-round the worst coordinate the other way.
bool decode_d(std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  bool ambiguous = false;
  std::int64_t parity = 0;
  std::size_t worst = 0;
  double worst_err = -1.0;
  double second_err = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = round_half_down(x[i]);
    out[i] = f;
    parity += static_cast<std::int64_t>(f);
    const double err = std::abs(x[i] - f);
    if (0.5 - err < kDecisionMargin) ambiguous = true;
    if (err > worst_err) {
      second_err = worst_err;
      worst_err = err;
      worst = i;
    } else if (err > second_err) {
      second_err = err;
    }
  }
  if (parity % 2 != 0) {
    if (worst_err - second_err < kDecisionMargin) ambiguous = true;
    out[worst] += (x[worst] - out[worst] >= 0.0) ? 1.0 : -1.0;
  }
  return ambiguous;
}

// A_n in the sum-zero hyperplane of R^{n+1}.
bool decode_a(const LatticeSpec& lattice, std::span<const double> x, std::span<double> out,
              std::span<std::int64_t> coords) {
  const auto& h = LatticeAccess::helmert(lattice);
  const int m = lattice.dim();
  const auto n1 = static_cast<std::size_t>(m + 1);
  thread_local std::vector<double> lifted;
  thread_local std::vector<double> rounded;
  thread_local std::vector<double> err;
  thread_local std::vector<std::size_t> order;
  lifted.assign(n1, 0.0);
  rounded.assign(n1, 0.0);
  err.assign(n1, 0.0);
  order.resize(n1);
  bool ambiguous = false;
  std::int64_t deficiency = 0;
  for (std::size_t i = 0; i < n1; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += h(static_cast<Eigen::Index>(i), j) * x[static_cast<std::size_t>(j)];
    lifted[i] = acc;
    rounded[i] = round_half_down(acc);
    err[i] = acc - rounded[i];
    if (0.5 - std::abs(err[i]) < kDecisionMargin) ambiguous = true;
    deficiency += static_cast<std::int64_t>(rounded[i]);
  }
  if (deficiency != 0) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [](std::size_t a, std::size_t b) { return err[a] < err[b]; });
    const auto count = static_cast<std::size_t>(std::llabs(deficiency));
    if (count < n1) {
      if (deficiency > 0) {
        // Lower the coordinates that were rounded up the most.
        if (err[order[count]] - err[order[count - 1]] < kDecisionMargin) ambiguous = true;
        for (std::size_t t = 0; t < count; ++t) rounded[order[t]] -= 1.0;
      } else {
        if (err[order[n1 - count]] - err[order[n1 - count - 1]] < kDecisionMargin) ambiguous = true;
        for (std::size_t t = 0; t < count; ++t) rounded[order[n1 - 1 - t]] += 1.0;
      }
    } else {
      ambiguous = true;
    }
  }
  // p = sum k_i (e_i - e_{i+1})  =>  k_i = p_1 + ... + p_i.
  std::int64_t running = 0;
  for (int i = 0; i < m; ++i) {
    running += static_cast<std::int64_t>(rounded[static_cast<std::size_t>(i)]);
    coords[static_cast<std::size_t>(i)] = running;
  }
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n1; ++i) acc += h(static_cast<Eigen::Index>(i), j) * rounded[i];
    out[static_cast<std::size_t>(j)] = acc;
  }
  return ambiguous;
}

// E8 = D8 u (D8 + 1/2): decode in both cosets, keep the nearer.
bool decode_e8(std::span<const double> x, std::span<double> out) {
  std::array<double, 8> shifted{};
  std::array<double, 8> p0{};
  std::array<double, 8> p1{};
  for (std::size_t i = 0; i < 8; ++i) shifted[i] = x[i] - 0.5;
  const bool amb0 = decode_d(x, p0);
  const bool amb1 = decode_d(shifted, p1);
  for (auto& v : p1) v += 0.5;
  const double d0 = squared_distance(x, p0);
  const double d1 = squared_distance(x, p1);
  const bool first = d0 <= d1;
  std::copy_n(first ? p0.begin() : p1.begin(), 8, out.begin());
  if (std::abs(d0 - d1) < 2.0 * kTieTolerance) return true;
  return first ? amb0 : amb1;
}

void require_decodable(const LatticeSpec& lattice) {
  if (!lattice.supports_decoding()) {
    throw Error(ErrorCode::kUnsupportedLattice, lattice.label() + " has no decoder");
  }
}

void require_dim(const LatticeSpec& lattice, std::size_t n) {
  if (n != static_cast<std::size_t>(lattice.dim())) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected length " + std::to_string(lattice.dim()) + ", got " + std::to_string(n));
  }
}

LatticePoint make_point(const LatticeSpec& lattice, std::span<const std::int64_t> coords) {
  LatticePoint p;
  p.coords.assign(coords.begin(), coords.end());
  p.embedding.resize(lattice.dim());
  embed(lattice, coords, {p.embedding.data(), static_cast<std::size_t>(lattice.dim())});
  return p;
}

}  // namespace

std::string LatticeSpec::label() const {
  switch (name_) {
    case LatticeName::kZn: return dim_ == 1 ? "Z" : "Z" + std::to_string(dim_);
    case LatticeName::kA1: return "A1";
    case LatticeName::kA2: return "A2";
    case LatticeName::kA3: return "A3";
    case LatticeName::kA4: return "A4";
    case LatticeName::kD4: return "D4";
    case LatticeName::kD5: return "D5";
    case LatticeName::kD6: return "D6";
    case LatticeName::kD7: return "D7";
    case LatticeName::kD8: return "D8";
    case LatticeName::kE6: return "E6";
    case LatticeName::kE7: return "E7";
    case LatticeName::kE8: return "E8";
    case LatticeName::kLeech: return "Leech";
  }
  return "?";
}

LatticeSpec make_lattice(LatticeName name, int dim) {
  LatticeSpec l;
  l.name_ = name;
  switch (name) {
    case LatticeName::kZn:
      if (dim < 1) throw Error(ErrorCode::kInvalidArgument, "Z^n needs n >= 1");
      l.dim_ = dim;
      l.basis_ = Eigen::MatrixXd::Identity(dim, dim);
      l.covering_radius_ = std::sqrt(static_cast<double>(dim)) / 2.0;
      l.moments_ = tab(dim, 12, dim, 180);
      break;
    case LatticeName::kA1:
    case LatticeName::kA2:
    case LatticeName::kA3:
    case LatticeName::kA4: {
      const int m = 1 + static_cast<int>(name) - static_cast<int>(LatticeName::kA1);
      l.dim_ = m;
      l.helmert_ = helmert_frame(m);
      l.basis_ = root_basis_a(m, l.helmert_);
      l.covering_radius_ = a_covering_radius(m);
      static constexpr std::array<std::array<std::int64_t, 4>, 4> kA = {{
          {1, 6, 1, 45}, {5, 36, 43, 3240}, {1, 8, 29, 2880}, {7, 60, 77, 9000}}};
      const auto& t = kA[static_cast<std::size_t>(m - 1)];
      l.moments_ = tab(t[0], t[1], t[2], t[3]);
      break;
    }
    case LatticeName::kD4:
    case LatticeName::kD5:
    case LatticeName::kD6:
    case LatticeName::kD7:
    case LatticeName::kD8: {
      const int m = 4 + static_cast<int>(name) - static_cast<int>(LatticeName::kD4);
      l.dim_ = m;
      l.basis_ = root_basis_d(m);
      l.covering_radius_ = std::sqrt(static_cast<double>(m)) / 2.0;
      static constexpr std::array<std::array<std::int64_t, 4>, 5> kD = {{{13, 120, 167, 25200},
                                                                         {1, 10, 11, 2016},
                                                                         {2, 21, 533, 105840},
                                                                         {31, 336, 79, 16128},
                                                                         {13, 144, 139, 28512}}};
      const auto& t = kD[static_cast<std::size_t>(m - 4)];
      l.moments_ = tab(t[0], t[1], t[2], t[3]);
      break;
    }
    case LatticeName::kE6:
      l.dim_ = 6;
      l.basis_ = basis_from_gram(cartan_from_edges(6, {{0, 2}, {2, 3}, {3, 4}, {4, 5}, {1, 3}}));
      l.covering_radius_ = std::sqrt(4.0 / 3.0);
      l.moments_ = tab(5, 56, 2497, 635040);
      break;
    case LatticeName::kE7:
      l.dim_ = 7;
      l.basis_ =
          basis_from_gram(cartan_from_edges(7, {{0, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {1, 3}}));
      l.covering_radius_ = std::sqrt(1.5);
      l.moments_ = tab(163, 2016, 1727, 580608);
      break;
    case LatticeName::kE8:
      l.dim_ = 8;
      l.basis_ = root_basis_e8();
      l.covering_radius_ = 1.0;
      l.moments_ = tab(929, 12960, 457579, 230947200);
      break;
    case LatticeName::kLeech:
      l.dim_ = 24;
      l.cell_volume_ = 1.0;
      l.covering_radius_ = std::sqrt(2.0);
      l.moments_ = TabulatedMoments{Rational{65771, 1000000}, std::nullopt, 0.000074};
      return l;
  }

  l.cell_volume_ = std::abs(l.basis_.determinant());
  l.basis_t_inverse_ = l.basis_.transpose().inverse();
  const Eigen::MatrixXd gram = l.basis_ * l.basis_.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  const Eigen::MatrixXd lower = llt.matrixL();
  l.gram_upper_ = lower.transpose();
  l.enum_map_ = lower.triangularView<Eigen::Lower>().solve(l.basis_);
  return l;
}

LatticeSpec parse_lattice(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (s == "LEECH" || s == "LAMBDA24" || s == "L24") return make_lattice(LatticeName::kLeech);
  if (s == "Z" || s == "ZN") return make_lattice(LatticeName::kZn, 1);
  if (s.size() >= 2 && s[0] == 'Z') {
    const std::string digits = s.substr(1);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      const int n = std::stoi(digits);
      if (n >= 1) return make_lattice(LatticeName::kZn, n);
    }
  }
  static const std::array<std::pair<const char*, LatticeName>, 12> kNames = {{
      {"A1", LatticeName::kA1}, {"A2", LatticeName::kA2}, {"A3", LatticeName::kA3},
      {"A4", LatticeName::kA4}, {"D4", LatticeName::kD4}, {"D5", LatticeName::kD5},
      {"D6", LatticeName::kD6}, {"D7", LatticeName::kD7}, {"D8", LatticeName::kD8},
      {"E6", LatticeName::kE6}, {"E7", LatticeName::kE7}, {"E8", LatticeName::kE8}}};
  for (const auto& [label, name] : kNames) {
    if (s == label) return make_lattice(name);
  }
  throw Error(ErrorCode::kUnknownLattice, "unknown lattice '" + std::string(text) + "'");
}

std::vector<LatticeSpec> table_lattices() {
  std::vector<LatticeSpec> out;
  for (int i = static_cast<int>(LatticeName::kA1); i <= static_cast<int>(LatticeName::kLeech); ++i) {
    out.push_back(make_lattice(static_cast<LatticeName>(i)));
  }
  return out;
}

namespace detail {

void quantize_into(const LatticeSpec& lattice, std::span<const double> x, std::span<double> out,
                   std::span<std::int64_t> coords) {
  bool ambiguous = false;
  switch (lattice.name()) {
    case LatticeName::kZn:
      for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = round_half_down(x[i]);
        coords[i] = static_cast<std::int64_t>(out[i]);
      }
      return;
    case LatticeName::kA1:
    case LatticeName::kA2:
    case LatticeName::kA3:
    case LatticeName::kA4:
      ambiguous = decode_a(lattice, x, out, coords);
      break;
    case LatticeName::kD4:
    case LatticeName::kD5:
    case LatticeName::kD6:
    case LatticeName::kD7:
    case LatticeName::kD8:
      ambiguous = decode_d(x, out);
      coords_from_embedding(lattice, out, coords);
      break;
    case LatticeName::kE8:
      ambiguous = decode_e8(x, out);
      coords_from_embedding(lattice, out, coords);
      break;
    case LatticeName::kE6:
    case LatticeName::kE7:
      if (!enumerate_closest(lattice, x, lattice.covering_radius() + 1e-7, coords)) {
        throw Error(ErrorCode::kNumericalFailure, "no point within the covering radius");
      }
      embed(lattice, coords, out);
      return;
    case LatticeName::kLeech:
      throw Error(ErrorCode::kUnsupportedLattice, "Leech has no decoder");
  }
  if (ambiguous) {
    const double radius = std::sqrt(squared_distance(x, out)) + 1e-7;
    if (!enumerate_closest(lattice, x, radius, coords)) {
      throw Error(ErrorCode::kNumericalFailure, "tie resolution found no point");
    }
    embed(lattice, coords, out);
  }
}

void sample_voronoi_into(const LatticeSpec& lattice, Rng& rng, std::span<double> out) {
  const int m = lattice.dim();
  const auto mm = static_cast<std::size_t>(m);
  if (lattice.name() == LatticeName::kZn) {
    for (std::size_t i = 0; i < mm; ++i) {
      const double u = rng.uniform();
      out[i] = u - round_half_down(u);
    }
    return;
  }
  thread_local std::vector<double> u;
  thread_local std::vector<double> w;
  thread_local std::vector<double> q;
  thread_local std::vector<std::int64_t> coords;
  u.resize(mm);
  w.resize(mm);
  q.resize(mm);
  coords.resize(mm);
  for (auto& v : u) v = rng.uniform();
  const auto& b = lattice.basis();
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += u[static_cast<std::size_t>(i)] * b(i, j);
    w[static_cast<std::size_t>(j)] = acc;
  }
  quantize_into(lattice, w, q, coords);
  for (std::size_t i = 0; i < mm; ++i) out[i] = w[i] - q[i];
}

}  // namespace detail

LatticePoint quantize(const LatticeSpec& lattice, const Eigen::VectorXd& x) {
  require_decodable(lattice);
  require_dim(lattice, static_cast<std::size_t>(x.size()));
  if (!x.allFinite()) throw Error(ErrorCode::kDomainError, "non-finite input");
  const auto m = static_cast<std::size_t>(lattice.dim());
  LatticePoint p;
  p.coords.resize(m);
  p.embedding.resize(lattice.dim());
  detail::quantize_into(lattice, {x.data(), m}, {p.embedding.data(), m}, p.coords);
  return p;
}

LatticePoint quantize_bruteforce(const LatticeSpec& lattice, const Eigen::VectorXd& x,
                                 double radius) {
  require_decodable(lattice);
  require_dim(lattice, static_cast<std::size_t>(x.size()));
  if (!(radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "radius must be positive");
  const auto m = static_cast<std::size_t>(lattice.dim());
  std::vector<std::int64_t> coords(m);
  if (!enumerate_closest(lattice, {x.data(), m}, radius, coords)) {
    throw Error(ErrorCode::kEmptyEnumeration, "no lattice point within radius " + std::to_string(radius));
  }
  return make_point(lattice, coords);
}

Eigen::VectorXd sample_voronoi(const LatticeSpec& lattice, Rng& rng) {
  require_decodable(lattice);
  Eigen::VectorXd v(lattice.dim());
  detail::sample_voronoi_into(lattice, rng, {v.data(), static_cast<std::size_t>(lattice.dim())});
  return v;
}

VoronoiMoments moments_analytic(const LatticeSpec& lattice) {
  const auto& t = lattice.analytic_moments();
  if (!t) throw Error(ErrorCode::kUnknownLattice, lattice.label() + " has no tabulated moments");
  VoronoiMoments v;
  v.mean = t->mean.value();
  if (t->variance) v.variance = t->variance->value();
  v.mean_uncertainty = t->mean_uncertainty;
  return v;
}

double moment_divisor(const LatticeSpec& lattice) {
  return lattice.name() == LatticeName::kZn ? 1.0 : static_cast<double>(lattice.dim());
}

double second_moment_per_dim(const LatticeSpec& lattice) {
  const auto& t = lattice.analytic_moments();
  if (!t) throw Error(ErrorCode::kUnknownLattice, lattice.label() + " has no tabulated moments");
  return t->mean.value() * moment_divisor(lattice) / static_cast<double>(lattice.dim());
}

MonteCarloMoments moments_montecarlo(const LatticeSpec& lattice, std::size_t samples, Rng& rng) {
  require_decodable(lattice);
  if (samples < 1000) throw Error(ErrorCode::kInsufficientSamples, "need at least 1000 samples");
  const double divisor = moment_divisor(lattice);
  std::vector<double> sq(samples);
  Eigen::VectorXd v(lattice.dim());
  for (auto& value : sq) {
    detail::sample_voronoi_into(lattice, rng, {v.data(), static_cast<std::size_t>(lattice.dim())});
    value = v.squaredNorm();
  }

  const double n = static_cast<double>(samples);
  const double mean = std::accumulate(sq.begin(), sq.end(), 0.0) / n;
  // Work with centred values; leave-one-out statistics follow from the sums.
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : sq) {
    const double c = v - mean;
    s1 += c;
    s2 += c * c;
  }
  const double variance = (s2 - s1 * s1 / n) / (n - 1.0);

  auto leave_one_out = [&](double v) {
    const double c = v - mean;
    const double m1 = (s1 - c) / (n - 1.0);
    return ((s2 - c * c) - (n - 1.0) * m1 * m1) / (n - 2.0);
  };
  double jk_mean = 0.0;
  for (double v : sq) jk_mean += leave_one_out(v);
  jk_mean /= n;
  double jk_ss = 0.0;
  for (double v : sq) {
    const double d = leave_one_out(v) - jk_mean;
    jk_ss += d * d;
  }

  // Both moments scale linearly with the divisor in the tabulated convention.
  MonteCarloMoments out;
  out.mean = mean / divisor;
  out.variance = variance / divisor;
  out.se_mean = std::sqrt(variance / n) / divisor;
  out.se_variance = std::sqrt((n - 1.0) / n * jk_ss) / divisor;
  return out;
}

std::string basis_csv(const LatticeSpec& lattice) {
  require_decodable(lattice);
  std::string out;
  char buf[40];
  const auto& b = lattice.basis();
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", b(i, j));
      if (j > 0) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace rdq
