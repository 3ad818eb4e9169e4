#include <benchmark/benchmark.h>

#include "rdq/analysis.hpp"
#include "rdq/channel.hpp"
#include "rdq/lattice.hpp"
#include "rdq/rotation.hpp"

namespace {

using namespace rdq;

void BM_Quantize(benchmark::State& state) {
  const auto l = table_lattices()[static_cast<std::size_t>(state.range(0))];
  Rng rng(1);
  Eigen::VectorXd x(l.dim());
  for (int i = 0; i < l.dim(); ++i) x[i] = 4.0 * rng.uniform() - 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(quantize(l, x));
  state.SetLabel(l.label());
}
BENCHMARK(BM_Quantize)->DenseRange(0, 11);

void BM_SampleHaar(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_haar(n, seed++));
}
BENCHMARK(BM_SampleHaar)->Arg(16)->Arg(64)->Arg(240);

void BM_ApplyRotation(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto r = sample_haar(n, 3);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  for (auto _ : state) {
    r.apply_inplace(x);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ApplyRotation)->Arg(16)->Arg(64)->Arg(240);

void BM_Transmit(benchmark::State& state) {
  ChannelConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  cfg.noise = solve_weibull_integer(1.0);
  const Channel ch(cfg);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.n);
  std::uint64_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ch.transmit(x, t++));
}
BENCHMARK(BM_Transmit)->Arg(64)->Arg(240);

void BM_KlExact(benchmark::State& state) {
  const auto p = solve_weibull_integer(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(kl_exact(p, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_KlExact)->Arg(10)->Arg(80)->Arg(320)->Unit(benchmark::kMillisecond);

}  // namespace
