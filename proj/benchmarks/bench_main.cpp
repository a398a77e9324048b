#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "ps/backend.hpp"
#include "ps/features.hpp"
#include "ps/metrics.hpp"

namespace {

ps::Waveform make_tone(std::size_t n) {
  ps::Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = 0.3 * std::sin(2.0 * M_PI * 220.0 * i / 16000.0);
  return w;
}

void BM_Lfcc(benchmark::State& state) {
  const auto w = make_tone(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ps::lfcc(w));
}
BENCHMARK(BM_Lfcc)->Arg(16000)->Arg(48000);

void BM_Forward(benchmark::State& state) {
  ps::BackendConfig cfg;
  cfg.dim = 20;
  cfg.n_blocks = static_cast<int>(state.range(0));
  auto params = ps::BackendParams::init(cfg, 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss;
  ps::Matrix feats(100, cfg.dim);
  for (auto& v : feats.d) v = gauss(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ps::forward(feats, params));
}
BENCHMARK(BM_Forward)->Arg(2)->Arg(5);

void BM_Eer(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  std::vector<double> bona(state.range(0)), spoof(state.range(0));
  for (auto& v : bona) v = gauss(rng) + 1.0;
  for (auto& v : spoof) v = gauss(rng) - 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(ps::eer(bona, spoof));
}
BENCHMARK(BM_Eer)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
