// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "loadlm/baselines.hpp"
#include "loadlm/dataset.hpp"

namespace loadlm {
namespace {

std::vector<ForecastInstance> HourlyWindows(std::size_t days) {
  SyntheticSpec spec;
  spec.resolution = Resolution::kHourly;
  spec.length = 24 * days;
  spec.mean = 1184.82;
  spec.std = 192.26;
  return MakeInstances(SynthesizeSeries(3, spec), WindowSpec{24, 24, 24, 1});
}

void BM_MovingAverage(benchmark::State& state) {
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 17);
  for (auto _ : state) benchmark::DoNotOptimize(MovingAverage(x, 25));
}
BENCHMARK(BM_MovingAverage)->Arg(24)->Arg(336);

void BM_DLinearPredict(benchmark::State& state) {
  const auto windows = HourlyWindows(60);
  DLinearConfig cfg;
  cfg.max_epochs = 1;
  const auto model = FitDLinear(windows, {}, cfg).model;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.Predict(windows[i++ % windows.size()].x));
}
BENCHMARK(BM_DLinearPredict);

void BM_DLinearEpoch(benchmark::State& state) {
  const auto windows = HourlyWindows(static_cast<std::size_t>(state.range(0)));
  DLinearConfig cfg;
  cfg.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(FitDLinear(windows, {}, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(windows.size()));
}
BENCHMARK(BM_DLinearEpoch)->Arg(90)->Arg(365)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace loadlm
