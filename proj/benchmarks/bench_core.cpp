// Copyright 2026 The featscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Hot paths: sparse encoding, click scoring, rank tests and the bootstrap.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <string>
#include <vector>

#include "featscope/bootstrap.hpp"
#include "featscope/heatmap.hpp"
#include "featscope/matrix.hpp"
#include "featscope/rng.hpp"
#include "featscope/sae.hpp"
#include "featscope/scoring.hpp"
#include "featscope/stats.hpp"

namespace {

using namespace featscope;

ActivationMatrix gaussian_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  ActivationMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (double& v : m.row(r)) v = rng.normal();
  }
  return m;
}

void BM_SaeEncode(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto data = gaussian_rows(64, d, 1);
  const SaeModel model = init_sae(data, 8 * d, 32, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sae_encode(model, data.row(i++ % data.rows())));
  }
}
BENCHMARK(BM_SaeEncode)->Arg(64)->Arg(256);

void BM_Localizability(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> v(side * side);
  for (double& x : v) x = rng.uniform();
  const Heatmap h(side, side, std::move(v));
  for (auto _ : state) {
    benchmark::DoNotOptimize(localizability_score(h, Click{rng.uniform(), rng.uniform()}));
  }
}
BENCHMARK(BM_Localizability)->Arg(14)->Arg(224);

void BM_KruskalWallis(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  ScoreGroups groups;
  for (int g = 0; g < 4; ++g) {
    ScoreGroup sg{"m" + std::to_string(g), {}};
    for (std::size_t i = 0; i < n; ++i) sg.scores.push_back(rng.uniform() + 0.1 * g);
    groups.push_back(std::move(sg));
  }
  for (auto _ : state) benchmark::DoNotOptimize(kruskal_wallis(groups));
}
BENCHMARK(BM_KruskalWallis)->Arg(100)->Arg(1000);

void BM_BootstrapBreadth(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> units(400);
  for (double& u : units) u = rng.uniform();
  const auto threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_breadth(units, 80, 1000, 7, threads));
}
BENCHMARK(BM_BootstrapBreadth)->Arg(1)->Arg(4)->UseRealTime();

}  // namespace

// The packaged benchmark_main archive carries LTO bytecode tied to one gcc
// release, so the entry point lives here.
BENCHMARK_MAIN();
