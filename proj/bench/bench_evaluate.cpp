// Copyright 2026 The AEC Authors
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


// Serial reference versus the OpenMP evaluation kernel on a trained memory.

#include <benchmark/benchmark.h>

#include "aec/harness.hpp"

namespace {

const aec::EpisodicMemory& trained_memory(aec::RunConfig& cfg) {
    static const aec::EpisodicMemory memory = [&] {
        aec::RunConfig c = cfg;
        c.seeds = {0};
        c.frames = 10'000;
        c.write_traces = false;
        return *aec::run_training(c).seeds[0].memory;
    }();
    return memory;
}

aec::RunConfig bench_config() {
    aec::RunConfig c;
    c.out = "bench_out";
    return c;
}

void BM_EvaluateSerial(benchmark::State& state) {
    aec::RunConfig cfg = bench_config();
    const auto& memory = trained_memory(cfg);
    for (auto _ : state)
        benchmark::DoNotOptimize(aec::evaluate_serial(memory, cfg, aec::Split::no_change, static_cast<int>(state.range(0))));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateOpenMP(benchmark::State& state) {
    aec::RunConfig cfg = bench_config();
    const auto& memory = trained_memory(cfg);
    for (auto _ : state)
        benchmark::DoNotOptimize(aec::evaluate(memory, cfg, aec::Split::no_change, static_cast<int>(state.range(0))));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Arg(100)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluateOpenMP)->Arg(100)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
