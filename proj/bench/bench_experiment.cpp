// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP evaluation of the default experiment grid.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "invlab/experiment.hpp"

namespace {

invlab::ExperimentConfig bench_config(int instances) {
    invlab::KeyValues kv = invlab::ExperimentConfig{}.to_keys();
    kv.set("dataset.instances", std::to_string(instances));
    return invlab::ExperimentConfig::from_keys(kv);
}

void run(benchmark::State& state, invlab::Execution execution) {
    const auto cfg = bench_config(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto r = invlab::run_experiment(cfg, execution);
        benchmark::DoNotOptimize(r.rows.data());
    }
    state.counters["threads"] = execution == invlab::Execution::Parallel ? omp_get_max_threads() : 1;
    state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(cfg.methods.size()));
}

void BM_Serial(benchmark::State& state) { run(state, invlab::Execution::Serial); }
void BM_Parallel(benchmark::State& state) { run(state, invlab::Execution::Parallel); }

BENCHMARK(BM_Serial)->Arg(16)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Parallel)->Arg(16)->Arg(100)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
