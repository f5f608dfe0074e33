#include <benchmark/benchmark.h>

#include "overlap/engine.hpp"
#include "overlap/oracle.hpp"
#include "overlap/sim.hpp"

using namespace overlap;

namespace {

ProblemSpec problem(Pattern pat, int m, int tp) {
    return ProblemSpec{m, pat == Pattern::AllGatherGemm ? 8 * tp : 32, 8 * tp, tp, pat};
}

void BM_DenseOracle(benchmark::State& state) {
    const ProblemSpec p = problem(Pattern::GemmReduceScatter, 8 * state.range(0), 4);
    ShardedWorkspace ws = ShardedWorkspace::make_random(p, 42);
    for (auto _ : state) benchmark::DoNotOptimize(dense_oracle(p, ws));
}
BENCHMARK(BM_DenseOracle)->Arg(4)->Arg(8);

void BM_Nonoverlap(benchmark::State& state) {
    const ProblemSpec p = problem(Pattern::GemmReduceScatter, 8 * state.range(0), 4);
    ShardedWorkspace ws = ShardedWorkspace::make_random(p, 42);
    for (auto _ : state) benchmark::DoNotOptimize(run_nonoverlap(p, ws, {4, 4}));
}
BENCHMARK(BM_Nonoverlap)->Arg(4)->Arg(8);

void BM_FusedReduceScatter(benchmark::State& state) {
    const ProblemSpec p = problem(Pattern::GemmReduceScatter, 8 * state.range(0), 4);
    ShardedWorkspace ws = ShardedWorkspace::make_random(p, 42);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            run_fused_gemm_reducescatter(p, ws, {4, 4}, WriteMode::FusedReduce, true));
}
BENCHMARK(BM_FusedReduceScatter)->Arg(4)->Arg(8);

void BM_FusedAllGather(benchmark::State& state) {
    const ProblemSpec p = problem(Pattern::AllGatherGemm, 8 * state.range(0), 4);
    ShardedWorkspace ws = ShardedWorkspace::make_random(p, 42);
    const auto comm = make_comm_specs(p, Topology{}, p.rows_per_rank(), TransferMode::Pull);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            run_fused_allgather_gemm(p, ws, {4, 4}, comm, TransferMode::Pull, true));
}
BENCHMARK(BM_FusedAllGather)->Arg(4)->Arg(8);

void BM_SimulateFine(benchmark::State& state) {
    const ProblemSpec p{4096, 2048, 2048, 4, Pattern::AllGatherGemm};
    MachineModel mach;
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate(Strategy::Fine, p, {64, 64}, mach,
                                          SwizzleKind::ArrivalAligned, 256,
                                          TransferMode::Pull));
}
BENCHMARK(BM_SimulateFine);

}  // namespace

BENCHMARK_MAIN();
