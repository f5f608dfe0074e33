#include <string>
#include <vector>

#include "doctest.h"
#include "overlap/engine.hpp"
#include "overlap/oracle.hpp"

using namespace overlap;

#ifndef OVERLAP_GOLDEN_DIR
#error "OVERLAP_GOLDEN_DIR must point at the committed reference outputs"
#endif

namespace {

const ProblemSpec kAg{16, 16, 16, 4, Pattern::AllGatherGemm};
const ProblemSpec kRs{16, 16, 16, 4, Pattern::GemmReduceScatter};

std::vector<Matrix> load_golden(Pattern pat) {
    const std::string stem =
        pat == Pattern::AllGatherGemm ? "allgather" : "reducescatter";
    std::vector<Matrix> out;
    for (int r = 0; r < 4; ++r)
        out.push_back(read_csv(std::string(OVERLAP_GOLDEN_DIR) + "/" + stem + "_rank" +
                               std::to_string(r) + ".csv"));
    return out;
}

void check_bitwise(const std::vector<Matrix>& got, const std::vector<Matrix>& want) {
    REQUIRE(got.size() == want.size());
    for (size_t r = 0; r < got.size(); ++r) {
        INFO("rank ", r);
        CHECK(bitwise_equal(got[r], want[r]));
    }
}

}  // namespace

TEST_CASE("dense oracle reproduces the frozen reference outputs bitwise") {
    for (const ProblemSpec& p : {kAg, kRs}) {
        ShardedWorkspace ws = ShardedWorkspace::make_random(p, 42);
        check_bitwise(dense_oracle(p, ws), load_golden(p.pattern));
    }
}

TEST_CASE("serial baseline matches the reference outputs bitwise") {
    for (const ProblemSpec& p : {kAg, kRs}) {
        ShardedWorkspace ws = ShardedWorkspace::make_random(p, 42);
        check_bitwise(run_nonoverlap(p, ws, {2, 2}), load_golden(p.pattern));
    }
}

TEST_CASE("fused reduce-scatter matches the reference outputs bitwise") {
    ShardedWorkspace ws = ShardedWorkspace::make_random(kRs, 42);
    EngineResult res =
        run_fused_gemm_reducescatter(kRs, ws, {2, 2}, WriteMode::FusedReduce, true);
    check_bitwise(res.outputs, load_golden(Pattern::GemmReduceScatter));
}

TEST_CASE("fused all-gather matches the reference outputs bitwise") {
    ShardedWorkspace ws = ShardedWorkspace::make_random(kAg, 42);
    auto comm = make_comm_specs(kAg, Topology{}, kAg.rows_per_rank(), TransferMode::Pull);
    EngineResult res =
        run_fused_allgather_gemm(kAg, ws, {2, 2}, comm, TransferMode::Pull, true);
    check_bitwise(res.outputs, load_golden(Pattern::AllGatherGemm));
}

TEST_CASE("medium-grained schedule matches the reference outputs bitwise") {
    ShardedWorkspace ws = ShardedWorkspace::make_random(kRs, 42);
    check_bitwise(run_medium_grained(kRs, ws, {2, 2}, 8).outputs,
                  load_golden(Pattern::GemmReduceScatter));
}
