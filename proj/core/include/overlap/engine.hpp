#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "overlap/oracle.hpp"
#include "overlap/signal_board.hpp"
#include "overlap/swizzle.hpp"
#include "overlap/topology.hpp"
#include "overlap/workspace.hpp"

namespace overlap {

enum class TransferMode { Pull, Push };
enum class WriteMode { WriteAlltoAll, FusedReduce };

std::string to_string(TransferMode m);
TransferMode transfer_mode_from_string(const std::string& s);
std::string to_string(WriteMode m);
WriteMode write_mode_from_string(const std::string& s);

// Communication tiling for the AllGather host loop, decoupled from GEMM tiling.
struct CommTileSpec {
    int rows_per_comm_tile = 0;
    std::vector<TransferDesc> order;  // covers all non-local comm tiles exactly once

    void validate(const ProblemSpec& problem, int rank, TransferMode mode) const;
};

// Builds one CommTileSpec per rank from the topology.
std::vector<CommTileSpec> make_comm_specs(const ProblemSpec& problem, const Topology& topology,
                                          int rows_per_comm_tile, TransferMode mode);

struct CausalityEvent {
    std::string kind;  // compute_start, tile_write, reduce_contrib, signal_set, transfer, wait
    int rank = -1;
    int tile_row = -1;
    int tile_col = -1;
    int target = -1;  // peer/destination rank where applicable
    uint64_t logical_ts = 0;
    int64_t wall_ns = 0;
};

class CausalityLog {
public:
    void append(CausalityEvent ev) {
        std::lock_guard<std::mutex> g(mu_);
        events_.push_back(std::move(ev));
    }
    std::vector<CausalityEvent> snapshot() const {
        std::lock_guard<std::mutex> g(mu_);
        return events_;
    }

private:
    mutable std::mutex mu_;
    std::vector<CausalityEvent> events_;
};

void write_jsonl(const std::string& path, const std::vector<CausalityEvent>& events);

struct EngineOptions {
    int workers_per_rank = 0;            // 0 = auto (bounded by host parallelism / tp)
    bool deterministic_reduce = true;    // rank-order accumulation vs arrival order
    long long poll_budget = 10'000'000;  // polls before declaring deadlock
    double wall_budget_s = 10.0;         // wall-clock bound on any single wait
    uint64_t interleave_seed = 0;        // nonzero: inject random yields/sleeps
    int shift_offset = 1;                // RankShifted tunable
};

struct EngineResult {
    std::vector<Matrix> outputs;  // per-rank c_out copies
    std::vector<CausalityEvent> log;
};

struct TransferRecord {
    TransferDesc desc;
    int64_t copy_done_ns = 0;
    int64_t flag_set_ns = 0;
    uint64_t copy_logical_ts = 0;
    uint64_t flag_logical_ts = 0;
};

// Shared run-scoped clocks handed to host_transfer_loop when driven standalone.
struct RunClock {
    RunClock();
    RunClock(const RunClock&) = delete;
    RunClock& operator=(const RunClock&) = delete;

    std::atomic<uint64_t> logical{1};
    int64_t epoch_ns = 0;  // steady_clock origin
    int64_t now_ns() const;
    uint64_t tick() { return logical.fetch_add(1, std::memory_order_acq_rel); }
};

// Fused GEMM with the scatter/write epilogue: each tile's accumulator is
// written (or reduced) into the owning rank's buffer selected by tile row.
EngineResult run_fused_gemm_reducescatter(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                          const TileShape& tile, WriteMode write_mode,
                                          bool swizzle_on, const EngineOptions& opts = {});

// Fused GEMM with the signal-wait prologue: host transfer agents fill a_agg
// concurrently; each compute tile blocks until its row range has arrived.
EngineResult run_fused_allgather_gemm(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                      const TileShape& tile, const std::vector<CommTileSpec>& comm,
                                      TransferMode transfer, bool swizzle_on,
                                      const EngineOptions& opts = {},
                                      std::vector<std::vector<TransferRecord>>* traces = nullptr);

// One rank's host-side transfer agent; copies each descriptor's row range and
// then sets the corresponding flag (local board under Pull, the destination's
// under Push).
std::vector<TransferRecord> host_transfer_loop(int rank, const ProblemSpec& problem,
                                               ShardedWorkspace& workspace,
                                               const CommTileSpec& comm, TransferMode transfer,
                                               std::vector<SignalBoard>& boards, RunClock& clock,
                                               const EngineOptions& opts = {},
                                               CausalityLog* log = nullptr);

// Serial reference: collective-then-GEMM or GEMM-then-collective, deterministic
// order, matches dense_oracle bitwise.
std::vector<Matrix> run_nonoverlap(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                   const TileShape& tile);

// Prior-art chunked schedule (shared by the engine and the simulator).
struct MediumStep {
    enum class Kind { ChunkGemm, ChunkTransfer, ChunkAdd };
    int rank = 0;
    Kind kind = Kind::ChunkGemm;
    int chunk = 0;
    std::vector<int> deps;  // indices into the schedule, topologically ordered
};

std::vector<MediumStep> medium_schedule(const ProblemSpec& problem, int partitions);

struct MediumResult {
    std::vector<Matrix> outputs;
    std::vector<MediumStep> trace;
};

MediumResult run_medium_grained(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                const TileShape& tile, int partitions);

}  // namespace overlap
