#include "overlap/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <thread>

namespace overlap {

std::string to_string(TransferMode m) { return m == TransferMode::Pull ? "Pull" : "Push"; }
TransferMode transfer_mode_from_string(const std::string& s) {
    if (s == "Pull") return TransferMode::Pull;
    if (s == "Push") return TransferMode::Push;
    throw ConfigError("unknown transfer mode: '" + s + "'");
}
std::string to_string(WriteMode m) {
    return m == WriteMode::WriteAlltoAll ? "WriteAlltoAll" : "FusedReduce";
}
WriteMode write_mode_from_string(const std::string& s) {
    if (s == "WriteAlltoAll") return WriteMode::WriteAlltoAll;
    if (s == "FusedReduce") return WriteMode::FusedReduce;
    throw ConfigError("unknown write mode: '" + s + "'");
}

RunClock::RunClock() {
    epoch_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
                   .count();
}

int64_t RunClock::now_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
               .count() -
           epoch_ns;
}

void CommTileSpec::validate(const ProblemSpec& problem, int rank, TransferMode mode) const {
    const int rpr = problem.rows_per_rank();
    if (rows_per_comm_tile <= 0 || rpr % rows_per_comm_tile != 0)
        throw ConfigError("rows_per_comm_tile=" + std::to_string(rows_per_comm_tile) +
                          " must divide m/tp=" + std::to_string(rpr));
    // Every non-local (pull) or local (push) comm tile must appear exactly once.
    const int ct = rpr / rows_per_comm_tile;
    std::vector<int> seen(problem.m / rows_per_comm_tile, 0);
    for (const TransferDesc& d : order) {
        if (d.rows != rows_per_comm_tile || d.row_begin % rows_per_comm_tile != 0 ||
            d.row_begin < 0 || d.row_begin + d.rows > problem.m)
            throw BoundsError("transfer descriptor rows [" + std::to_string(d.row_begin) + ",+" +
                              std::to_string(d.rows) + ") invalid");
        ++seen[d.row_begin / rows_per_comm_tile];
    }
    if (mode == TransferMode::Pull) {
        for (int t = 0; t < static_cast<int>(seen.size()); ++t) {
            const bool local = t / ct == rank;
            if (!local && seen[t] != 1)
                throw ConfigError("comm order must cover non-local comm tile " + std::to_string(t) +
                                  " exactly once (saw " + std::to_string(seen[t]) + ")");
            if (local && seen[t] != 0)
                throw ConfigError("comm order must not include local comm tiles");
        }
    } else {
        // Push: descriptors carry the local shard to each peer.
        for (int t = 0; t < static_cast<int>(seen.size()); ++t) {
            const bool local = t / ct == rank;
            if (local && seen[t] != problem.tp - 1)
                throw ConfigError("push order must carry local comm tile " + std::to_string(t) +
                                  " to every peer");
            if (!local && seen[t] != 0)
                throw ConfigError("push order may only move local comm tiles");
        }
    }
}

std::vector<CommTileSpec> make_comm_specs(const ProblemSpec& problem, const Topology& topology,
                                          int rows_per_comm_tile, TransferMode mode) {
    problem.validate();
    const int rpr = problem.rows_per_rank();
    std::vector<CommTileSpec> specs(problem.tp);
    for (int r = 0; r < problem.tp; ++r) {
        specs[r].rows_per_comm_tile = rows_per_comm_tile;
        if (mode == TransferMode::Pull) {
            specs[r].order = comm_order(topology, r, problem.tp, rpr, rows_per_comm_tile);
        } else {
            // Push reuses the topology's peer sequence; forwarding is a
            // pull-side concept, pushes are direct.
            std::vector<TransferDesc> pull = comm_order(topology, r, problem.tp, rpr,
                                                        rows_per_comm_tile);
            for (int peer : peer_order(pull, r, rpr))
                for (int off = 0; off < rpr; off += rows_per_comm_tile)
                    specs[r].order.push_back({peer, r * rpr + off, rows_per_comm_tile,
                                              LinkClass::IntraNuma, -1, -1});
        }
        specs[r].validate(problem, r, mode);
    }
    return specs;
}

void write_jsonl(const std::string& path, const std::vector<CausalityEvent>& events) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const CausalityEvent& e : events) {
        out << "{\"event\":\"" << e.kind << "\",\"rank\":" << e.rank << ",\"tile_row\":" << e.tile_row
            << ",\"tile_col\":" << e.tile_col << ",\"target\":" << e.target
            << ",\"logical_ts\":" << e.logical_ts << ",\"wall_ns\":" << e.wall_ns << "}\n";
    }
}

namespace {

// Internal signal used to unwind sibling threads after a real failure.
struct Aborted {};

struct Jitter {
    Rng rng;
    bool on;
    explicit Jitter(uint64_t seed) : rng(seed), on(seed != 0) {}
    void maybe() {
        if (!on) return;
        uint64_t r = rng.next_below(16);
        if (r == 0)
            std::this_thread::sleep_for(std::chrono::microseconds(rng.next_below(50)));
        else if (r < 4)
            std::this_thread::yield();
    }
};

struct SharedRun {
    RunClock clock;
    CausalityLog log;
    std::atomic<bool> abort{false};
    std::mutex err_mu;
    std::exception_ptr first_error;

    void fail(std::exception_ptr e) {
        {
            std::lock_guard<std::mutex> g(err_mu);
            if (!first_error) first_error = e;
        }
        abort.store(true, std::memory_order_release);
    }
    void rethrow_if_failed() {
        if (first_error) std::rethrow_exception(first_error);
    }
};

void spin_wait(const std::function<bool()>& pred, const EngineOptions& opts, SharedRun& run,
               Jitter& jitter, const std::string& what) {
    long long polls = 0;
    const int64_t t0 = run.clock.now_ns();
    while (!pred()) {
        if (run.abort.load(std::memory_order_acquire)) throw Aborted{};
        ++polls;
        jitter.maybe();
        if ((polls & 63) == 0) std::this_thread::yield();
        if (polls > opts.poll_budget ||
            run.clock.now_ns() - t0 > static_cast<int64_t>(opts.wall_budget_s * 1e9))
            throw DeadlockError("deadlock budget exhausted waiting for " + what);
    }
}

int auto_workers(const EngineOptions& opts, int tp) {
    if (opts.workers_per_rank > 0) return opts.workers_per_rank;
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, std::min(4, hw / std::max(1, tp)));
}

// Runs one job per (rank, worker) plus optional per-rank agents; captures the
// first exception and aborts siblings.
void run_threads(SharedRun& run, int tp, int workers,
                 const std::function<void(int rank, int worker)>& worker_fn,
                 const std::function<void(int rank)>& agent_fn = nullptr) {
    std::vector<std::thread> threads;
    auto guard = [&run](auto&& fn) {
        try {
            fn();
        } catch (const Aborted&) {
        } catch (...) {
            run.fail(std::current_exception());
        }
    };
    for (int r = 0; r < tp; ++r) {
        if (agent_fn) threads.emplace_back([&, r] { guard([&] { agent_fn(r); }); });
        for (int w = 0; w < workers; ++w)
            threads.emplace_back([&, r, w] { guard([&] { worker_fn(r, w); }); });
    }
    for (std::thread& t : threads) t.join();
    run.rethrow_if_failed();
}

// Accumulator for one output tile: rows [row0, row0+tm) of the per-rank GEMM,
// k summed in ascending order (matches the oracle's reduction order).
void compute_tile(const Matrix& a, const Matrix& b, int row0, int col0, int tm, int tn,
                  std::vector<double>& acc) {
    const int kk = a.cols();
    acc.assign(static_cast<size_t>(tm) * tn, 0.0);
    for (int i = 0; i < tm; ++i) {
        const double* arow = a.row_ptr(row0 + i);
        for (int x = 0; x < kk; ++x) {
            const double av = arow[x];
            const double* brow = b.row_ptr(x);
            double* out = acc.data() + static_cast<size_t>(i) * tn;
            for (int j = 0; j < tn; ++j) out[j] += av * brow[col0 + j];
        }
    }
}

SwizzlePolicy rs_policy(bool swizzle_on, int rank, int tp, const EngineOptions& opts) {
    SwizzlePolicy p;
    p.kind = swizzle_on ? SwizzleKind::RankShifted : SwizzleKind::Naive;
    p.rank = rank;
    p.tp = tp;
    p.shift_offset = opts.shift_offset;
    return p;
}

}  // namespace

EngineResult run_fused_gemm_reducescatter(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                          const TileShape& tile, WriteMode write_mode,
                                          bool swizzle_on, const EngineOptions& opts) {
    if (problem.pattern != Pattern::GemmReduceScatter)
        throw ConfigError("run_fused_gemm_reducescatter requires GemmReduceScatter pattern");
    const GridDims grid = grid_for(problem, tile);
    workspace.validate(problem);
    workspace.clear_outputs();

    const int tp = problem.tp;
    const int rpr = problem.rows_per_rank();
    const int tiles_per_block = grid.tile_rows_per_block() * grid.tile_cols;

    if (write_mode == WriteMode::WriteAlltoAll)
        for (int r = 0; r < tp; ++r)
            workspace.rank(r).staging.assign(tp, Matrix(rpr, problem.n));

    SharedRun run;
    // Per destination tile: next contributing rank (deterministic) or a spin
    // lock (arrival order).
    std::vector<std::unique_ptr<std::atomic<int>[]>> gates(tp);
    std::vector<std::unique_ptr<std::atomic<uint32_t>[]>> locks(tp);
    // WriteAlltoAll gate: tiles received per (destination, source).
    std::vector<std::unique_ptr<std::atomic<int>[]>> recv_counts(tp);
    for (int r = 0; r < tp; ++r) {
        gates[r] = std::make_unique<std::atomic<int>[]>(tiles_per_block);
        locks[r] = std::make_unique<std::atomic<uint32_t>[]>(tiles_per_block);
        recv_counts[r] = std::make_unique<std::atomic<int>[]>(tp);
        for (int i = 0; i < tiles_per_block; ++i) {
            gates[r][i].store(0, std::memory_order_relaxed);
            locks[r][i].store(0, std::memory_order_relaxed);
        }
        for (int i = 0; i < tp; ++i) recv_counts[r][i].store(0, std::memory_order_relaxed);
    }

    std::vector<std::vector<TileCoord>> orders(tp);
    std::vector<std::unique_ptr<std::atomic<int>>> next_tile(tp);
    for (int r = 0; r < tp; ++r) {
        orders[r] = tile_order(rs_policy(swizzle_on, r, tp, opts), grid);
        next_tile[r] = std::make_unique<std::atomic<int>>(0);
    }

    const int workers = auto_workers(opts, tp);

    auto worker_fn = [&](int rank, int worker) {
        Jitter jitter(opts.interleave_seed ? opts.interleave_seed * 0x9e37ull + rank * 131 + worker
                                           : 0);
        RankBuffers& self = workspace.rank(rank);
        std::vector<double> acc;
        for (;;) {
            const int idx = next_tile[rank]->fetch_add(1, std::memory_order_relaxed);
            if (idx >= grid.tiles()) break;
            if (run.abort.load(std::memory_order_acquire)) throw Aborted{};
            jitter.maybe();
            const TileCoord tc = orders[rank][idx];
            const int row0 = tc.row * tile.tm;
            const int col0 = tc.col * tile.tn;
            compute_tile(self.a_shard, self.b_shard, row0, col0, tile.tm, tile.tn, acc);

            const int dest = problem.owner_of_row(row0);
            RankBuffers& dst = workspace.peer(rank, dest);
            const int lrow0 = row0 - dest * rpr;
            const int dtile = (lrow0 / tile.tm) * grid.tile_cols + tc.col;

            if (write_mode == WriteMode::WriteAlltoAll) {
                Matrix& plane = dst.staging[rank];
                for (int i = 0; i < tile.tm; ++i)
                    for (int j = 0; j < tile.tn; ++j)
                        plane(lrow0 + i, col0 + j) = acc[static_cast<size_t>(i) * tile.tn + j];
                recv_counts[dest][rank].fetch_add(1, std::memory_order_release);
                run.log.append({"tile_write", rank, tc.row, tc.col, dest, run.clock.tick(),
                                run.clock.now_ns()});
            } else if (opts.deterministic_reduce) {
                spin_wait([&] { return gates[dest][dtile].load(std::memory_order_acquire) == rank; },
                          opts, run, jitter,
                          "reduce turn of tile (" + std::to_string(tc.row) + "," +
                              std::to_string(tc.col) + ") on rank " + std::to_string(dest));
                for (int i = 0; i < tile.tm; ++i)
                    for (int j = 0; j < tile.tn; ++j)
                        dst.c_out(lrow0 + i, col0 + j) += acc[static_cast<size_t>(i) * tile.tn + j];
                gates[dest][dtile].store(rank + 1, std::memory_order_release);
                run.log.append({"reduce_contrib", rank, tc.row, tc.col, dest, run.clock.tick(),
                                run.clock.now_ns()});
            } else {
                // Arrival-order accumulation behind a per-tile spin lock.
                spin_wait(
                    [&] {
                        uint32_t expected = 0;
                        return locks[dest][dtile].compare_exchange_weak(
                            expected, 1, std::memory_order_acquire, std::memory_order_relaxed);
                    },
                    opts, run, jitter, "reduce lock");
                for (int i = 0; i < tile.tm; ++i)
                    for (int j = 0; j < tile.tn; ++j)
                        dst.c_out(lrow0 + i, col0 + j) += acc[static_cast<size_t>(i) * tile.tn + j];
                locks[dest][dtile].store(0, std::memory_order_release);
                run.log.append({"reduce_contrib", rank, tc.row, tc.col, dest, run.clock.tick(),
                                run.clock.now_ns()});
            }
        }
    };

    // Discrete reduction pass behind the per-source completion counters.
    auto agent_fn = [&](int rank) {
        if (write_mode != WriteMode::WriteAlltoAll) return;
        Jitter jitter(0);
        for (int src = 0; src < tp; ++src)
            spin_wait(
                [&] { return recv_counts[rank][src].load(std::memory_order_acquire) ==
                             tiles_per_block; },
                opts, run, jitter,
                "staging completion from source " + std::to_string(src) + " on rank " +
                    std::to_string(rank));
        RankBuffers& self = workspace.rank(rank);
        for (int src = 0; src < tp; ++src) {
            const Matrix& plane = self.staging[src];
            for (size_t i = 0; i < self.c_out.data().size(); ++i)
                self.c_out.data()[i] += plane.data()[i];
        }
        run.log.append({"reduce", rank, -1, -1, rank, run.clock.tick(), run.clock.now_ns()});
    };

    run_threads(run, tp, workers, worker_fn,
                write_mode == WriteMode::WriteAlltoAll
                    ? std::function<void(int)>(agent_fn)
                    : std::function<void(int)>());

    EngineResult res;
    for (int r = 0; r < tp; ++r) res.outputs.push_back(workspace.rank(r).c_out);
    res.log = run.log.snapshot();
    return res;
}

namespace {

void copy_rows(const Matrix& src, int src_row0, Matrix& dst, int dst_row0, int rows) {
    if (src_row0 < 0 || src_row0 + rows > src.rows() || dst_row0 < 0 ||
        dst_row0 + rows > dst.rows() || src.cols() != dst.cols())
        throw BoundsError("row copy out of bounds: src [" + std::to_string(src_row0) + ",+" +
                          std::to_string(rows) + ") of " + std::to_string(src.rows()) +
                          ", dst [" + std::to_string(dst_row0) + ",+" + std::to_string(rows) +
                          ") of " + std::to_string(dst.rows()));
    std::copy(src.row_ptr(src_row0), src.row_ptr(src_row0) + static_cast<size_t>(rows) * src.cols(),
              dst.row_ptr(dst_row0));
}

std::vector<TransferRecord> transfer_loop_impl(int rank, const ProblemSpec& problem,
                                               ShardedWorkspace& workspace,
                                               const CommTileSpec& comm, TransferMode transfer,
                                               std::vector<SignalBoard>& boards, SharedRun& run,
                                               const EngineOptions& opts) {
    const int rpr = problem.rows_per_rank();
    const int rpct = comm.rows_per_comm_tile;
    Jitter jitter(opts.interleave_seed ? opts.interleave_seed * 0x85ebull + rank + 7 : 0);
    std::vector<TransferRecord> trace;
    trace.reserve(comm.order.size());

    for (const TransferDesc& d : comm.order) {
        if (run.abort.load(std::memory_order_acquire)) throw Aborted{};
        jitter.maybe();
        TransferRecord rec;
        rec.desc = d;
        const int flag = d.row_begin / rpct;
        if (transfer == TransferMode::Pull) {
            RankBuffers& self = workspace.rank(rank);
            RankBuffers& src = workspace.peer(rank, d.peer);
            if (d.link == LinkClass::Forward) {
                // Forwarded tile: wait until the gate transfer landed it in the
                // mate's aggregation buffer.
                spin_wait([&] { return boards[d.peer].is_set(flag); }, opts, run, jitter,
                          "forwarded comm tile " + std::to_string(flag) + " on rank " +
                              std::to_string(d.peer));
                copy_rows(src.a_agg, d.row_begin, self.a_agg, d.row_begin, d.rows);
            } else {
                copy_rows(src.a_shard, d.row_begin - d.peer * rpr, self.a_agg, d.row_begin, d.rows);
            }
            rec.copy_logical_ts = run.clock.tick();
            rec.copy_done_ns = run.clock.now_ns();
            rec.flag_logical_ts = run.clock.tick();
            rec.flag_set_ns = run.clock.now_ns();
            if (!boards[rank].set(flag))
                throw std::runtime_error("flag " + std::to_string(flag) + " on rank " +
                                         std::to_string(rank) + " set twice");
            run.log.append({"signal_set", rank, flag, -1, rank, rec.flag_logical_ts,
                            rec.flag_set_ns});
        } else {
            RankBuffers& self = workspace.rank(rank);
            RankBuffers& dst = workspace.peer(rank, d.peer);
            copy_rows(self.a_shard, d.row_begin - rank * rpr, dst.a_agg, d.row_begin, d.rows);
            rec.copy_logical_ts = run.clock.tick();
            rec.copy_done_ns = run.clock.now_ns();
            rec.flag_logical_ts = run.clock.tick();
            rec.flag_set_ns = run.clock.now_ns();
            if (!boards[d.peer].set(flag))
                throw std::runtime_error("flag " + std::to_string(flag) + " on rank " +
                                         std::to_string(d.peer) + " set twice");
            run.log.append({"signal_set", rank, flag, -1, d.peer, rec.flag_logical_ts,
                            rec.flag_set_ns});
        }
        trace.push_back(rec);
    }
    return trace;
}

}  // namespace

std::vector<TransferRecord> host_transfer_loop(int rank, const ProblemSpec& problem,
                                               ShardedWorkspace& workspace,
                                               const CommTileSpec& comm, TransferMode transfer,
                                               std::vector<SignalBoard>& boards, RunClock& clock,
                                               const EngineOptions& opts, CausalityLog* log) {
    comm.validate(problem, rank, transfer);
    SharedRun run;
    run.clock.epoch_ns = clock.epoch_ns;
    run.clock.logical.store(clock.logical.load());
    auto trace = transfer_loop_impl(rank, problem, workspace, comm, transfer, boards, run, opts);
    clock.logical.store(run.clock.logical.load());
    if (log)
        for (const CausalityEvent& e : run.log.snapshot()) log->append(e);
    return trace;
}

EngineResult run_fused_allgather_gemm(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                      const TileShape& tile, const std::vector<CommTileSpec>& comm,
                                      TransferMode transfer, bool swizzle_on,
                                      const EngineOptions& opts,
                                      std::vector<std::vector<TransferRecord>>* traces) {
    if (problem.pattern != Pattern::AllGatherGemm)
        throw ConfigError("run_fused_allgather_gemm requires AllGatherGemm pattern");
    const GridDims grid = grid_for(problem, tile);
    workspace.validate(problem);
    if (static_cast<int>(comm.size()) != problem.tp)
        throw ConfigError("need one CommTileSpec per rank");
    for (int r = 0; r < problem.tp; ++r) comm[r].validate(problem, r, transfer);
    const int rpct = comm[0].rows_per_comm_tile;
    for (const CommTileSpec& c : comm)
        if (c.rows_per_comm_tile != rpct)
            throw ConfigError("all ranks must share one communication tile size");
    workspace.clear_outputs();

    const int tp = problem.tp;
    const int rpr = problem.rows_per_rank();
    const int num_flags = problem.m / rpct;

    // Freshly reset boards; local comm tiles preset.
    std::vector<SignalBoard> boards;
    boards.reserve(tp);
    for (int r = 0; r < tp; ++r) boards.emplace_back(num_flags);
    for (int r = 0; r < tp; ++r) {
        copy_rows(workspace.rank(r).a_shard, 0, workspace.rank(r).a_agg, r * rpr, rpr);
        for (int f = r * rpr / rpct; f < (r + 1) * rpr / rpct; ++f) boards[r].preset(f);
    }

    SharedRun run;
    std::vector<std::vector<TileCoord>> orders(tp);
    std::vector<std::unique_ptr<std::atomic<int>>> next_tile(tp);
    for (int r = 0; r < tp; ++r) {
        if (swizzle_on && transfer == TransferMode::Pull) {
            orders[r] = tile_order(arrival_aligned_policy(r, tp, comm[r].order, rpr), grid);
        } else if (swizzle_on) {
            // Push: our own spec lists outgoing rows, so the arrival order is
            // read off the senders — sort source blocks by how early each
            // sender's descriptor targeting this rank appears in its list.
            std::vector<std::pair<int, int>> arrivals;  // (position, source)
            for (int s = 0; s < tp; ++s) {
                if (s == r) continue;
                for (size_t i = 0; i < comm[s].order.size(); ++i)
                    if (comm[s].order[i].peer == r) {
                        arrivals.emplace_back(static_cast<int>(i), s);
                        break;
                    }
            }
            std::sort(arrivals.begin(), arrivals.end());
            SwizzlePolicy pol{SwizzleKind::ArrivalAligned, r, tp, 1, {}};
            pol.arrival_blocks.push_back(r);
            for (const auto& [pos, s] : arrivals) pol.arrival_blocks.push_back(s);
            for (int s = 0; s < tp; ++s)  // coverage gaps still need a slot
                if (std::find(pol.arrival_blocks.begin(), pol.arrival_blocks.end(), s) ==
                    pol.arrival_blocks.end())
                    pol.arrival_blocks.push_back(s);
            orders[r] = tile_order(pol, grid);
        } else {
            SwizzlePolicy naive{SwizzleKind::Naive, r, tp, 1, {}};
            orders[r] = tile_order(naive, grid);
        }
        next_tile[r] = std::make_unique<std::atomic<int>>(0);
    }

    std::vector<std::vector<TransferRecord>> all_traces(tp);

    auto agent_fn = [&](int rank) {
        all_traces[rank] =
            transfer_loop_impl(rank, problem, workspace, comm[rank], transfer, boards, run, opts);
    };

    auto worker_fn = [&](int rank, int worker) {
        Jitter jitter(opts.interleave_seed ? opts.interleave_seed * 0xc2b2ull + rank * 31 + worker
                                           : 0);
        RankBuffers& self = workspace.rank(rank);
        std::vector<double> acc;
        for (;;) {
            const int idx = next_tile[rank]->fetch_add(1, std::memory_order_relaxed);
            if (idx >= grid.tiles()) break;
            if (run.abort.load(std::memory_order_acquire)) throw Aborted{};
            jitter.maybe();
            const TileCoord tc = orders[rank][idx];
            const int row0 = tc.row * tile.tm;
            const int col0 = tc.col * tile.tn;
            // The tile's rows may span several comm tiles; block on each.
            const int f0 = row0 / rpct;
            const int f1 = (row0 + tile.tm - 1) / rpct;
            for (int f = f0; f <= f1; ++f) {
                if (!boards[rank].is_set(f))
                    run.log.append({"wait", rank, tc.row, tc.col, f, run.clock.tick(),
                                    run.clock.now_ns()});
                spin_wait([&] { return boards[rank].is_set(f); }, opts, run, jitter,
                          "signal " + std::to_string(f) + " for tile (" + std::to_string(tc.row) +
                              "," + std::to_string(tc.col) + ") on rank " + std::to_string(rank));
            }
            run.log.append(
                {"compute_start", rank, tc.row, tc.col, f0, run.clock.tick(), run.clock.now_ns()});
            compute_tile(self.a_agg, self.b_shard, row0, col0, tile.tm, tile.tn, acc);
            for (int i = 0; i < tile.tm; ++i)
                for (int j = 0; j < tile.tn; ++j)
                    self.c_out(row0 + i, col0 + j) = acc[static_cast<size_t>(i) * tile.tn + j];
        }
    };

    run_threads(run, tp, auto_workers(opts, tp), worker_fn, agent_fn);

    if (traces) *traces = all_traces;
    EngineResult res;
    for (int r = 0; r < tp; ++r) res.outputs.push_back(workspace.rank(r).c_out);
    res.log = run.log.snapshot();
    return res;
}

std::vector<Matrix> run_nonoverlap(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                   const TileShape& tile) {
    validate_tiling(problem, tile);
    workspace.validate(problem);
    workspace.clear_outputs();
    const int rpr = problem.rows_per_rank();
    std::vector<Matrix> out;

    if (problem.pattern == Pattern::AllGatherGemm) {
        // Serial AllGather in rank order, then plain GEMM per rank.
        for (int r = 0; r < problem.tp; ++r) {
            RankBuffers& self = workspace.rank(r);
            for (int src = 0; src < problem.tp; ++src)
                copy_rows(workspace.rank(src).a_shard, 0, self.a_agg, src * rpr, rpr);
            for (int i = 0; i < problem.m; ++i)
                for (int j = 0; j < problem.local_cols(); ++j) {
                    double acc = 0.0;
                    for (int x = 0; x < problem.k; ++x) acc += self.a_agg(i, x) * self.b_shard(x, j);
                    self.c_out(i, j) = acc;
                }
            out.push_back(self.c_out);
        }
    } else {
        // Plain GEMM per rank, then serial reduce-scatter in rank order.
        std::vector<Matrix> partials;
        for (int r = 0; r < problem.tp; ++r) {
            const RankBuffers& self = workspace.rank(r);
            Matrix p(problem.m, problem.n);
            for (int i = 0; i < problem.m; ++i)
                for (int j = 0; j < problem.n; ++j) {
                    double acc = 0.0;
                    for (int x = 0; x < problem.local_k(); ++x)
                        acc += self.a_shard(i, x) * self.b_shard(x, j);
                    p(i, j) = acc;
                }
            partials.push_back(std::move(p));
        }
        for (int dest = 0; dest < problem.tp; ++dest) {
            Matrix& c = workspace.rank(dest).c_out;
            for (int src = 0; src < problem.tp; ++src)
                for (int i = 0; i < rpr; ++i)
                    for (int j = 0; j < problem.n; ++j)
                        c(i, j) += partials[src](dest * rpr + i, j);
            out.push_back(c);
        }
    }
    return out;
}

std::vector<MediumStep> medium_schedule(const ProblemSpec& problem, int partitions) {
    problem.validate();
    const bool ok = (problem.tp == 1 && partitions == 1) || partitions == problem.tp ||
                    partitions == 2 * problem.tp;
    if (!ok)
        throw ConfigError("partitions=" + std::to_string(partitions) +
                          " must be tp or 2*tp (tp=" + std::to_string(problem.tp) + ")");
    if (problem.m % partitions != 0)
        throw ConfigError("m must be divisible by the partition count");

    std::vector<MediumStep> steps;
    const int chunk_rows = problem.m / partitions;
    if (problem.pattern == Pattern::GemmReduceScatter) {
        for (int r = 0; r < problem.tp; ++r) {
            int prev_add = -1;
            for (int c = 0; c < partitions; ++c) {
                const int g = static_cast<int>(steps.size());
                steps.push_back({r, MediumStep::Kind::ChunkGemm, c,
                                 prev_add >= 0 ? std::vector<int>{prev_add} : std::vector<int>{}});
                const int x = static_cast<int>(steps.size());
                steps.push_back({r, MediumStep::Kind::ChunkTransfer, c,
                                 prev_add >= 0 ? std::vector<int>{prev_add} : std::vector<int>{}});
                const int a = static_cast<int>(steps.size());
                steps.push_back({r, MediumStep::Kind::ChunkAdd, c, {g, x}});
                prev_add = a;
            }
        }
    } else {
        for (int r = 0; r < problem.tp; ++r) {
            // All non-local chunk transfers issued eagerly, then chunk GEMMs
            // gated on their own chunk's arrival.
            std::vector<int> xfer_step(partitions, -1);
            for (int c = 0; c < partitions; ++c) {
                if (problem.owner_of_row(c * chunk_rows) == r) continue;
                xfer_step[c] = static_cast<int>(steps.size());
                steps.push_back({r, MediumStep::Kind::ChunkTransfer, c, {}});
            }
            for (int c = 0; c < partitions; ++c)
                steps.push_back({r, MediumStep::Kind::ChunkGemm, c,
                                 xfer_step[c] >= 0 ? std::vector<int>{xfer_step[c]}
                                                   : std::vector<int>{}});
        }
    }
    return steps;
}

MediumResult run_medium_grained(const ProblemSpec& problem, ShardedWorkspace& workspace,
                                const TileShape& tile, int partitions) {
    validate_tiling(problem, tile);
    workspace.validate(problem);
    workspace.clear_outputs();
    std::vector<MediumStep> schedule = medium_schedule(problem, partitions);
    const int chunk_rows = problem.m / partitions;
    const int rpr = problem.rows_per_rank();

    // Serial execution in schedule order (the trace carries the concurrency
    // structure; values must not depend on it).
    std::vector<std::vector<Matrix>> chunk_partials(problem.tp);
    for (auto& v : chunk_partials) v.resize(partitions);

    for (const MediumStep& s : schedule) {
        RankBuffers& self = workspace.rank(s.rank);
        const int row0 = s.chunk * chunk_rows;
        if (problem.pattern == Pattern::GemmReduceScatter) {
            switch (s.kind) {
                case MediumStep::Kind::ChunkGemm: {
                    Matrix p(chunk_rows, problem.n);
                    for (int i = 0; i < chunk_rows; ++i)
                        for (int j = 0; j < problem.n; ++j) {
                            double acc = 0.0;
                            for (int x = 0; x < problem.local_k(); ++x)
                                acc += self.a_shard(row0 + i, x) * self.b_shard(x, j);
                            p(i, j) = acc;
                        }
                    chunk_partials[s.rank][s.chunk] = std::move(p);
                    break;
                }
                case MediumStep::Kind::ChunkTransfer:
                    break;  // single address space; costed by the simulator
                case MediumStep::Kind::ChunkAdd: {
                    const int dest = problem.owner_of_row(row0);
                    Matrix& c = workspace.peer(s.rank, dest).c_out;
                    const Matrix& p = chunk_partials[s.rank][s.chunk];
                    for (int i = 0; i < chunk_rows; ++i)
                        for (int j = 0; j < problem.n; ++j)
                            c(row0 - dest * rpr + i, j) += p(i, j);
                    break;
                }
            }
        } else {
            switch (s.kind) {
                case MediumStep::Kind::ChunkTransfer: {
                    const int origin = problem.owner_of_row(row0);
                    copy_rows(workspace.peer(s.rank, origin).a_shard, row0 - origin * rpr,
                              self.a_agg, row0, chunk_rows);
                    break;
                }
                case MediumStep::Kind::ChunkGemm: {
                    if (problem.owner_of_row(row0) == s.rank)
                        copy_rows(self.a_shard, row0 - s.rank * rpr, self.a_agg, row0, chunk_rows);
                    for (int i = 0; i < chunk_rows; ++i)
                        for (int j = 0; j < problem.local_cols(); ++j) {
                            double acc = 0.0;
                            for (int x = 0; x < problem.k; ++x)
                                acc += self.a_agg(row0 + i, x) * self.b_shard(x, j);
                            self.c_out(row0 + i, j) = acc;
                        }
                    break;
                }
                case MediumStep::Kind::ChunkAdd:
                    break;
            }
        }
    }

    // RS adds ran in rank order within the schedule, so outputs already match
    // the oracle's serial reduction order.
    MediumResult res;
    for (int r = 0; r < problem.tp; ++r) res.outputs.push_back(workspace.rank(r).c_out);
    res.trace = std::move(schedule);
    return res;
}

}  // namespace overlap
