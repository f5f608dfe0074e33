#include "overlap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

namespace overlap {

namespace {
constexpr double kEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();
// A transfer counts as drained once the residual is this fraction of its
// payload; a plain absolute epsilon stalls when t's floating-point ulp
// exceeds remaining/rate.
inline double drain_eps(double bytes) { return kEps + 1e-9 * bytes; }
}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Coarse: return "Coarse";
        case Strategy::Medium: return "Medium";
        case Strategy::Fine: return "Fine";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "Coarse") return Strategy::Coarse;
    if (s == "Medium") return Strategy::Medium;
    if (s == "Fine") return Strategy::Fine;
    throw ConfigError("unknown strategy: '" + s + "' (expected Coarse|Medium|Fine)");
}

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::TileCompute: return "tile_compute";
        case EventKind::Transfer: return "transfer";
        case EventKind::KernelLaunch: return "kernel_launch";
        case EventKind::Wait: return "wait";
        case EventKind::Reduce: return "reduce";
    }
    return "?";
}

double SplitEfficiency::operator()(double chunk_fraction) const {
    if (chunk_fraction >= 1.0) return 1.0;
    return std::max(floor, std::pow(chunk_fraction, exponent));
}

void MachineModel::validate() const {
    if (sm_count <= 0 || flops_per_us <= 0 || link_bw_bytes_per_us <= 0 || bytes_per_element <= 0)
        throw ConfigError("machine rates and widths must be positive");
    if (launch_overhead_us < 0 || link_latency_us < 0)
        throw ConfigError("machine overheads must be non-negative");
}

double MachineModel::tile_flops(const ProblemSpec& problem, const TileShape& tile) const {
    return 2.0 * tile.tm * tile.tn * problem.local_k();
}

double MachineModel::tile_time_us(const ProblemSpec& problem, const TileShape& tile) const {
    return tile_flops(problem, tile) / flops_per_us;
}

double Timeline::overall_us() const {
    if (events.empty()) return 0;
    double lo = kInf, hi = -kInf;
    for (const SimEvent& e : events) {
        lo = std::min(lo, e.start_us);
        hi = std::max(hi, e.end_us);
    }
    return hi - lo;
}

double gemm_nonsplit_time(const ProblemSpec& problem, const TileShape& tile,
                          const MachineModel& machine) {
    machine.validate();
    const GridDims grid = grid_for(problem, tile);
    const int waves = (grid.tiles() + machine.sm_count - 1) / machine.sm_count;
    return machine.launch_overhead_us + waves * machine.tile_time_us(problem, tile);
}

// ---------------------------------------------------------------------------
// Fluid link model: concurrent transfers on a link share its bandwidth
// equally, recomputed at every event boundary.

namespace {

struct FluidJob {
    double ready = 0;
    double bytes = 0;
    double latency = 0;
    int link = 0;
    int group = -1;           // jobs in one group start in listed order
    std::vector<int> deps;    // flat indices that must complete first

    // outputs / state
    double start = -1, active_at = -1, end = -1;
    double remaining = 0;
    int state = 0;  // 0 pending, 1 latency, 2 moving bytes, 3 done
};

void run_fluid(std::vector<FluidJob>& jobs, const std::vector<double>& link_bw) {
    const int n = static_cast<int>(jobs.size());
    std::vector<int> group_prev(n, -1);
    {
        std::vector<int> last_of_group;
        for (int i = 0; i < n; ++i) {
            const int g = jobs[i].group;
            if (g < 0) continue;
            if (g >= static_cast<int>(last_of_group.size())) last_of_group.resize(g + 1, -1);
            group_prev[i] = last_of_group[g];
            last_of_group[g] = i;
        }
    }
    std::vector<int> active_on_link(link_bw.size(), 0);
    auto rate_of = [&](const FluidJob& j) { return link_bw[j.link] / active_on_link[j.link]; };

    int done = 0;
    double t = 0;
    while (done < n) {
        double next_start = kInf, next_lat = kInf, next_comp = kInf;
        int comp_idx = -1;
        for (int i = 0; i < n; ++i) {
            const FluidJob& j = jobs[i];
            if (j.state == 0) {
                double est = j.ready;
                bool ok = group_prev[i] < 0 || jobs[group_prev[i]].state == 3;
                if (ok && group_prev[i] >= 0) est = std::max(est, jobs[group_prev[i]].end);
                for (int d : j.deps) {
                    if (jobs[d].state != 3) { ok = false; break; }
                    est = std::max(est, jobs[d].end);
                }
                if (ok) next_start = std::min(next_start, std::max(est, t));
            } else if (j.state == 1) {
                next_lat = std::min(next_lat, j.active_at);
            } else if (j.state == 2) {
                const double est =
                    t + std::max(0.0, j.remaining - drain_eps(j.bytes)) / rate_of(j);
                if (est < next_comp) {
                    next_comp = est;
                    comp_idx = i;
                }
            }
        }
        const double tn = std::min({next_start, next_lat, next_comp});
        if (tn == kInf) throw ConfigError("transfer dependency cycle in fluid link model");
        for (FluidJob& j : jobs)
            if (j.state == 2) j.remaining -= rate_of(j) * (tn - t);
        // Snap the winning completion to exactly zero: cancellation can leave
        // a residual whose drain time is below t's ulp, which would stall the
        // clock.
        if (comp_idx >= 0 && next_comp <= tn) jobs[comp_idx].remaining = 0;
        t = tn;

        // Process everything due at t; starts may cascade within the instant.
        bool changed = true;
        while (changed) {
            changed = false;
            for (int i = 0; i < n; ++i) {
                FluidJob& j = jobs[i];
                if (j.state == 2 && j.remaining <= drain_eps(j.bytes)) {
                    j.state = 3;
                    j.end = t;
                    --active_on_link[j.link];
                    ++done;
                    changed = true;
                } else if (j.state == 1 && j.active_at <= t + kEps) {
                    if (j.bytes <= kEps) {
                        j.state = 3;
                        j.end = j.active_at;
                        ++done;
                    } else {
                        j.state = 2;
                        j.remaining = j.bytes;
                        ++active_on_link[j.link];
                    }
                    changed = true;
                } else if (j.state == 0) {
                    double est = j.ready;
                    bool ok = group_prev[i] < 0 ||
                              (jobs[group_prev[i]].state == 3 &&
                               (est = std::max(est, jobs[group_prev[i]].end), true));
                    for (int d : j.deps) {
                        if (jobs[d].state != 3) { ok = false; break; }
                        est = std::max(est, jobs[d].end);
                    }
                    if (ok && est <= t + kEps) {
                        j.start = t;
                        j.active_at = t + j.latency;
                        j.state = 1;
                        changed = true;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------

struct LinkRef {
    int id;
    double bw;
};

// Resource id for a transfer descriptor. Pull charges the source's egress,
// push the destination's ingress; inter-node descriptors use the NIC.
LinkRef link_for(const TransferDesc& d, int tp, const MachineModel& m) {
    if (d.link == LinkClass::InterNode) return {tp + d.peer, m.inter_node_bw()};
    return {d.peer, m.link_bw_bytes_per_us};
}

struct TransferPlan {
    // flag_time[rank][comm_tile] in us; local tiles are 0 (preset).
    std::vector<std::vector<double>> flag_time;
    std::vector<SimEvent> events;
};

TransferPlan simulate_ag_transfers(const ProblemSpec& problem, const MachineModel& machine,
                                   int rpct, TransferMode transfer, bool ring_forwarding) {
    const int tp = problem.tp;
    const int rpr = problem.rows_per_rank();
    const int num_flags = problem.m / rpct;

    std::vector<std::vector<TransferDesc>> orders(tp);
    for (int r = 0; r < tp; ++r) {
        if (transfer == TransferMode::Pull) {
            orders[r] = comm_order(machine.topology, r, tp, rpr, rpct, ring_forwarding);
        } else {
            std::vector<TransferDesc> pull = comm_order(machine.topology, r, tp, rpr, rpct);
            for (int peer : peer_order(pull, r, rpr))
                for (int off = 0; off < rpr; off += rpct)
                    orders[r].push_back({peer, r * rpr + off, rpct, LinkClass::IntraNuma, -1, -1});
        }
    }

    std::vector<double> link_bw(2 * tp, machine.link_bw_bytes_per_us);
    for (int i = 0; i < tp; ++i) link_bw[tp + i] = machine.inter_node_bw();

    std::vector<FluidJob> jobs;
    std::vector<int> offset(tp, 0);
    for (int r = 0; r < tp; ++r) {
        offset[r] = static_cast<int>(jobs.size());
        for (const TransferDesc& d : orders[r]) {
            FluidJob j;
            j.bytes = static_cast<double>(d.rows) * problem.k * machine.bytes_per_element;
            j.latency = machine.link_latency_us;
            j.link = link_for(d, tp, machine).id;
            j.group = r;
            jobs.push_back(j);
        }
    }
    // Forwarding gates resolve across ranks through the flat index space.
    for (int r = 0; r < tp; ++r)
        for (size_t i = 0; i < orders[r].size(); ++i)
            if (orders[r][i].dep_rank >= 0)
                jobs[offset[r] + i].deps.push_back(offset[orders[r][i].dep_rank] +
                                                   orders[r][i].dep_index);

    run_fluid(jobs, link_bw);

    TransferPlan plan;
    plan.flag_time.assign(tp, std::vector<double>(num_flags, kInf));
    for (int r = 0; r < tp; ++r)
        for (int f = r * rpr / rpct; f < (r + 1) * rpr / rpct; ++f) plan.flag_time[r][f] = 0;
    for (int r = 0; r < tp; ++r)
        for (size_t i = 0; i < orders[r].size(); ++i) {
            const TransferDesc& d = orders[r][i];
            const FluidJob& j = jobs[offset[r] + i];
            const int flag = d.row_begin / rpct;
            const int board = transfer == TransferMode::Pull ? r : d.peer;
            plan.flag_time[board][flag] = std::min(plan.flag_time[board][flag], j.end);
            plan.events.push_back({EventKind::Transfer, r, tp, j.start, j.end,
                                   "rows[" + std::to_string(d.row_begin) + ",+" +
                                       std::to_string(d.rows) + ")<->" + std::to_string(d.peer)});
        }
    return plan;
}

SwizzlePolicy fine_policy(const ProblemSpec& problem, SwizzleKind kind, int rank,
                          const MachineModel& machine, int rpct, int shift_offset) {
    if (kind == SwizzleKind::ArrivalAligned) {
        std::vector<TransferDesc> order =
            comm_order(machine.topology, rank, problem.tp, problem.rows_per_rank(), rpct);
        return arrival_aligned_policy(rank, problem.tp, order, problem.rows_per_rank());
    }
    return {kind, rank, problem.tp, shift_offset, {}};
}

Timeline simulate_fine_ag(const ProblemSpec& problem, const TileShape& tile,
                          const MachineModel& machine, SwizzleKind swizzle, int rpct,
                          TransferMode transfer, const SimOptions& opts) {
    const GridDims grid = grid_for(problem, tile);
    const int tp = problem.tp;
    Timeline tl;
    TransferPlan plan = (tp > 1)
                            ? simulate_ag_transfers(problem, machine, rpct, transfer,
                                                    opts.ring_forwarding)
                            : TransferPlan{std::vector<std::vector<double>>(
                                               1, std::vector<double>(problem.m / rpct, 0.0)),
                                           {}};
    tl.events.insert(tl.events.end(), plan.events.begin(), plan.events.end());

    const double d = machine.tile_time_us(problem, tile);
    const double L = machine.launch_overhead_us;
    for (int r = 0; r < tp; ++r) {
        tl.events.push_back({EventKind::KernelLaunch, r, 0, 0, L, "fused_ag_gemm"});
        std::vector<TileCoord> order =
            tile_order(fine_policy(problem, swizzle, r, machine, rpct, opts.shift_offset), grid);
        std::vector<double> slot_free(machine.sm_count, L);
        for (int i = 0; i < grid.tiles(); ++i) {
            // Next free slot takes the next tile in swizzled order.
            int s = 0;
            for (int q = 1; q < machine.sm_count; ++q)
                if (slot_free[q] < slot_free[s]) s = q;
            const TileCoord tc = order[i];
            const int row0 = tc.row * tile.tm;
            double ready = 0;
            for (int f = row0 / rpct; f <= (row0 + tile.tm - 1) / rpct; ++f)
                ready = std::max(ready, plan.flag_time[r][f]);
            const double start = std::max(slot_free[s], ready);
            if (ready > slot_free[s] + kEps)
                tl.events.push_back({EventKind::Wait, r, s, slot_free[s], ready,
                                     "signal for tile (" + std::to_string(tc.row) + "," +
                                         std::to_string(tc.col) + ")"});
            tl.events.push_back({EventKind::TileCompute, r, s, start, start + d,
                                 "(" + std::to_string(tc.row) + "," + std::to_string(tc.col) + ")"});
            slot_free[s] = start + d;
        }
    }
    return tl;
}

Timeline simulate_fine_rs(const ProblemSpec& problem, const TileShape& tile,
                          const MachineModel& machine, SwizzleKind swizzle,
                          const SimOptions& opts) {
    const GridDims grid = grid_for(problem, tile);
    const int tp = problem.tp;
    const double d = machine.tile_time_us(problem, tile);
    const double L = machine.launch_overhead_us;
    const double tile_bytes = static_cast<double>(tile.tm) * tile.tn * machine.bytes_per_element;

    Timeline tl;
    // Tiles stream through the slots at full rate; each remote tile's
    // epilogue launches an asynchronous write that contends on the owning
    // rank's ingress bandwidth (fair share). A naive mapping aims every
    // rank at the same destination block simultaneously, so that ingress
    // backs up; the shifted mapping spreads destinations and drains evenly.
    std::vector<FluidJob> writes;
    std::vector<int> write_rank;
    std::vector<int> write_dest;
    std::vector<double> last_incoming(tp, 0.0), last_local(tp, 0.0);
    for (int r = 0; r < tp; ++r) {
        tl.events.push_back({EventKind::KernelLaunch, r, 0, 0, L, "fused_gemm_rs"});
        SwizzleKind k = swizzle == SwizzleKind::ArrivalAligned ? SwizzleKind::RankShifted : swizzle;
        SwizzlePolicy policy{k, r, tp, opts.shift_offset, {}};
        const std::vector<TileCoord> order = tile_order(policy, grid);
        std::vector<double> slot_free(machine.sm_count, L);
        for (int i = 0; i < grid.tiles(); ++i) {
            int s = 0;
            for (int q = 1; q < machine.sm_count; ++q)
                if (slot_free[q] < slot_free[s]) s = q;
            const TileCoord tc = order[i];
            const double start = slot_free[s];
            tl.events.push_back({EventKind::TileCompute, r, s, start, start + d,
                                 "(" + std::to_string(tc.row) + "," + std::to_string(tc.col) + ")"});
            slot_free[s] = start + d;
            const int dest = problem.owner_of_row(tc.row * tile.tm);
            if (dest == r) {
                last_local[r] = std::max(last_local[r], start + d);
            } else {
                FluidJob j;
                j.ready = start + d;
                j.bytes = tile_bytes;
                j.latency = machine.link_latency_us;
                j.link = dest;
                writes.push_back(j);
                write_rank.push_back(r);
                write_dest.push_back(dest);
            }
        }
    }
    if (!writes.empty()) {
        run_fluid(writes, std::vector<double>(tp, machine.link_bw_bytes_per_us));
        for (size_t i = 0; i < writes.size(); ++i) {
            tl.events.push_back({EventKind::Transfer, write_rank[i], machine.sm_count,
                                 writes[i].start, writes[i].end,
                                 "tile write -> " + std::to_string(write_dest[i])});
            last_incoming[write_dest[i]] =
                std::max(last_incoming[write_dest[i]], writes[i].end);
        }
    }

    if (opts.write_mode == WriteMode::WriteAlltoAll && tp > 1) {
        // Discrete reduction once every source's plane has landed.
        const double reduce_us = static_cast<double>(tp - 1) * problem.rows_per_rank() * problem.n /
                                 (machine.flops_per_us * machine.sm_count);
        for (int r = 0; r < tp; ++r) {
            const double start = std::max(last_incoming[r], last_local[r]);
            tl.events.push_back({EventKind::Reduce, r, 0, start, start + reduce_us, "plane sum"});
        }
    }
    return tl;
}

Timeline simulate_coarse(const ProblemSpec& problem, const TileShape& tile,
                         const MachineModel& machine) {
    const GridDims grid = grid_for(problem, tile);
    const int tp = problem.tp;
    const double d = machine.tile_time_us(problem, tile);
    const double L = machine.launch_overhead_us;
    Timeline tl;

    const double block_bytes =
        static_cast<double>(problem.rows_per_rank()) *
        (problem.pattern == Pattern::AllGatherGemm ? problem.k : problem.n) *
        machine.bytes_per_element;
    const double step_us = machine.link_latency_us + block_bytes / machine.link_bw_bytes_per_us;
    const double comm_us = tp > 1 ? L + (tp - 1) * step_us : 0.0;

    double gemm_at = 0.0;
    if (problem.pattern == Pattern::AllGatherGemm && tp > 1) {
        for (int r = 0; r < tp; ++r) {
            tl.events.push_back({EventKind::KernelLaunch, r, 0, 0, L, "allgather"});
            for (int s = 0; s < tp - 1; ++s)
                tl.events.push_back({EventKind::Transfer, r, 0, L + s * step_us,
                                     L + (s + 1) * step_us, "ring step " + std::to_string(s)});
        }
        gemm_at = comm_us;
    }
    double gemm_end = gemm_at;
    for (int r = 0; r < tp; ++r) {
        tl.events.push_back({EventKind::KernelLaunch, r, 0, gemm_at, gemm_at + L, "gemm"});
        for (int i = 0; i < grid.tiles(); ++i) {
            const int wave = i / machine.sm_count;
            const double s0 = gemm_at + L + wave * d;
            tl.events.push_back({EventKind::TileCompute, r, i % machine.sm_count, s0, s0 + d, ""});
            gemm_end = std::max(gemm_end, s0 + d);
        }
    }
    if (problem.pattern == Pattern::GemmReduceScatter && tp > 1) {
        for (int r = 0; r < tp; ++r) {
            tl.events.push_back({EventKind::KernelLaunch, r, 0, gemm_end, gemm_end + L,
                                 "reduce_scatter"});
            for (int s = 0; s < tp - 1; ++s)
                tl.events.push_back({EventKind::Transfer, r, 0, gemm_end + L + s * step_us,
                                     gemm_end + L + (s + 1) * step_us,
                                     "ring step " + std::to_string(s)});
        }
    }
    return tl;
}

Timeline simulate_medium(const ProblemSpec& problem, const TileShape& tile,
                         const MachineModel& machine, const SimOptions& opts) {
    const int tp = problem.tp;
    const int P = opts.medium_partitions > 0 ? opts.medium_partitions : tp;
    std::vector<MediumStep> steps = medium_schedule(problem, P);
    const int chunk_rows = problem.m / P;
    const double eff = machine.split_eff(1.0 / P);
    const double rate = machine.flops_per_us * machine.sm_count;
    const double L = machine.launch_overhead_us;

    const double gemm_flops = 2.0 * chunk_rows * problem.local_cols() * problem.local_k();
    const double gemm_us = gemm_flops / (rate * eff);
    const double xfer_bytes =
        static_cast<double>(chunk_rows) *
        (problem.pattern == Pattern::AllGatherGemm ? problem.k : problem.n) *
        machine.bytes_per_element;
    const double xfer_us = machine.link_latency_us + xfer_bytes / machine.link_bw_bytes_per_us;
    const double add_us = static_cast<double>(chunk_rows) * problem.n / rate;

    Timeline tl;
    std::vector<double> compute_free(tp, 0.0), link_free(tp, 0.0);
    std::vector<double> step_end(steps.size(), 0.0);

    if (problem.pattern == Pattern::GemmReduceScatter) {
        for (size_t i = 0; i < steps.size(); ++i) {
            const MediumStep& s = steps[i];
            double dep_end = 0;
            for (int dp : s.deps) dep_end = std::max(dep_end, step_end[dp]);
            double start = 0, dur = 0;
            switch (s.kind) {
                case MediumStep::Kind::ChunkGemm:
                    start = std::max(compute_free[s.rank], dep_end);
                    dur = L + gemm_us;
                    tl.events.push_back({EventKind::KernelLaunch, s.rank, 0, start, start + L,
                                         "chunk " + std::to_string(s.chunk)});
                    tl.events.push_back({EventKind::TileCompute, s.rank, 0, start + L, start + dur,
                                         "chunk gemm " + std::to_string(s.chunk)});
                    compute_free[s.rank] = start + dur;
                    break;
                case MediumStep::Kind::ChunkTransfer:
                    start = std::max(link_free[s.rank], dep_end);
                    dur = xfer_us;
                    tl.events.push_back({EventKind::Transfer, s.rank, 1, start, start + dur,
                                         "chunk " + std::to_string(s.chunk)});
                    link_free[s.rank] = start + dur;
                    break;
                case MediumStep::Kind::ChunkAdd:
                    start = std::max(compute_free[s.rank], dep_end);
                    dur = add_us;
                    tl.events.push_back({EventKind::Reduce, s.rank, 0, start, start + dur,
                                         "chunk add " + std::to_string(s.chunk)});
                    compute_free[s.rank] = start + dur;
                    break;
            }
            step_end[i] = start + dur;
        }
    } else {
        // Transfers issued eagerly in listed order; chunk kernels run in
        // arrival order on the (serially multiplexed) compute resource.
        std::vector<double> release(steps.size(), 0.0);
        for (size_t i = 0; i < steps.size(); ++i) {
            const MediumStep& s = steps[i];
            if (s.kind != MediumStep::Kind::ChunkTransfer) continue;
            const double start = link_free[s.rank];
            tl.events.push_back({EventKind::Transfer, s.rank, 1, start, start + xfer_us,
                                 "chunk " + std::to_string(s.chunk)});
            link_free[s.rank] = start + xfer_us;
            step_end[i] = start + xfer_us;
        }
        // Gather gemm steps per rank, sort by arrival.
        for (int r = 0; r < tp; ++r) {
            std::vector<std::pair<double, size_t>> gemms;
            for (size_t i = 0; i < steps.size(); ++i) {
                const MediumStep& s = steps[i];
                if (s.rank != r || s.kind != MediumStep::Kind::ChunkGemm) continue;
                double rel = 0;
                for (int dp : s.deps) rel = std::max(rel, step_end[dp]);
                gemms.push_back({rel, i});
            }
            std::stable_sort(gemms.begin(), gemms.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (auto [rel, i] : gemms) {
                const double start = std::max(compute_free[r], rel);
                tl.events.push_back({EventKind::KernelLaunch, r, 0, start, start + L,
                                     "chunk " + std::to_string(steps[i].chunk)});
                tl.events.push_back({EventKind::TileCompute, r, 0, start + L, start + L + gemm_us,
                                     "chunk gemm " + std::to_string(steps[i].chunk)});
                compute_free[r] = start + L + gemm_us;
                step_end[i] = compute_free[r];
            }
        }
    }
    return tl;
}

}  // namespace

Timeline simulate(Strategy strategy, const ProblemSpec& problem, const TileShape& tile,
                  const MachineModel& machine, SwizzleKind swizzle, int rows_per_comm_tile,
                  TransferMode transfer, const SimOptions& opts) {
    machine.validate();
    machine.topology.validate(problem.tp);
    validate_tiling(problem, tile);
    const int rpct = rows_per_comm_tile > 0 ? rows_per_comm_tile : problem.rows_per_rank();
    if (problem.rows_per_rank() % rpct != 0)
        throw ConfigError("rows_per_comm_tile must divide m/tp");

    switch (strategy) {
        case Strategy::Coarse:
            return simulate_coarse(problem, tile, machine);
        case Strategy::Medium:
            return simulate_medium(problem, tile, machine, opts);
        case Strategy::Fine:
            if (problem.pattern == Pattern::AllGatherGemm)
                return simulate_fine_ag(problem, tile, machine, swizzle, rpct, transfer, opts);
            return simulate_fine_rs(problem, tile, machine, swizzle, opts);
    }
    throw ConfigError("unreachable strategy");
}

Metrics metrics(const Timeline& timeline, const Timeline& baseline_timeline,
                const ProblemSpec& problem, const TileShape& tile, const MachineModel& machine) {
    Metrics m;
    m.overall_us = timeline.overall_us();
    m.gemm_nonsplit_us = gemm_nonsplit_time(problem, tile, machine);
    m.ect_us = m.overall_us - m.gemm_nonsplit_us;
    const double ect_base = baseline_timeline.overall_us() - m.gemm_nonsplit_us;
    m.overlap_efficiency = ect_base != 0.0 ? 1.0 - m.ect_us / ect_base : 0.0;
    return m;
}

void write_timeline_jsonl(const std::string& path, const Timeline& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const SimEvent& e : t.events)
        out << "{\"kind\":\"" << to_string(e.kind) << "\",\"rank\":" << e.rank
            << ",\"lane\":" << e.lane << ",\"start_us\":" << e.start_us
            << ",\"end_us\":" << e.end_us << ",\"name\":\"" << e.name << "\"}\n";
}

void write_chrome_trace(const std::string& path, const Timeline& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "{\"traceEvents\":[";
    bool first = true;
    for (const SimEvent& e : t.events) {
        if (!first) out << ",";
        first = false;
        out << "{\"name\":\"" << to_string(e.kind) << (e.name.empty() ? "" : " " + e.name)
            << "\",\"ph\":\"X\",\"ts\":" << e.start_us << ",\"dur\":" << (e.end_us - e.start_us)
            << ",\"pid\":" << e.rank << ",\"tid\":" << e.lane << "}";
    }
    out << "]}\n";
}

std::string metrics_csv_header() {
    return "strategy,pattern,m,n,k,tp,overall_us,gemm_us,ect_us,efficiency";
}

std::string metrics_csv_row(const std::string& strategy, const ProblemSpec& problem,
                            const Metrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%d,%d,%.6f,%.6f,%.6f,%.6f", strategy.c_str(),
                  to_string(problem.pattern).c_str(), problem.m, problem.n, problem.k, problem.tp,
                  m.overall_us, m.gemm_nonsplit_us, m.ect_us, m.overlap_efficiency);
    return buf;
}

}  // namespace overlap
