#pragma once

#include <string>
#include <vector>

#include "overlap/engine.hpp"
#include "overlap/problem.hpp"
#include "overlap/topology.hpp"

namespace overlap {

enum class Strategy { Coarse, Medium, Fine };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Relative GEMM rate as a function of the chunk fraction; 1 at fraction 1 and
// non-increasing as chunks shrink (split kernels underutilize the device).
struct SplitEfficiency {
    double exponent = 0.15;
    double floor = 0.5;
    double operator()(double chunk_fraction) const;
};

struct MachineModel {
    int sm_count = 16;                      // concurrent tile slots per rank
    double flops_per_us = 2000.0;           // per-slot compute rate
    double launch_overhead_us = 20.0;       // per-kernel cost
    double link_bw_bytes_per_us = 400.0;    // per-link bandwidth
    double link_latency_us = 2.0;           // per-transfer latency
    double inter_node_bw_bytes_per_us = 0;  // 0 -> same as link_bw
    int bytes_per_element = 8;
    Topology topology;
    SplitEfficiency split_eff;

    void validate() const;
    double tile_flops(const ProblemSpec& problem, const TileShape& tile) const;
    double tile_time_us(const ProblemSpec& problem, const TileShape& tile) const;
    double inter_node_bw() const {
        return inter_node_bw_bytes_per_us > 0 ? inter_node_bw_bytes_per_us : link_bw_bytes_per_us;
    }
};

enum class EventKind { TileCompute, Transfer, KernelLaunch, Wait, Reduce };

std::string to_string(EventKind k);

struct SimEvent {
    EventKind kind;
    int rank;
    int lane;  // slot or transfer-agent index
    double start_us;
    double end_us;
    std::string name;
};

struct Timeline {
    std::vector<SimEvent> events;
    double overall_us() const;
};

struct SimOptions {
    int medium_partitions = 0;  // 0 -> tp
    WriteMode write_mode = WriteMode::FusedReduce;
    int shift_offset = 1;
    bool ring_forwarding = true;  // simulator flavor of PCIe intra-NUMA rings
};

// Deterministic cost model for one strategy run; identical inputs yield
// identical timelines.
Timeline simulate(Strategy strategy, const ProblemSpec& problem, const TileShape& tile,
                  const MachineModel& machine, SwizzleKind swizzle, int rows_per_comm_tile,
                  TransferMode transfer, const SimOptions& opts = {});

// Launch overhead plus the tile-stream makespan of the unsplit per-rank GEMM.
double gemm_nonsplit_time(const ProblemSpec& problem, const TileShape& tile,
                          const MachineModel& machine);

struct Metrics {
    double overall_us = 0;
    double gemm_nonsplit_us = 0;
    double ect_us = 0;              // overall - best non-split GEMM time
    double overlap_efficiency = 0;  // 1 - ect / ect_baseline
};

Metrics metrics(const Timeline& timeline, const Timeline& baseline_timeline,
                const ProblemSpec& problem, const TileShape& tile, const MachineModel& machine);

void write_timeline_jsonl(const std::string& path, const Timeline& t);
void write_chrome_trace(const std::string& path, const Timeline& t);

std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& strategy, const ProblemSpec& problem,
                            const Metrics& m);

}  // namespace overlap
