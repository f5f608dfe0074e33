#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "overlap/engine.hpp"
#include "overlap/sim.hpp"

namespace overlap {

enum class TuneObjective { EngineWallClock, SimulatedTime };

std::string to_string(TuneObjective o);
TuneObjective tune_objective_from_string(const std::string& s);

// Successive halving from the chunk size (m/tp) down to the GEMM tile rows.
std::vector<int> comm_tile_sizes(int rows_per_rank, int tm);

struct KnobSpace {
    std::vector<TransferMode> transfer_modes;
    std::vector<SwizzleKind> swizzle_policies;
    std::vector<TileShape> gemm_tile_shapes;
    std::vector<WriteMode> write_modes;
    // Derived per tile shape via comm_tile_sizes() unless overridden.
    std::vector<int> comm_tile_override;
};

KnobSpace default_knob_space(const ProblemSpec& problem);

struct TuneConfig {
    TileShape tile;
    SwizzleKind swizzle = SwizzleKind::Naive;
    int rows_per_comm_tile = 0;
    TransferMode transfer = TransferMode::Pull;
    WriteMode write = WriteMode::FusedReduce;

    std::string encode() const;  // canonical string; ties break on this
};

std::vector<TuneConfig> enumerate_knobs(const ProblemSpec& problem, const KnobSpace& knobs);

struct TuneEntry {
    TuneConfig config;
    double objective_us = 0;
    int repetitions = 1;
    double dispersion = 0;  // (max - min) / median
    bool noisy = false;     // dispersion > 20%
};

struct TuneResult {
    TuneConfig best_config;
    double objective_us = 0;
    std::vector<TuneEntry> table;
    bool from_cache = false;
    std::string cache_key;
};

// Evaluates every config in the grid. Each config's engine output is checked
// against the dense oracle before any timing counts; a failing config aborts
// the whole tuning run naming the config. EngineWallClock uses the median of
// `repetitions` timed runs (>= 3 required); SimulatedTime is exact and
// bit-reproducible. Optional cache_path skips re-tuning when the
// (problem, machine, knob-space) key matches.
TuneResult tune(const ProblemSpec& problem, ShardedWorkspace& workspace,
                const MachineModel& machine, const KnobSpace& knobs, TuneObjective objective,
                int repetitions, const std::string& cache_path = "");

void write_tune_csv(const std::string& path, const TuneResult& result);
void write_tune_json(const std::string& path, const TuneResult& result);

}  // namespace overlap
