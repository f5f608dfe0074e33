#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "overlap/sim.hpp"
#include "overlap/tune.hpp"

namespace overlap {

// One declarative run description shared by every CLI subcommand. Parsed from
// a JSON file; unknown keys anywhere in the tree are rejected.
struct RunConfig {
    ProblemSpec problem;
    TileShape tile{64, 64};
    std::vector<Strategy> strategies{Strategy::Coarse, Strategy::Medium, Strategy::Fine};
    MachineModel machine;
    KnobSpace knobs;
    bool knobs_given = false;  // false -> default_knob_space(problem)

    // Per-run knobs for verify/sweep.
    SwizzleKind swizzle = SwizzleKind::RankShifted;
    TransferMode transfer = TransferMode::Pull;
    WriteMode write = WriteMode::FusedReduce;
    int rows_per_comm_tile = 0;  // 0 -> m/tp
    int medium_partitions = 0;   // 0 -> tp

    std::vector<int> sweep_m;  // empty -> single-problem sweep at problem.m
    int bench_warmup = 3;
    int bench_repetitions = 10;
    TuneObjective objective = TuneObjective::SimulatedTime;
    int tune_repetitions = 3;
    std::string cache_file;

    uint64_t seed = 42;
    std::string out_dir = ".";

    void validate() const;
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config_file(const std::string& path);
std::string serialize_run_config(const RunConfig& config);

}  // namespace overlap
