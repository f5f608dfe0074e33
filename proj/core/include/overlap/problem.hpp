#pragma once

#include <string>
#include <vector>

#include "overlap/errors.hpp"

namespace overlap {

enum class Pattern { AllGatherGemm, GemmReduceScatter };

std::string to_string(Pattern p);
Pattern pattern_from_string(const std::string& s);

// Global GEMM shape plus the tensor-parallel layout.
//
// AllGatherGemm:     per-rank A shard [m/tp, k], resident B shard [k, n/tp],
//                    gathered A [m, k], per-rank output [m, n/tp].
// GemmReduceScatter: per-rank A shard [m, k/tp], resident B shard [k/tp, n],
//                    per-rank partial [m, n], rank r owns output rows
//                    [r*m/tp, (r+1)*m/tp).
struct ProblemSpec {
    int m = 0;
    int n = 0;
    int k = 0;
    int tp = 1;
    Pattern pattern = Pattern::AllGatherGemm;

    void validate() const;

    int rows_per_rank() const { return m / tp; }
    // Columns of the per-rank GEMM output.
    int local_cols() const { return pattern == Pattern::AllGatherGemm ? n / tp : n; }
    // Reduction extent of the per-rank GEMM.
    int local_k() const { return pattern == Pattern::GemmReduceScatter ? k / tp : k; }
    // Rank owning global output row `row`.
    int owner_of_row(int row) const { return row / rows_per_rank(); }
};

struct TileShape {
    int tm = 0;
    int tn = 0;
};

struct TileCoord {
    int row = 0;
    int col = 0;
    bool operator==(const TileCoord&) const = default;
};

struct GridDims {
    int tile_rows = 0;   // m / tm
    int tile_cols = 0;   // local_cols / tn
    int row_blocks = 0;  // tp ownership blocks along the row dimension
    int tiles() const { return tile_rows * tile_cols; }
    int tile_rows_per_block() const { return tile_rows / row_blocks; }
};

// Checks the divisibility preconditions (padding is rejected, never applied).
void validate_tiling(const ProblemSpec& problem, const TileShape& tile);

GridDims grid_for(const ProblemSpec& problem, const TileShape& tile);

// Row-major enumeration of all output tiles of the per-rank GEMM.
std::vector<TileCoord> tile_grid(const ProblemSpec& problem, const TileShape& tile);

}  // namespace overlap
