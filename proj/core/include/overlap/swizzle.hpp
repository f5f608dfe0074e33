#pragma once

#include <vector>

#include "overlap/problem.hpp"
#include "overlap/topology.hpp"

namespace overlap {

enum class SwizzleKind { Naive, RankShifted, ArrivalAligned };

std::string to_string(SwizzleKind k);
SwizzleKind swizzle_kind_from_string(const std::string& s);

// Thread-block index -> tile coordinate mapping policy. Every kind is a
// bijection on the tile grid.
struct SwizzlePolicy {
    SwizzleKind kind = SwizzleKind::Naive;
    int rank = 0;
    int tp = 1;
    // RankShifted starts at block (rank + shift_offset) mod tp; the offset is a
    // tunable, default puts the local block last.
    int shift_offset = 1;
    // ArrivalAligned: row-block visit order (local block first, then blocks in
    // signal-arrival order). Empty means ring order.
    std::vector<int> arrival_blocks;
};

// Builds the ArrivalAligned policy whose block order matches the given host
// transfer order.
SwizzlePolicy arrival_aligned_policy(int rank, int tp, const std::vector<TransferDesc>& order,
                                     int rows_per_rank);

TileCoord map_tile(const SwizzlePolicy& policy, int flat_index, const GridDims& grid);

// Full visit order (map_tile over all flat indices).
std::vector<TileCoord> tile_order(const SwizzlePolicy& policy, const GridDims& grid);

}  // namespace overlap
