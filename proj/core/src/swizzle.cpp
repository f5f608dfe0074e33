#include "overlap/swizzle.hpp"

#include <algorithm>

namespace overlap {

std::string to_string(SwizzleKind k) {
    switch (k) {
        case SwizzleKind::Naive: return "Naive";
        case SwizzleKind::RankShifted: return "RankShifted";
        case SwizzleKind::ArrivalAligned: return "ArrivalAligned";
    }
    return "?";
}

SwizzleKind swizzle_kind_from_string(const std::string& s) {
    if (s == "Naive") return SwizzleKind::Naive;
    if (s == "RankShifted") return SwizzleKind::RankShifted;
    if (s == "ArrivalAligned") return SwizzleKind::ArrivalAligned;
    throw ConfigError("unknown swizzle kind: '" + s + "'");
}

SwizzlePolicy arrival_aligned_policy(int rank, int tp, const std::vector<TransferDesc>& order,
                                     int rows_per_rank) {
    SwizzlePolicy p{SwizzleKind::ArrivalAligned, rank, tp, 1, {}};
    p.arrival_blocks.push_back(rank);  // local block is preset, visit first
    for (int b : peer_order(order, rank, rows_per_rank)) p.arrival_blocks.push_back(b);
    return p;
}

namespace {

// Block visit order for the policy.
std::vector<int> block_order(const SwizzlePolicy& policy) {
    std::vector<int> blocks;
    blocks.reserve(policy.tp);
    if (policy.kind == SwizzleKind::ArrivalAligned && !policy.arrival_blocks.empty()) {
        blocks = policy.arrival_blocks;
    } else if (policy.kind == SwizzleKind::ArrivalAligned) {
        blocks.push_back(policy.rank);
        for (int d = 1; d < policy.tp; ++d) blocks.push_back((policy.rank + d) % policy.tp);
    } else {  // RankShifted
        for (int d = 0; d < policy.tp; ++d)
            blocks.push_back(((policy.rank + policy.shift_offset) % policy.tp + d) % policy.tp);
    }
    return blocks;
}

}  // namespace

TileCoord map_tile(const SwizzlePolicy& policy, int flat_index, const GridDims& grid) {
    if (flat_index < 0 || flat_index >= grid.tiles())
        throw BoundsError("tile index " + std::to_string(flat_index) + " out of range [0," +
                          std::to_string(grid.tiles()) + ")");
    if (policy.kind == SwizzleKind::Naive) {
        return {flat_index / grid.tile_cols, flat_index % grid.tile_cols};
    }
    if (grid.row_blocks != policy.tp)
        throw ConfigError("grid row blocks != policy tp");
    const int rows_per_block = grid.tile_rows_per_block();
    const int per_block = rows_per_block * grid.tile_cols;
    const std::vector<int> blocks = block_order(policy);
    if (static_cast<int>(blocks.size()) != grid.row_blocks)
        throw ConfigError("arrival block list does not cover the grid (" +
                          std::to_string(blocks.size()) + " blocks for " +
                          std::to_string(grid.row_blocks) + ")");
    const int block = blocks[flat_index / per_block];
    const int within = flat_index % per_block;
    // Column-major within the block.
    const int col = within / rows_per_block;
    const int row_in_block = within % rows_per_block;
    return {block * rows_per_block + row_in_block, col};
}

std::vector<TileCoord> tile_order(const SwizzlePolicy& policy, const GridDims& grid) {
    std::vector<TileCoord> out;
    out.reserve(grid.tiles());
    for (int i = 0; i < grid.tiles(); ++i) out.push_back(map_tile(policy, i, grid));
    return out;
}

}  // namespace overlap
