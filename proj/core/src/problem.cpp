#include "overlap/problem.hpp"

namespace overlap {

std::string to_string(Pattern p) {
    return p == Pattern::AllGatherGemm ? "AllGatherGemm" : "GemmReduceScatter";
}

Pattern pattern_from_string(const std::string& s) {
    if (s == "AllGatherGemm") return Pattern::AllGatherGemm;
    if (s == "GemmReduceScatter") return Pattern::GemmReduceScatter;
    throw ConfigError("unknown pattern: '" + s + "' (expected AllGatherGemm or GemmReduceScatter)");
}

void ProblemSpec::validate() const {
    if (m <= 0 || n <= 0 || k <= 0) throw ConfigError("problem dimensions must be positive");
    if (tp <= 0) throw ConfigError("tp must be positive");
    if (m % tp != 0)
        throw ConfigError("m=" + std::to_string(m) + " not divisible by tp=" + std::to_string(tp));
    if (pattern == Pattern::AllGatherGemm && n % tp != 0)
        throw ConfigError("AllGatherGemm requires n divisible by tp (weight is column-sharded); n=" +
                          std::to_string(n) + " tp=" + std::to_string(tp));
    if (pattern == Pattern::GemmReduceScatter && k % tp != 0)
        throw ConfigError("GemmReduceScatter requires k divisible by tp (weight is row-sharded); k=" +
                          std::to_string(k) + " tp=" + std::to_string(tp));
}

void validate_tiling(const ProblemSpec& problem, const TileShape& tile) {
    problem.validate();
    if (tile.tm <= 0 || tile.tn <= 0) throw ConfigError("tile extents must be positive");
    const int rpr = problem.rows_per_rank();
    if (tile.tm > rpr || rpr % tile.tm != 0)
        throw ConfigError("tm=" + std::to_string(tile.tm) + " must divide m/tp=" + std::to_string(rpr));
    const int lc = problem.local_cols();
    if (lc % tile.tn != 0)
        throw ConfigError("tn=" + std::to_string(tile.tn) +
                          " must divide the local output cols=" + std::to_string(lc));
}

GridDims grid_for(const ProblemSpec& problem, const TileShape& tile) {
    validate_tiling(problem, tile);
    GridDims g;
    g.tile_rows = problem.m / tile.tm;
    g.tile_cols = problem.local_cols() / tile.tn;
    g.row_blocks = problem.tp;
    return g;
}

std::vector<TileCoord> tile_grid(const ProblemSpec& problem, const TileShape& tile) {
    const GridDims g = grid_for(problem, tile);
    std::vector<TileCoord> out;
    out.reserve(g.tiles());
    for (int r = 0; r < g.tile_rows; ++r)
        for (int c = 0; c < g.tile_cols; ++c) out.push_back({r, c});
    return out;
}

}  // namespace overlap
