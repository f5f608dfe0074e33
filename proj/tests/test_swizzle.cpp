#include <set>

#include "doctest.h"
#include "overlap/swizzle.hpp"

using namespace overlap;

namespace {

GridDims grid_of(int tile_rows, int tile_cols, int row_blocks) {
    GridDims g;
    g.tile_rows = tile_rows;
    g.tile_cols = tile_cols;
    g.row_blocks = row_blocks;
    return g;
}

std::vector<int> block_visit_order(const SwizzlePolicy& policy, const GridDims& grid) {
    std::vector<int> blocks;
    for (const TileCoord& c : tile_order(policy, grid)) {
        const int b = c.row / grid.tile_rows_per_block();
        if (blocks.empty() || blocks.back() != b) blocks.push_back(b);
    }
    return blocks;
}

}  // namespace

TEST_CASE("naive swizzle is the row-major identity") {
    SwizzlePolicy p{SwizzleKind::Naive, 0, 4, 1, {}};
    const GridDims g = grid_of(2, 2, 1);
    auto order = tile_order(p, g);
    REQUIRE(order.size() == 4);
    CHECK(order[0].row == 0);
    CHECK(order[0].col == 0);
    CHECK(order[1].row == 0);
    CHECK(order[1].col == 1);
    CHECK(order[2].row == 1);
    CHECK(order[2].col == 0);
    CHECK(order[3].row == 1);
    CHECK(order[3].col == 1);
}

TEST_CASE("rank-shifted block order for tp=4 rank=1 is 2,3,0,1") {
    SwizzlePolicy p{SwizzleKind::RankShifted, 1, 4, 1, {}};
    const GridDims g = grid_of(8, 3, 4);
    CHECK(block_visit_order(p, g) == std::vector<int>{2, 3, 0, 1});
}

TEST_CASE("arrival-aligned order for tp=8 rank=5 under the ring is 5,6,7,0,1,2,3,4") {
    Topology topo;  // NVLink ring
    auto order = comm_order(topo, 5, 8, 4, 4);
    SwizzlePolicy p = arrival_aligned_policy(5, 8, order, 4);
    const GridDims g = grid_of(16, 2, 8);
    CHECK(block_visit_order(p, g) == std::vector<int>{5, 6, 7, 0, 1, 2, 3, 4});
}

TEST_CASE("map_tile rejects out-of-range indices") {
    SwizzlePolicy p{SwizzleKind::Naive, 0, 1, 1, {}};
    const GridDims g = grid_of(2, 2, 1);
    CHECK_THROWS_AS(map_tile(p, 4, g), BoundsError);
    CHECK_THROWS_AS(map_tile(p, -1, g), BoundsError);
}

TEST_CASE("every policy is a bijection on grids up to 64x64") {
    Topology topo;
    for (int tp : {2, 4, 8}) {
        for (int rank = 0; rank < tp; ++rank) {
            for (auto [tr, tc] : std::vector<std::pair<int, int>>{
                     {tp, 1}, {2 * tp, 3}, {4 * tp, 7}, {64, 64}, {64, 5}}) {
                if (tr % tp != 0 || tr > 64) continue;
                const GridDims g = grid_of(tr, tc, tp);
                std::vector<SwizzlePolicy> policies = {
                    {SwizzleKind::Naive, rank, tp, 1, {}},
                    {SwizzleKind::RankShifted, rank, tp, 1, {}},
                    {SwizzleKind::RankShifted, rank, tp, 3, {}},
                    arrival_aligned_policy(rank, tp, comm_order(topo, rank, tp, 8, 8), 8)};
                for (const SwizzlePolicy& p : policies) {
                    std::set<std::pair<int, int>> seen;
                    for (int i = 0; i < g.tiles(); ++i) {
                        const TileCoord c = map_tile(p, i, g);
                        REQUIRE(c.row >= 0);
                        REQUIRE(c.row < g.tile_rows);
                        REQUIRE(c.col >= 0);
                        REQUIRE(c.col < g.tile_cols);
                        REQUIRE(seen.insert({c.row, c.col}).second);
                    }
                    REQUIRE(static_cast<int>(seen.size()) == g.tiles());
                }
            }
        }
    }
}

TEST_CASE("rank-shifted destinations are pairwise distinct at equal step") {
    for (int tp : {2, 4, 8}) {
        const GridDims g = grid_of(2 * tp, 3, tp);
        std::vector<std::vector<TileCoord>> orders(tp);
        for (int r = 0; r < tp; ++r)
            orders[r] = tile_order({SwizzleKind::RankShifted, r, tp, 1, {}}, g);
        for (int step = 0; step < g.tiles(); ++step) {
            std::set<int> dests;
            for (int r = 0; r < tp; ++r)
                dests.insert(orders[r][step].row / g.tile_rows_per_block());
            CHECK(static_cast<int>(dests.size()) == tp);
        }
    }
}

TEST_CASE("comm_order ring examples") {
    Topology topo;
    SUBCASE("tp=8 rank=5 visits peers 6,7,0,1,2,3,4") {
        auto order = comm_order(topo, 5, 8, 4, 4);
        CHECK(peer_order(order, 5, 4) == std::vector<int>{6, 7, 0, 1, 2, 3, 4});
    }
    SUBCASE("tp=2 rank=0 has the single peer 1") {
        auto order = comm_order(topo, 0, 2, 4, 4);
        CHECK(peer_order(order, 0, 4) == std::vector<int>{1});
        CHECK(order.size() == 1);
    }
    SUBCASE("rank out of range rejected") {
        CHECK_THROWS_AS(comm_order(topo, 8, 8, 4, 4), ConfigError);
    }
}

TEST_CASE("pcie-numa order puts inter-NUMA descriptors first") {
    Topology topo;
    topo.kind = TopologyKind::PcieNuma;
    topo.ranks_per_numa = 4;
    auto order = comm_order(topo, 0, 8, 4, 4);
    // Rank 0 lives in NUMA group {0..3}; descriptors for 4..7 must all precede
    // descriptors for 1..3.
    bool seen_intra = false;
    for (const TransferDesc& d : order) {
        const bool inter = d.peer >= 4;
        if (!inter) seen_intra = true;
        if (inter) CHECK_FALSE(seen_intra);
    }
    CHECK(peer_order(order, 0, 4).size() == 7);
}

TEST_CASE("pcie ring forwarding chains are gated on the neighbor's receive") {
    Topology topo;
    topo.kind = TopologyKind::PcieNuma;
    topo.ranks_per_numa = 4;
    auto order = comm_order(topo, 0, 8, 4, 4, /*ring_forwarding=*/true);
    std::set<int> covered;
    int forwards = 0;
    for (const TransferDesc& d : order) {
        covered.insert(d.row_begin / 4);
        if (d.link == LinkClass::Forward) {
            ++forwards;
            REQUIRE(d.dep_rank >= 0);
            REQUIRE(d.dep_index >= 0);
            auto dep_order = comm_order(topo, d.dep_rank, 8, 4, 4, true);
            REQUIRE(d.dep_index < static_cast<int>(dep_order.size()));
            // The gating transfer delivers exactly the rows being forwarded.
            CHECK(dep_order[d.dep_index].row_begin == d.row_begin);
        }
    }
    CHECK(forwards > 0);
    CHECK(covered.size() == 7);  // all non-local row blocks covered
}

TEST_CASE("multi-node forwarding is gated on the node-mate's inter-node receive") {
    Topology topo;
    topo.kind = TopologyKind::MultiNode;
    topo.ranks_per_node = 4;
    for (int rank = 0; rank < 8; ++rank) {
        auto order = comm_order(topo, rank, 8, 4, 4);
        std::set<int> covered;
        for (const TransferDesc& d : order) {
            covered.insert(d.row_begin / 4);
            if (d.link == LinkClass::Forward) {
                REQUIRE(d.dep_rank >= 0);
                // The gate lives on a node-mate of this rank.
                CHECK(d.dep_rank / 4 == rank / 4);
                auto mate = comm_order(topo, d.dep_rank, 8, 4, 4);
                REQUIRE(d.dep_index < static_cast<int>(mate.size()));
                CHECK(mate[d.dep_index].link == LinkClass::InterNode);
                CHECK(mate[d.dep_index].row_begin == d.row_begin);
            }
        }
        CHECK(covered.size() == 7);
    }
}

TEST_CASE("arrival order and tile visit order agree for arrival-aligned policies") {
    Topology topo;
    for (int tp : {2, 4, 8}) {
        for (int rank = 0; rank < tp; ++rank) {
            auto order = comm_order(topo, rank, tp, 8, 4);
            SwizzlePolicy p = arrival_aligned_policy(rank, tp, order, 8);
            const GridDims g = grid_of(2 * tp, 3, tp);
            std::vector<int> expected{rank};
            for (int peer : peer_order(order, rank, 8)) expected.push_back(peer);
            CHECK(block_visit_order(p, g) == expected);
        }
    }
}
