#pragma once

#include <cstdint>
#include <vector>

#include "overlap/matrix.hpp"
#include "overlap/problem.hpp"

namespace overlap {

// Buffers held by one simulated rank.
struct RankBuffers {
    Matrix a_shard;                // AG: [m/tp, k]; RS: [m, k/tp]
    Matrix b_shard;                // AG: [k, n/tp]; RS: [k/tp, n]
    Matrix a_agg;                  // AG only: [m, k]
    Matrix c_out;                  // AG: [m, n/tp]; RS: [m/tp, n]
    std::vector<Matrix> staging;   // RS WriteAlltoAll: one [m/tp, n] plane per source rank
};

// Per-rank buffers plus the cross-rank buffer directory (the peer-to-peer
// analog, exchanged once at initialization).
class ShardedWorkspace {
public:
    static ShardedWorkspace make_random(const ProblemSpec& problem, uint64_t seed);

    // Shape-checks buffers against the problem.
    void validate(const ProblemSpec& problem) const;

    RankBuffers& rank(int r) { return ranks_[r]; }
    const RankBuffers& rank(int r) const { return ranks_[r]; }
    int num_ranks() const { return static_cast<int>(ranks_.size()); }

    // Peer handle lookup; throws DirectoryError on a dropped entry.
    RankBuffers& peer(int from_rank, int peer_rank);

    // Simulates an incomplete init-phase exchange (tests only).
    void drop_directory_entry(int from_rank, int peer_rank);

    void clear_outputs();

private:
    std::vector<RankBuffers> ranks_;
    std::vector<std::vector<RankBuffers*>> directory_;
};

}  // namespace overlap
