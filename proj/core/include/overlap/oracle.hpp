#pragma once

#include <vector>

#include "overlap/workspace.hpp"

namespace overlap {

// Ground truth for every strategy: gather all shards, run one dense GEMM per
// rank with a straightforward triple loop, and apply the pattern's collective
// semantics serially in rank order.
//
// AllGatherGemm:     rank r gets the full [m, n/tp] product of the gathered A
//                    against its resident B shard.
// GemmReduceScatter: rank r gets row block r of the rank-ordered sum of all
//                    per-rank partial products.
std::vector<Matrix> dense_oracle(const ProblemSpec& problem, const ShardedWorkspace& workspace);

}  // namespace overlap
