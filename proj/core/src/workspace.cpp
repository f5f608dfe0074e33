#include "overlap/workspace.hpp"

namespace overlap {

ShardedWorkspace ShardedWorkspace::make_random(const ProblemSpec& problem, uint64_t seed) {
    problem.validate();
    ShardedWorkspace ws;
    ws.ranks_.resize(problem.tp);
    for (int r = 0; r < problem.tp; ++r) {
        RankBuffers& rb = ws.ranks_[r];
        Rng rng(seed * 0x100000001b3ull + static_cast<uint64_t>(r) + 1);
        if (problem.pattern == Pattern::AllGatherGemm) {
            rb.a_shard = Matrix(problem.rows_per_rank(), problem.k);
            rb.b_shard = Matrix(problem.k, problem.local_cols());
            rb.a_agg = Matrix(problem.m, problem.k);
            rb.c_out = Matrix(problem.m, problem.local_cols());
        } else {
            rb.a_shard = Matrix(problem.m, problem.local_k());
            rb.b_shard = Matrix(problem.local_k(), problem.n);
            rb.c_out = Matrix(problem.rows_per_rank(), problem.n);
        }
        fill_uniform(rb.a_shard, rng);
        fill_uniform(rb.b_shard, rng);
    }
    ws.directory_.assign(problem.tp, {});
    for (int r = 0; r < problem.tp; ++r)
        for (int p = 0; p < problem.tp; ++p) ws.directory_[r].push_back(&ws.ranks_[p]);
    return ws;
}

void ShardedWorkspace::validate(const ProblemSpec& problem) const {
    problem.validate();
    if (num_ranks() != problem.tp)
        throw ShapeError("workspace has " + std::to_string(num_ranks()) + " ranks, problem tp=" +
                         std::to_string(problem.tp));
    auto check = [](const Matrix& m, int rows, int cols, const std::string& what) {
        if (m.rows() != rows || m.cols() != cols)
            throw ShapeError(what + " shape [" + std::to_string(m.rows()) + "," +
                             std::to_string(m.cols()) + "] expected [" + std::to_string(rows) + "," +
                             std::to_string(cols) + "]");
    };
    for (int r = 0; r < num_ranks(); ++r) {
        const RankBuffers& rb = ranks_[r];
        const std::string tag = "rank " + std::to_string(r) + " ";
        if (problem.pattern == Pattern::AllGatherGemm) {
            check(rb.a_shard, problem.rows_per_rank(), problem.k, tag + "a_shard");
            check(rb.b_shard, problem.k, problem.local_cols(), tag + "b_shard");
            check(rb.a_agg, problem.m, problem.k, tag + "a_agg");
        } else {
            check(rb.a_shard, problem.m, problem.local_k(), tag + "a_shard");
            check(rb.b_shard, problem.local_k(), problem.n, tag + "b_shard");
        }
    }
}

RankBuffers& ShardedWorkspace::peer(int from_rank, int peer_rank) {
    if (from_rank < 0 || from_rank >= num_ranks() || peer_rank < 0 || peer_rank >= num_ranks())
        throw DirectoryError("directory lookup out of range: rank " + std::to_string(from_rank) +
                             " -> peer " + std::to_string(peer_rank));
    RankBuffers* p = directory_[from_rank][peer_rank];
    if (p == nullptr)
        throw DirectoryError("missing peer buffer: rank " + std::to_string(from_rank) +
                             " has no directory entry for peer " + std::to_string(peer_rank));
    return *p;
}

void ShardedWorkspace::drop_directory_entry(int from_rank, int peer_rank) {
    directory_[from_rank][peer_rank] = nullptr;
}

void ShardedWorkspace::clear_outputs() {
    for (RankBuffers& rb : ranks_) {
        rb.c_out.fill(0.0);
        if (!rb.a_agg.empty()) rb.a_agg.fill(0.0);
        rb.staging.clear();
    }
}

}  // namespace overlap
