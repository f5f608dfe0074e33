#include "overlap/oracle.hpp"

#include <cmath>

namespace overlap {

namespace {

// Triple-loop matmul, k summed in ascending order per element.
Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (int kk = 0; kk < a.cols(); ++kk) acc += a(i, kk) * b(kk, j);
            c(i, j) = acc;
        }
    return c;
}

void check_finite(const Matrix& m, const std::string& what) {
    for (double v : m.data())
        if (!std::isfinite(v)) throw ShapeError(what + " contains non-finite values");
}

}  // namespace

std::vector<Matrix> dense_oracle(const ProblemSpec& problem, const ShardedWorkspace& workspace) {
    workspace.validate(problem);
    for (int r = 0; r < problem.tp; ++r) {
        check_finite(workspace.rank(r).a_shard, "rank " + std::to_string(r) + " a_shard");
        check_finite(workspace.rank(r).b_shard, "rank " + std::to_string(r) + " b_shard");
    }

    std::vector<Matrix> out;
    out.reserve(problem.tp);
    const int rpr = problem.rows_per_rank();

    if (problem.pattern == Pattern::AllGatherGemm) {
        // Serial AllGather: rank r's shard lands in rows [r*m/tp, (r+1)*m/tp).
        Matrix gathered(problem.m, problem.k);
        for (int r = 0; r < problem.tp; ++r)
            for (int i = 0; i < rpr; ++i)
                for (int j = 0; j < problem.k; ++j)
                    gathered(r * rpr + i, j) = workspace.rank(r).a_shard(i, j);
        for (int r = 0; r < problem.tp; ++r) out.push_back(matmul(gathered, workspace.rank(r).b_shard));
    } else {
        // Serial reduce in rank order, then scatter row blocks by ownership.
        Matrix sum(problem.m, problem.n);
        for (int r = 0; r < problem.tp; ++r) {
            Matrix partial = matmul(workspace.rank(r).a_shard, workspace.rank(r).b_shard);
            for (size_t i = 0; i < sum.data().size(); ++i) sum.data()[i] += partial.data()[i];
        }
        for (int r = 0; r < problem.tp; ++r) {
            Matrix block(rpr, problem.n);
            for (int i = 0; i < rpr; ++i)
                for (int j = 0; j < problem.n; ++j) block(i, j) = sum(r * rpr + i, j);
            out.push_back(std::move(block));
        }
    }
    return out;
}

}  // namespace overlap
