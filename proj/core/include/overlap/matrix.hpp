#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "overlap/errors.hpp"

namespace overlap {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double init = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, init) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    double* row_ptr(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const double* row_ptr(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Max relative error between two same-shaped matrices; denominator floored at 1
// so near-zero entries compare absolutely.
double max_rel_error(const Matrix& a, const Matrix& b);

bool approx_equal(const Matrix& a, const Matrix& b, double rel_tol);

bool bitwise_equal(const Matrix& a, const Matrix& b);

// Row-major CSV, 17 significant digits (round-trips doubles exactly).
void write_csv(const std::string& path, const Matrix& m);
Matrix read_csv(const std::string& path);

// Deterministic uniform(-1,1) fill independent of the standard library's
// distribution implementation (golden files must be stable across platforms).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double next_uniform() {  // in [-1, 1)
        return static_cast<double>(next_u64() >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    }

    // Uniform integer in [0, n)
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

private:
    uint64_t state_;
};

void fill_uniform(Matrix& m, Rng& rng);

}  // namespace overlap
