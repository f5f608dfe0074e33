#include "overlap/matrix.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace overlap {

double max_rel_error(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_rel_error: shape mismatch [" + std::to_string(a.rows()) + "," +
                         std::to_string(a.cols()) + "] vs [" + std::to_string(b.rows()) + "," +
                         std::to_string(b.cols()) + "]");
    }
    double worst = 0.0;
    const auto& da = a.data();
    const auto& db = b.data();
    for (size_t i = 0; i < da.size(); ++i) {
        double denom = std::max(1.0, std::max(std::fabs(da[i]), std::fabs(db[i])));
        worst = std::max(worst, std::fabs(da[i] - db[i]) / denom);
    }
    return worst;
}

bool approx_equal(const Matrix& a, const Matrix& b, double rel_tol) {
    return a.same_shape(b) && max_rel_error(a, b) <= rel_tol;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

void write_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[64];
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
            out << buf;
            if (c + 1 < m.cols()) out << ',';
        }
        out << '\n';
    }
}

Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return {};
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw std::runtime_error("ragged CSV row in " + path);
        for (size_t c = 0; c < rows[r].size(); ++c) m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
    return m;
}

void fill_uniform(Matrix& m, Rng& rng) {
    for (double& v : m.data()) v = rng.next_uniform();
}

}  // namespace overlap
