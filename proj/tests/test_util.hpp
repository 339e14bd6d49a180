#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "lasp/matrix.hpp"

namespace lasp::testing {

inline RealMatrix gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> dist(0.0, sd);
    RealMatrix m(rows, cols);
    for (double& x : m.flat()) x = dist(rng);
    return m;
}

inline double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.flat().size(); ++i) e = std::max(e, std::abs(a.flat()[i] - b.flat()[i]));
    return e;
}

inline double max_abs(const RealMatrix& a) {
    double m = 0.0;
    for (double x : a.flat()) m = std::max(m, std::abs(x));
    return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline std::vector<std::span<const double>> row_spans(const RealMatrix& m, const std::vector<std::size_t>& idx) {
    std::vector<std::span<const double>> out;
    for (auto i : idx) out.push_back(m.row(i));
    return out;
}

// Indices of the k largest values, descending, ties by ascending index.
template <typename T>
std::vector<std::size_t> sort_oracle(const std::vector<T>& scores, std::size_t k,
                                     const std::vector<unsigned char>& allowed = {}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (allowed.empty() || allowed[i]) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    if (idx.size() > k) idx.resize(k);
    return idx;
}

}  // namespace lasp::testing
