#pragma once

#include "cotflow/common.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

namespace cotflow {

// Deterministic random source. All distributions are derived from the raw
// mt19937_64 stream by fixed formulas (no std::*_distribution), so a seed
// pins the exact value sequence independent of the standard library build.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in {0, ..., n-1}.
    int below(int n) {
        require(n >= 1, "Rng::below: n must be >= 1");
        int k = static_cast<int>(uniform() * n);
        return k < n ? k : n - 1;
    }

    /// Standard normal via Box-Muller. Always consumes exactly two uniforms.
    double gaussian() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// n x d matrix of independent standard normals, filled row by row.
    Matrix gaussian_matrix(Eigen::Index n, Eigen::Index d) {
        Matrix m(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j) m(i, j) = gaussian();
        return m;
    }

    /// Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        for (int i = 0; i < n; ++i) p[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(p[i], p[static_cast<int>(below(i + 1))]);
        return p;
    }

    std::string state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (is.fail()) throw IoError("Rng::set_state: malformed engine state");
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace cotflow
