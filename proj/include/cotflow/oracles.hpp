#pragma once

// Brute-force reference implementations for tests. These share no code with
// the modules they check: plain loops over std containers only.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cotflow::oracles {

struct BruteAssignment {
    std::vector<int> perm;
    double cost = 0.0;
};

/// Exact minimum over all N! permutations (N <= 8), lexicographic tie-break.
inline BruteAssignment brute_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    if (n == 0 || n > 8) throw std::invalid_argument("brute_assignment: need 1 <= N <= 8");
    for (const auto& row : cost)
        if (row.size() != n) throw std::invalid_argument("brute_assignment: non-square matrix");

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    BruteAssignment best;
    best.cost = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost[i][static_cast<std::size_t>(perm[i])];
        if (total < best.cost) {  // strict: keeps the lexicographically first minimizer
            best.cost = total;
            best.perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Minimum accumulated squared-Euclidean cost over every monotone alignment
/// path, enumerated recursively (T <= 4). Sums run in path order so the value
/// is bitwise comparable with a DP that accumulates the same way.
inline double brute_dtw_squared(const std::vector<std::vector<double>>& a,
                                const std::vector<std::vector<double>>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("brute_dtw: empty trajectory");
    if (a.size() > 4 || b.size() > 4) throw std::invalid_argument("brute_dtw: need T <= 4");
    const std::size_t dim = a[0].size();
    for (const auto& p : a)
        if (p.size() != dim) throw std::invalid_argument("brute_dtw: ragged trajectory");
    for (const auto& p : b)
        if (p.size() != dim) throw std::invalid_argument("brute_dtw: dimension mismatch");

    auto local = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double d = a[i][k] - b[j][k];
            s += d * d;
        }
        return s;
    };

    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i,
                                                                     std::size_t j,
                                                                     double acc) {
        acc += local(i, j);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
        if (i + 1 < a.size()) walk(i + 1, j, acc);
        if (j + 1 < b.size()) walk(i, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

inline double brute_dtw(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b) {
    return std::sqrt(brute_dtw_squared(a, b));
}

/// Central finite differences, coordinate by coordinate.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> theta, double h = 1e-4) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double fp = f(theta);
        theta[i] = orig - h;
        const double fm = f(theta);
        theta[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace cotflow::oracles
