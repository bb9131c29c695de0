#pragma once

#include "cotflow/common.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace cotflow::ot {

/// How the condition weight gamma is chosen when building conditional costs.
struct CostSpec {
    enum class Mode { Fixed, Auto };
    Mode mode = Mode::Auto;
    double gamma = 0.0;        // Fixed mode
    double multiplier = 10.0;  // Auto mode

    static CostSpec fixed(double g) {
        require(g >= 0, "CostSpec: fixed gamma must be >= 0");
        return {Mode::Fixed, g, 0.0};
    }
    static CostSpec auto_scaled(double multiplier = 10.0) {
        require(multiplier > 0, "CostSpec: auto multiplier must be > 0");
        return {Mode::Auto, 0.0, multiplier};
    }
};

struct CostMatrix {
    Matrix entries;  // n x n, finite, non-negative

    int n() const { return static_cast<int>(entries.rows()); }

    void validate() const {
        require(entries.rows() == entries.cols() && entries.rows() >= 1,
                "CostMatrix: matrix must be square and non-empty");
        if (!entries.allFinite()) throw ValueError("CostMatrix: non-finite entries");
        require(entries.minCoeff() >= 0, "CostMatrix: negative entries");
    }
};

/// Permutation pairing: row i of the source batch pairs with assignment[i]
/// of the target batch. A permutation is exactly a doubly stochastic coupling
/// with uniform marginals on equal-size batches.
struct CouplingPlan {
    std::vector<int> assignment;
    double total_cost = 0.0;
};

inline double cost_unconditional(const Vector& x0, const Vector& x1) {
    require(x0.size() == x1.size(), "cost_unconditional: dimension mismatch");
    return (x0 - x1).squaredNorm();
}

/// ||x0 - x1||^2 + gamma^2 ||c0 - c1||^2
inline double cost_conditional(const Vector& x0, const Vector& c0, const Vector& x1,
                               const Vector& c1, double gamma) {
    require(x0.size() == x1.size(), "cost_conditional: sample dimension mismatch");
    require(c0.size() == c1.size(), "cost_conditional: condition dimension mismatch");
    require(gamma >= 0, "cost_conditional: gamma must be >= 0");
    return (x0 - x1).squaredNorm() + gamma * gamma * (c0 - c1).squaredNorm();
}

/// Per-batch condition weight: multiplier * sum_i ||x0_i - x1_i||^2 over
/// sum_j ||c0_j - c1_j||^2, on index-aligned batches. Identical conditions
/// make the condition term vacuous, so a zero denominator yields gamma = 0.
inline double auto_gamma(const Matrix& x0, const Matrix& c0, const Matrix& x1, const Matrix& c1,
                         double multiplier) {
    require(x0.rows() >= 1, "auto_gamma: empty batch");
    require(x0.rows() == x1.rows() && c0.rows() == c1.rows() && x0.rows() == c0.rows(),
            "auto_gamma: batch sizes must match");
    require(x0.cols() == x1.cols() && c0.cols() == c1.cols(),
            "auto_gamma: dimension mismatch");
    const double sample_dist = (x0 - x1).rowwise().squaredNorm().sum();
    const double cond_dist = (c0 - c1).rowwise().squaredNorm().sum();
    if (cond_dist == 0.0) return 0.0;
    return multiplier * sample_dist / cond_dist;
}

inline CostMatrix cost_matrix_unconditional(const Matrix& x0, const Matrix& x1) {
    require(x0.rows() == x1.rows(), "cost_matrix: batch sizes must match");
    require(x0.cols() == x1.cols(), "cost_matrix: dimension mismatch");
    const int n = static_cast<int>(x0.rows());
    CostMatrix cm;
    cm.entries.resize(n, n);
    for (int i = 0; i < n; ++i)
        cm.entries.row(i) = (x1.rowwise() - x0.row(i)).rowwise().squaredNorm().transpose();
    return cm;
}

inline CostMatrix cost_matrix_conditional(const Matrix& x0, const Matrix& c0, const Matrix& x1,
                                          const Matrix& c1, double gamma) {
    require(gamma >= 0, "cost_matrix_conditional: gamma must be >= 0");
    CostMatrix cm = cost_matrix_unconditional(x0, x1);
    require(c0.rows() == x0.rows() && c1.rows() == x1.rows() && c0.cols() == c1.cols(),
            "cost_matrix_conditional: condition shape mismatch");
    const int n = cm.n();
    const double g2 = gamma * gamma;
    if (g2 == 0.0) return cm;
    for (int i = 0; i < n; ++i)
        cm.entries.row(i) +=
            g2 * (c1.rowwise() - c0.row(i)).rowwise().squaredNorm().transpose();
    return cm;
}

namespace detail {

// Row-major view of the cost matrix; the solver scans rows in the inner
// loop, which is stride-n access on Eigen's column-major storage.
struct RowMajorCost {
    std::vector<double> data;
    int n = 0;

    explicit RowMajorCost(const Matrix& a) : n(static_cast<int>(a.rows())) {
        data.resize(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) data[static_cast<std::size_t>(i) * n + j] = a(i, j);
    }

    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * n; }
    double operator()(int i, int j) const { return row(i)[j]; }
};

// Shortest-augmenting-path solver (Jonker-Volgenant style) with dual
// potentials. Returns row_of_col and potentials satisfying
// u[i] + v[j] <= a(i,j), tight on matched edges.
inline void jv_solve(const RowMajorCost& a, std::vector<int>& row_of_col,
                     std::vector<double>& u, std::vector<double>& v) {
    const int n = a.n;
    const double inf = std::numeric_limits<double>::infinity();
    u.assign(n + 1, 0.0);
    v.assign(n + 1, 0.0);
    std::vector<int> p(n + 1, n);  // p[j] = row matched to column j (n = none)
    std::vector<int> way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);
    for (int i = 0; i < n; ++i) {
        p[n] = i;
        int j0 = n;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            const double ui0 = u[i0];
            const double* arow = a.row(i0);
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double cur = arow[j] - ui0 - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != n);
    }
    row_of_col.assign(p.begin(), p.begin() + n);
}

// Lexicographically smallest perfect matching in the tight-edge graph.
// Complementary slackness makes perfect matchings on tight edges exactly the
// optimal assignments, so walking rows in order and fixing the smallest
// feasible column realizes the lexicographic tie-break without changing the
// optimal cost.
inline std::vector<int> lex_refine(const RowMajorCost& a, const std::vector<int>& row_of_col,
                                   const std::vector<double>& u, const std::vector<double>& v) {
    const int n = a.n;
    std::vector<int> match_row(n), match_col(n);
    for (int j = 0; j < n; ++j) {
        match_col[j] = row_of_col[j];
        match_row[row_of_col[j]] = j;
    }

    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double slack = a(i, j) - u[i] - v[j];
            const double tol = 1e-12 * std::max({1.0, std::abs(a(i, j)), std::abs(u[i]),
                                                 std::abs(v[j])});
            if (slack <= tol || match_row[i] == j) adj[i].push_back(j);
        }
    }

    std::vector<char> col_fixed(n, 0), row_fixed(n, 0), visited(n);
    // Kuhn-style augmenting search over unfixed rows/columns.
    auto augment = [&](auto&& self, int row) -> bool {
        for (int j : adj[row]) {
            if (col_fixed[j] || visited[j]) continue;
            visited[j] = 1;
            if (match_col[j] < 0 || self(self, match_col[j])) {
                match_col[j] = row;
                match_row[row] = j;
                return true;
            }
        }
        return false;
    };

    std::vector<int> result(n, -1);
    for (int i = 0; i < n; ++i) {
        for (int j : adj[i]) {
            if (col_fixed[j]) continue;
            if (match_row[i] == j) {
                result[i] = j;
                break;
            }
            // Try to force edge (i, j): free j's current row and re-augment it
            // while excluding column j and everything already fixed.
            const int displaced = match_col[j];
            const int old_j = match_row[i];
            match_col[j] = i;
            match_row[i] = j;
            match_col[old_j] = -1;
            std::fill(visited.begin(), visited.end(), 0);
            visited[j] = 1;
            if (displaced == i || augment(augment, displaced)) {
                result[i] = j;
                break;
            }
            // Revert.
            match_col[j] = displaced;
            match_row[i] = old_j;
            match_col[old_j] = i;
        }
        row_fixed[i] = 1;
        col_fixed[result[i]] = 1;
    }
    return result;
}

}  // namespace detail

/// Exact minimum-cost assignment. Ties between optimal permutations are
/// broken to the lexicographically smallest assignment vector.
inline CouplingPlan solve_assignment(const CostMatrix& cost) {
    cost.validate();
    const int n = cost.n();
    detail::RowMajorCost a(cost.entries);
    std::vector<int> row_of_col;
    std::vector<double> u, v;
    detail::jv_solve(a, row_of_col, u, v);
    CouplingPlan plan;
    plan.assignment = detail::lex_refine(a, row_of_col, u, v);
    for (int i = 0; i < n; ++i) {
        require(plan.assignment[i] >= 0, "solve_assignment: refinement failed");
        plan.total_cost += cost.entries(i, plan.assignment[i]);
    }
    return plan;
}

}  // namespace cotflow::ot
