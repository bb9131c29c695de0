#pragma once

#include "cotflow/common.hpp"
#include "cotflow/ot.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cotflow::metrics {

struct Trajectory {
    Matrix points;  // T x d

    int length() const { return static_cast<int>(points.rows()); }
    int dim() const { return static_cast<int>(points.cols()); }
};

/// One evaluation run. Metric fields are optional so a record can carry just
/// what a given run computed.
struct MetricsRecord {
    std::string task;
    std::string coupling;
    std::string solver;
    long nfe = 0;
    std::uint64_t seed = 0;
    std::optional<double> w2_squared;
    std::optional<double> tv;
    std::optional<double> straightness;
    int n_samples = 0;
};

/// Squared 2-Wasserstein distance between equal-size empirical sets: exact
/// EMD on squared-Euclidean costs divided by the set size.
inline double w2_squared(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "w2_squared: sets must have equal size");
    require(a.cols() == b.cols(), "w2_squared: dimension mismatch");
    require(a.rows() >= 1, "w2_squared: empty sets");
    auto plan = ot::solve_assignment(ot::cost_matrix_unconditional(a, b));
    return plan.total_cost / static_cast<double>(a.rows());
}

namespace detail {

// Sequential sum, kept free of vectorized reductions so alignment costs are
// bitwise reproducible against plainly-written reference loops.
inline double sq_dist(const Matrix& a, int i, const Matrix& b, int j) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double d = a(i, k) - b(j, k);
        s += d * d;
    }
    return s;
}

// DP over monotone alignments with squared-Euclidean local costs
// (symmetric1 step pattern, no path-length normalization). Returns the
// accumulated cost; dtw() is its square root.
inline double dtw_accumulated(const Trajectory& a, const Trajectory& b) {
    require(a.length() >= 1 && b.length() >= 1, "dtw: empty trajectory");
    require(a.dim() == b.dim(), "dtw: dimension mismatch");
    const int n = a.length(), m = b.length();
    Matrix acc(n, m);
    auto local = [&](int i, int j) { return sq_dist(a.points, i, b.points, j); };
    acc(0, 0) = local(0, 0);
    for (int i = 1; i < n; ++i) acc(i, 0) = acc(i - 1, 0) + local(i, 0);
    for (int j = 1; j < m; ++j) acc(0, j) = acc(0, j - 1) + local(0, j);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < m; ++j)
            acc(i, j) = std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)}) + local(i, j);
    return acc(n - 1, m - 1);
}

// Optimal alignment path as (i, j) pairs, backtracked deterministically:
// diagonal preferred, then the up step, then the left step.
inline std::vector<std::pair<int, int>> dtw_path(const Trajectory& a, const Trajectory& b) {
    const int n = a.length(), m = b.length();
    Matrix acc(n, m);
    auto local = [&](int i, int j) { return sq_dist(a.points, i, b.points, j); };
    acc(0, 0) = local(0, 0);
    for (int i = 1; i < n; ++i) acc(i, 0) = acc(i - 1, 0) + local(i, 0);
    for (int j = 1; j < m; ++j) acc(0, j) = acc(0, j - 1) + local(0, j);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < m; ++j)
            acc(i, j) = std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)}) + local(i, j);

    std::vector<std::pair<int, int>> path;
    int i = n - 1, j = m - 1;
    path.emplace_back(i, j);
    while (i > 0 || j > 0) {
        if (i == 0) {
            --j;
        } else if (j == 0) {
            --i;
        } else {
            const double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
            if (diag <= up && diag <= left) {
                --i;
                --j;
            } else if (up <= left) {
                --i;
            } else {
                --j;
            }
        }
        path.emplace_back(i, j);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

inline Trajectory resample_to_length(const Trajectory& t, int length) {
    if (t.length() == length) return t;
    Trajectory out;
    out.points.resize(length, t.dim());
    if (t.length() == 1) {
        for (int i = 0; i < length; ++i) out.points.row(i) = t.points.row(0);
        return out;
    }
    for (int i = 0; i < length; ++i) {
        const double pos = static_cast<double>(i) * (t.length() - 1) / (length - 1);
        const int lo = std::min(static_cast<int>(pos), t.length() - 2);
        const double frac = pos - lo;
        out.points.row(i) = (1.0 - frac) * t.points.row(lo) + frac * t.points.row(lo + 1);
    }
    return out;
}

}  // namespace detail

/// DTW distance: square root of the minimal accumulated squared-Euclidean
/// local cost over monotone alignments.
inline double dtw(const Trajectory& a, const Trajectory& b) {
    return std::sqrt(detail::dtw_accumulated(a, b));
}

/// Squared DTW distance (the raw accumulated alignment cost).
inline double dtw_squared(const Trajectory& a, const Trajectory& b) {
    return detail::dtw_accumulated(a, b);
}

/// DTW barycenter averaging. Starts from the medoid (the set member with the
/// smallest sum of squared DTW distances to the others, resampled to
/// `length`), then iterates aligned-mean updates until the objective change
/// drops below 1e-8 or max_iter passes. The update is a
/// majorization-minimization step, so the objective never increases.
inline Trajectory dba_barycenter(const std::vector<Trajectory>& set, int length,
                                 int max_iter = 30, std::uint64_t seed = 0) {
    (void)seed;  // medoid init keeps the routine deterministic without randomness
    require(!set.empty(), "dba_barycenter: empty set");
    require(length >= 1, "dba_barycenter: length must be >= 1");
    const int n = static_cast<int>(set.size());

    int medoid = 0;
    if (n > 1) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) s += detail::dtw_accumulated(set[i], set[j]);
            if (s < best) {
                best = s;
                medoid = i;
            }
        }
    }
    Trajectory bary = detail::resample_to_length(set[medoid], length);

    auto objective = [&](const Trajectory& mu) {
        double s = 0.0;
        for (const auto& traj : set) s += detail::dtw_accumulated(traj, mu);
        return s;
    };

    double prev = objective(bary);
    for (int iter = 0; iter < max_iter; ++iter) {
        Matrix sums = Matrix::Zero(length, bary.dim());
        std::vector<int> counts(length, 0);
        for (const auto& traj : set) {
            for (auto [i, j] : detail::dtw_path(traj, bary)) {
                sums.row(j) += traj.points.row(i);
                ++counts[j];
            }
        }
        for (int j = 0; j < length; ++j)
            if (counts[j] > 0) bary.points.row(j) = sums.row(j) / counts[j];
        const double cur = objective(bary);
        if (prev - cur < 1e-8) {
            prev = cur;
            break;
        }
        prev = cur;
    }
    return bary;
}

/// Trajectory Variance: mean squared DTW distance from each trajectory to
/// the DBA barycenter of the set.
inline double trajectory_variance(const std::vector<Trajectory>& set) {
    require(!set.empty(), "trajectory_variance: empty set");
    const int length = set.front().length();
    Trajectory bary = dba_barycenter(set, length);
    double s = 0.0;
    for (const auto& traj : set) s += detail::dtw_accumulated(traj, bary);
    return s / static_cast<double>(set.size());
}

/// Rows of a flattened trajectory matrix (T x point_dim per row) as
/// Trajectory values.
inline std::vector<Trajectory> unflatten_trajectories(const Matrix& rows, int horizon) {
    require(horizon >= 1, "unflatten_trajectories: horizon must be >= 1");
    require(rows.cols() % horizon == 0,
            "unflatten_trajectories: row width not divisible by horizon");
    const int d = static_cast<int>(rows.cols()) / horizon;
    std::vector<Trajectory> out;
    out.reserve(rows.rows());
    for (int r = 0; r < rows.rows(); ++r) {
        Trajectory t;
        t.points.resize(horizon, d);
        for (int i = 0; i < horizon; ++i)
            for (int j = 0; j < d; ++j) t.points(i, j) = rows(r, i * d + j);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace cotflow::metrics
