#pragma once

#include "cotflow/common.hpp"
#include "cotflow/rng.hpp"

#include <cstdint>
#include <map>
#include <numbers>
#include <string>

namespace cotflow::tasks {

/// Samples x1 with their raw conditions o, plus the generation parameters
/// needed to regenerate the set bit-exactly.
struct ConditionedDataset {
    Matrix samples;     // n x d
    Matrix conditions;  // n x q
    std::string name;
    std::map<std::string, double> metadata;
    int horizon = 0;  // > 0 for trajectory datasets; rows are flattened T x point_dim
};

/// Noise distribution p0 integrated from at t = 0.
struct Prior {
    enum class Kind { StandardGaussian, EightGaussians };
    Kind kind = Kind::StandardGaussian;
    int dim = 1;
    double ring_radius = 8.0;
    double component_sigma = 0.5;

    Matrix sample(Rng& rng, int n) const {
        require(n >= 1, "Prior::sample: n must be >= 1");
        if (kind == Kind::StandardGaussian) return rng.gaussian_matrix(n, dim);
        Matrix out(n, 2);
        for (int i = 0; i < n; ++i) {
            const int k = rng.below(8);
            const double angle = 2.0 * std::numbers::pi * k / 8.0;
            out(i, 0) = ring_radius * std::cos(angle) + component_sigma * rng.gaussian();
            out(i, 1) = ring_radius * std::sin(angle) + component_sigma * rng.gaussian();
        }
        return out;
    }
};

/// Two interleaved half-circles (radius 1, vertical offset 0.5), Gaussian
/// jitter, then a global scale of 3. Condition 0 labels the upper moon and
/// 1 the lower; labels are assigned alternately so counts stay balanced.
inline ConditionedDataset gen_moons(int n, std::uint64_t seed, double noise = 0.05,
                                    double scale = 3.0) {
    require(n >= 2, "gen_moons: n must be >= 2");
    Rng rng(seed);
    ConditionedDataset ds;
    ds.name = "moons";
    ds.metadata = {{"seed", static_cast<double>(seed)}, {"noise", noise}, {"scale", scale}};
    ds.samples.resize(n, 2);
    ds.conditions.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        const double theta = rng.uniform() * std::numbers::pi;
        double x, y;
        if (label == 0) {
            x = std::cos(theta);
            y = std::sin(theta);
        } else {
            x = 1.0 - std::cos(theta);
            y = 0.5 - std::sin(theta);
        }
        x += noise * rng.gaussian();
        y += noise * rng.gaussian();
        ds.samples(i, 0) = scale * x;
        ds.samples(i, 1) = scale * y;
        ds.conditions(i, 0) = static_cast<double>(label);
    }
    return ds;
}

inline Prior moons_prior() {
    Prior p;
    p.kind = Prior::Kind::EightGaussians;
    p.dim = 2;
    return p;
}

/// 1-D conditional fork: x ~ U(-2, 2); y = 0 when x <= 0, else y = +x or -x
/// with equal probability. The sample is y, the condition is x.
inline ConditionedDataset gen_fork(int n, std::uint64_t seed) {
    require(n >= 1, "gen_fork: n must be >= 1");
    Rng rng(seed);
    ConditionedDataset ds;
    ds.name = "fork";
    ds.metadata = {{"seed", static_cast<double>(seed)}, {"x_range", 2.0}};
    ds.samples.resize(n, 1);
    ds.conditions.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(-2.0, 2.0);
        const double coin = rng.uniform();  // consumed for every row
        double y = 0.0;
        if (x > 0.0) y = coin < 0.5 ? x : -x;
        ds.samples(i, 0) = y;
        ds.conditions(i, 0) = x;
    }
    return ds;
}

inline Prior fork_prior() {
    Prior p;
    p.kind = Prior::Kind::StandardGaussian;
    p.dim = 1;
    return p;
}

/// Two-mode 2-D trajectories from the origin to (1, +1) or (1, -1) along
/// straight lines, jittered per waypoint except the start. The condition is
/// the (constant) start position, so the two modes cannot be separated by
/// conditioning. Rows are flattened T x 2 point lists.
inline ConditionedDataset gen_traj_fork(int n, int horizon, std::uint64_t seed,
                                        double jitter = 0.02) {
    require(n >= 2, "gen_traj_fork: n must be >= 2");
    require(horizon >= 2, "gen_traj_fork: horizon must be >= 2");
    Rng rng(seed);
    ConditionedDataset ds;
    ds.name = "traj-fork";
    ds.horizon = horizon;
    ds.metadata = {{"seed", static_cast<double>(seed)},
                   {"horizon", static_cast<double>(horizon)},
                   {"jitter", jitter}};
    ds.samples.resize(n, 2 * horizon);
    ds.conditions = Matrix::Zero(n, 2);
    for (int i = 0; i < n; ++i) {
        const double mode = rng.uniform() < 0.5 ? 1.0 : -1.0;
        ds.samples(i, 0) = 0.0;
        ds.samples(i, 1) = 0.0;
        for (int tstep = 1; tstep < horizon; ++tstep) {
            const double frac = static_cast<double>(tstep) / (horizon - 1);
            ds.samples(i, 2 * tstep) = frac + jitter * rng.gaussian();
            ds.samples(i, 2 * tstep + 1) = mode * frac + jitter * rng.gaussian();
        }
    }
    return ds;
}

inline Prior traj_fork_prior(int horizon) {
    Prior p;
    p.kind = Prior::Kind::StandardGaussian;
    p.dim = 2 * horizon;
    return p;
}

/// Named task description resolvable to a dataset + prior.
struct TaskSpec {
    std::string name = "fork";  // moons | fork | traj-fork
    int n = 10000;
    std::uint64_t seed = 0;
    double noise = 0.05;  // moons jitter / traj-fork jitter
    int horizon = 8;      // traj-fork only

    void validate() const {
        require(name == "moons" || name == "fork" || name == "traj-fork",
                "unknown task: " + name);
        require(n >= 2, "task: n must be >= 2");
    }
};

inline ConditionedDataset make_dataset(const TaskSpec& t) {
    t.validate();
    if (t.name == "moons") return gen_moons(t.n, t.seed, t.noise);
    if (t.name == "fork") return gen_fork(t.n, t.seed);
    return gen_traj_fork(t.n, t.horizon, t.seed, t.noise);
}

inline ConditionedDataset make_dataset(const TaskSpec& t, std::uint64_t seed_override) {
    TaskSpec copy = t;
    copy.seed = seed_override;
    return make_dataset(copy);
}

inline Prior task_prior(const TaskSpec& t) {
    t.validate();
    if (t.name == "moons") return moons_prior();
    if (t.name == "fork") return fork_prior();
    return traj_fork_prior(t.horizon);
}

/// Default cluster count for the condition discretizer.
inline int default_clusters(const std::string& task_name) {
    if (task_name == "moons" || task_name == "fork") return 2;
    return 64;
}

}  // namespace cotflow::tasks
