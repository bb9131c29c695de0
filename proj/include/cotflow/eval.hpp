#pragma once

#include "cotflow/flow.hpp"
#include "cotflow/metrics.hpp"
#include "cotflow/ode.hpp"
#include "cotflow/tasks.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace cotflow::eval {

/// A model rollout against a fresh draw from the task: targets and
/// conditions come from the task generator under `eval_seed`, the noise from
/// the task prior under a derived stream, and `generated` holds the
/// integrated samples for exactly those conditions.
struct Generation {
    tasks::ConditionedDataset target;
    Matrix generated;
    ode::SolverReport report;
};

inline Generation generate(const nn::FlowModel& model, const tasks::TaskSpec& task, int n,
                           std::uint64_t eval_seed, const ode::SolverConfig& solver) {
    tasks::TaskSpec eval_task = task;
    eval_task.n = n;
    eval_task.seed = eval_seed;
    Generation g;
    g.target = tasks::make_dataset(eval_task);
    Rng noise_rng(eval_seed * 0x9E3779B97F4A7C15ULL + 1);
    Matrix x0 = tasks::task_prior(eval_task).sample(noise_rng, n);
    auto field = flow::bound_field(model, g.target.conditions);
    g.report = ode::integrate(field, x0, solver);
    g.generated = g.report.samples;
    return g;
}

inline double w2_vs_target(const Generation& g) {
    return metrics::w2_squared(g.generated, g.target.samples);
}

/// Per-condition-label squared Wasserstein distances for tasks with a small
/// set of discrete labels (moons). Rows are selected by exact label match.
inline std::vector<std::pair<double, double>> per_label_w2(const Generation& g,
                                                           const std::vector<double>& labels) {
    std::vector<std::pair<double, double>> out;
    for (double label : labels) {
        std::vector<int> rows;
        for (int i = 0; i < g.target.conditions.rows(); ++i)
            if (g.target.conditions(i, 0) == label) rows.push_back(i);
        Matrix gen(rows.size(), g.generated.cols());
        Matrix tgt(rows.size(), g.target.samples.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            gen.row(static_cast<int>(r)) = g.generated.row(rows[r]);
            tgt.row(static_cast<int>(r)) = g.target.samples.row(rows[r]);
        }
        out.emplace_back(label, metrics::w2_squared(gen, tgt));
    }
    return out;
}

inline double tv_of_generated(const Generation& g, int horizon) {
    auto trajs = metrics::unflatten_trajectories(g.generated, horizon);
    return metrics::trajectory_variance(trajs);
}

}  // namespace cotflow::eval
