#pragma once

#include "cotflow/common.hpp"
#include "cotflow/ot.hpp"
#include "cotflow/rng.hpp"

#include <utility>
#include <vector>

namespace cotflow::coupling {

enum class Strategy { Independent, Ot, Cot };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Independent: return "independent";
        case Strategy::Ot: return "ot";
        case Strategy::Cot: return "cot";
    }
    return "?";
}

struct NoiseSpec {
    int dim = 1;
    enum class Kind { StandardGaussian } kind = Kind::StandardGaussian;

    Matrix sample(Rng& rng, int n) const {
        require(dim >= 1, "NoiseSpec: dim must be >= 1");
        return rng.gaussian_matrix(n, dim);
    }
};

/// Training pairs. Rows of x1/c_raw keep the order of the source batch;
/// the pairing is realized by reordering the noise rows.
struct PairedBatch {
    Matrix x0;
    Matrix x1;
    Matrix c_raw;
    Matrix c_disc;  // empty unless strategy == Cot
    Strategy strategy = Strategy::Independent;
};

/// Diagnostics from COT pairing, mostly for tests and the ot-matrix dump.
struct PairingInfo {
    std::vector<int> condition_perm;  // noise row i carries condition c_disc[perm[i]]
    std::vector<int> assignment;      // noise row i pairs data row assignment[i]
    double gamma = 0.0;
    double total_cost = 0.0;
};

namespace detail {

// Place transported noise so that output row j pairs data row j.
inline Matrix reorder_noise(const Matrix& x0, const std::vector<int>& assignment) {
    Matrix out(x0.rows(), x0.cols());
    for (int i = 0; i < x0.rows(); ++i) out.row(assignment[i]) = x0.row(i);
    return out;
}

}  // namespace detail

template <class Sampler>
PairedBatch pair_independent(const Matrix& x1, const Matrix& c_raw, Sampler&& noise, Rng& rng) {
    require(x1.rows() >= 1, "pair_independent: empty batch");
    require(x1.rows() == c_raw.rows(), "pair_independent: condition rows mismatch");
    PairedBatch pb;
    pb.x0 = noise.sample(rng, static_cast<int>(x1.rows()));
    require(pb.x0.cols() == x1.cols(), "pair_independent: noise dim mismatch");
    pb.x1 = x1;
    pb.c_raw = c_raw;
    pb.strategy = Strategy::Independent;
    return pb;
}

template <class Sampler>
PairedBatch pair_ot(const Matrix& x1, const Matrix& c_raw, Sampler&& noise, Rng& rng,
                    ot::CouplingPlan* plan_out = nullptr) {
    require(x1.rows() >= 1, "pair_ot: empty batch");
    require(x1.rows() == c_raw.rows(), "pair_ot: condition rows mismatch");
    PairedBatch pb;
    Matrix x0 = noise.sample(rng, static_cast<int>(x1.rows()));
    require(x0.cols() == x1.cols(), "pair_ot: noise dim mismatch");
    auto plan = ot::solve_assignment(ot::cost_matrix_unconditional(x0, x1));
    pb.x0 = detail::reorder_noise(x0, plan.assignment);
    pb.x1 = x1;
    pb.c_raw = c_raw;  // conditions travel with their samples
    pb.strategy = Strategy::Ot;
    if (plan_out) *plan_out = std::move(plan);
    return pb;
}

/// COT pairing. The rng stream order is fixed: (1) draw noise, (2) draw the
/// condition permutation, (3) solve; with a shared seed this makes the
/// single-cluster case coincide with pair_ot exactly.
template <class Sampler>
PairedBatch pair_cot(const Matrix& x1, const Matrix& c_raw, const Matrix& c_disc,
                     Sampler&& noise, const ot::CostSpec& cost_spec, Rng& rng,
                     PairingInfo* info_out = nullptr) {
    const int n = static_cast<int>(x1.rows());
    require(n >= 1, "pair_cot: empty batch");
    require(x1.rows() == c_raw.rows() && x1.rows() == c_disc.rows(),
            "pair_cot: batch arrays must be aligned");

    Matrix x0 = noise.sample(rng, n);
    require(x0.cols() == x1.cols(), "pair_cot: noise dim mismatch");
    const std::vector<int> perm = rng.permutation(n);
    Matrix c0(n, c_disc.cols());
    for (int i = 0; i < n; ++i) c0.row(i) = c_disc.row(perm[i]);

    double gamma = cost_spec.gamma;
    if (cost_spec.mode == ot::CostSpec::Mode::Auto)
        gamma = ot::auto_gamma(x0, c0, x1, c_disc, cost_spec.multiplier);

    auto plan = ot::solve_assignment(ot::cost_matrix_conditional(x0, c0, x1, c_disc, gamma));

    PairedBatch pb;
    pb.x0 = detail::reorder_noise(x0, plan.assignment);
    pb.x1 = x1;
    pb.c_raw = c_raw;
    pb.c_disc = c_disc;
    pb.strategy = Strategy::Cot;
    if (info_out) {
        info_out->condition_perm = perm;
        info_out->assignment = plan.assignment;
        info_out->gamma = gamma;
        info_out->total_cost = plan.total_cost;
    }
    return pb;
}

// NoiseSpec convenience overloads.
inline PairedBatch pair_independent(const Matrix& x1, const Matrix& c_raw,
                                    const NoiseSpec& noise, Rng& rng) {
    return pair_independent(x1, c_raw, NoiseSpec(noise), rng);
}
inline PairedBatch pair_ot(const Matrix& x1, const Matrix& c_raw, const NoiseSpec& noise,
                           Rng& rng) {
    return pair_ot(x1, c_raw, NoiseSpec(noise), rng);
}
inline PairedBatch pair_cot(const Matrix& x1, const Matrix& c_raw, const Matrix& c_disc,
                            const NoiseSpec& noise, const ot::CostSpec& cost_spec, Rng& rng) {
    return pair_cot(x1, c_raw, c_disc, NoiseSpec(noise), cost_spec, rng);
}

}  // namespace cotflow::coupling
