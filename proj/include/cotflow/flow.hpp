#pragma once

#include "cotflow/common.hpp"
#include "cotflow/condproc.hpp"
#include "cotflow/coupling.hpp"
#include "cotflow/nn.hpp"
#include "cotflow/rng.hpp"
#include "cotflow/tasks.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cotflow::flow {

struct TrainConfig {
    long steps = 50000;
    int batch_size = 256;
    coupling::Strategy strategy = coupling::Strategy::Cot;
    ot::CostSpec cost_spec = ot::CostSpec::auto_scaled(10.0);
    int clusters = 2;   // K for the condition discretizer (cot only)
    int pca_dims = 0;   // 0 bypasses PCA (1-D synthetic conditions)
    std::uint64_t seed = 0;
    long eval_every = 0;  // 0 disables periodic evaluation
    nn::OptimizerConfig optim;
    std::vector<int> hidden_dims = {64, 64, 64, 64};

    void validate() const {
        require(steps >= 0, "TrainConfig: steps must be >= 0");
        require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
        require(clusters >= 1, "TrainConfig: clusters must be >= 1");
        optim.validate();
    }
};

/// Linear interpolant x(t) = t*x1 + (1-t)*x0 with constant velocity x1 - x0.
struct Interpolant {
    double t;
    Vector x_t;
    Vector target;
};

inline Interpolant make_interpolant(const Vector& x0, const Vector& x1, double t) {
    require(x0.size() == x1.size(), "make_interpolant: dimension mismatch");
    require(t >= 0.0 && t <= 1.0, "make_interpolant: t must lie in [0, 1]");
    return {t, t * x1 + (1.0 - t) * x0, x1 - x0};
}

struct TrainLogRow {
    long step;
    double loss;
    std::optional<double> w2_nfe1;
    std::optional<double> w2_nfe2;
};

/// Everything the loop mutates; checkpointing this struct and resuming is
/// bit-identical to an uninterrupted run.
struct TrainState {
    nn::FlowModel model;
    std::optional<condproc::CondProcessor> cond;
    Rng rng{0};
    long step = 0;
};

inline TrainState init_train(const tasks::ConditionedDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    require(ds.samples.rows() >= 1, "init_train: empty dataset");
    TrainState st;
    nn::MlpSpec spec;
    spec.input_dim = static_cast<int>(ds.samples.cols() + ds.conditions.cols()) + 1;
    spec.hidden_dims = cfg.hidden_dims;
    spec.output_dim = static_cast<int>(ds.samples.cols());
    spec.seed = cfg.seed;
    st.model = nn::FlowModel::init(spec);
    if (cfg.strategy == coupling::Strategy::Cot) {
        st.cond = condproc::CondProcessor::fit(ds.conditions, cfg.clusters, cfg.pca_dims,
                                               cfg.seed);
    }
    st.rng = Rng(cfg.seed);
    st.step = 0;
    return st;
}

namespace detail {

inline Matrix gather_rows(const Matrix& m, const std::vector<int>& idx) {
    Matrix out(static_cast<int>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<int>(i)) = m.row(idx[i]);
    return out;
}

}  // namespace detail

/// One optimizer step: sample a batch (uniform with replacement), pair it
/// under the configured strategy, draw per-row times, and regress the field
/// onto the interpolant velocities. Raw conditions feed the network; the
/// discretized conditions only steer the pairing. `time_sampler` exists so
/// tests can pin t; the default draws U(0,1) per row. The prior is any
/// sampler with a Matrix sample(Rng&, int) member.
template <class PriorT>
double train_step(TrainState& st, const tasks::ConditionedDataset& ds, const PriorT& prior,
                  const TrainConfig& cfg,
                  const std::function<double(Rng&)>& time_sampler = {}) {
    const int n = static_cast<int>(ds.samples.rows());
    const int bs = cfg.batch_size;

    std::vector<int> idx(bs);
    for (int i = 0; i < bs; ++i) idx[i] = st.rng.below(n);
    Matrix x1 = detail::gather_rows(ds.samples, idx);
    Matrix c_raw = detail::gather_rows(ds.conditions, idx);

    coupling::PairedBatch pb;
    switch (cfg.strategy) {
        case coupling::Strategy::Independent:
            pb = coupling::pair_independent(x1, c_raw, prior, st.rng);
            break;
        case coupling::Strategy::Ot:
            pb = coupling::pair_ot(x1, c_raw, prior, st.rng);
            break;
        case coupling::Strategy::Cot: {
            require(st.cond.has_value(), "train_step: cot requires a fitted CondProcessor");
            Matrix c_disc = st.cond->discretized(c_raw);
            pb = coupling::pair_cot(x1, c_raw, c_disc, prior, cfg.cost_spec, st.rng);
            break;
        }
    }

    Vector t(bs);
    for (int i = 0; i < bs; ++i) t[i] = time_sampler ? time_sampler(st.rng) : st.rng.uniform();

    const int d = static_cast<int>(ds.samples.cols());
    const int q = static_cast<int>(ds.conditions.cols());
    Matrix inputs(bs, d + q + 1);
    Matrix targets = pb.x1 - pb.x0;
    for (int i = 0; i < bs; ++i) {
        inputs.block(i, 0, 1, d) = t[i] * pb.x1.row(i) + (1.0 - t[i]) * pb.x0.row(i);
        inputs.block(i, d, 1, q) = pb.c_raw.row(i);
        inputs(i, d + q) = t[i];
    }

    Vector grad;
    double loss;
    try {
        loss = nn::loss_and_grad(st.model, inputs, targets, grad);
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at training step " +
                           std::to_string(st.step + 1));
    }
    nn::adam_step(st.model, grad, cfg.optim);
    st.step += 1;
    return loss;
}

/// The conditional vector field of a trained model as a batched callable
/// (t, x) -> v with the conditions bound.
inline auto bound_field(const nn::FlowModel& model, const Matrix& c) {
    return [&model, c](double t, const Matrix& x) {
        const int bs = static_cast<int>(x.rows());
        Matrix inputs(bs, x.cols() + c.cols() + 1);
        inputs.block(0, 0, bs, x.cols()) = x;
        inputs.block(0, x.cols(), bs, c.cols()) = c;
        inputs.col(x.cols() + c.cols()).setConstant(t);
        return nn::forward_batch(model, inputs);
    };
}

using EvalHook = std::function<void(const TrainState&, TrainLogRow&)>;

/// Run until `target_steps`, appending one log row per step. The optional
/// hook fills the periodic-eval columns every cfg.eval_every steps.
template <class PriorT>
void train_until(TrainState& st, const tasks::ConditionedDataset& ds, const PriorT& prior,
                 const TrainConfig& cfg, long target_steps, std::vector<TrainLogRow>& log,
                 const EvalHook& eval_hook = {}) {
    while (st.step < target_steps) {
        const double loss = train_step(st, ds, prior, cfg);
        TrainLogRow row{st.step, loss, std::nullopt, std::nullopt};
        if (eval_hook && cfg.eval_every > 0 && st.step % cfg.eval_every == 0)
            eval_hook(st, row);
        log.push_back(row);
    }
}

struct TrainResult {
    TrainState state;
    std::vector<TrainLogRow> log;
};

template <class PriorT>
TrainResult train(const tasks::ConditionedDataset& ds, const PriorT& prior,
                  const TrainConfig& cfg, const EvalHook& eval_hook = {}) {
    TrainResult res;
    res.state = init_train(ds, cfg);
    train_until(res.state, ds, prior, cfg, cfg.steps, res.log, eval_hook);
    return res;
}

}  // namespace cotflow::flow
