#pragma once

#include "cotflow/common.hpp"
#include "cotflow/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace cotflow::nn {

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

enum class Activation { Selu };

/// Architecture of the vector-field network v(t, x | c). Inputs are the
/// concatenation [x, c, t], so input_dim = dim(x) + dim(c) + 1.
struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden_dims = {64, 64, 64, 64};
    int output_dim = 0;
    Activation activation = Activation::Selu;
    std::uint64_t seed = 0;

    void validate() const {
        require(input_dim >= 1, "MlpSpec: input_dim must be >= 1");
        require(output_dim >= 1, "MlpSpec: output_dim must be >= 1");
        require(!hidden_dims.empty(), "MlpSpec: hidden_dims must be non-empty");
        for (int h : hidden_dims) require(h >= 1, "MlpSpec: hidden dims must be >= 1");
    }

    bool operator==(const MlpSpec&) const = default;
};

struct LayerDims {
    int in = 0;
    int out = 0;
    int w_offset = 0;  // weights stored row-major, shape out x in
    int b_offset = 0;
};

inline std::vector<LayerDims> layer_dims(const MlpSpec& spec) {
    spec.validate();
    std::vector<LayerDims> layers;
    int prev = spec.input_dim;
    int off = 0;
    auto push = [&](int out) {
        LayerDims l;
        l.in = prev;
        l.out = out;
        l.w_offset = off;
        l.b_offset = off + out * prev;
        off = l.b_offset + out;
        prev = out;
        layers.push_back(l);
    };
    for (int h : spec.hidden_dims) push(h);
    push(spec.output_dim);
    return layers;
}

inline int param_count(const MlpSpec& spec) {
    auto layers = layer_dims(spec);
    const auto& last = layers.back();
    return last.b_offset + last.out;
}

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    enum class Schedule { Constant } schedule = Schedule::Constant;

    void validate() const {
        require(learning_rate > 0, "OptimizerConfig: learning_rate must be > 0");
        require(beta1 > 0 && beta1 < beta2 && beta2 < 1,
                "OptimizerConfig: need 0 < beta1 < beta2 < 1");
        require(eps > 0, "OptimizerConfig: eps must be > 0");
    }
};

/// Network parameters plus Adam state. Immutable during evaluation; only
/// adam_step mutates it, so a frozen model is safe to share across threads.
struct FlowModel {
    MlpSpec spec;
    Vector params;
    Vector adam_m;
    Vector adam_v;
    long long adam_steps = 0;

    static FlowModel init(const MlpSpec& spec) {
        spec.validate();
        FlowModel m;
        m.spec = spec;
        const int n = param_count(spec);
        m.params = Vector::Zero(n);
        m.adam_m = Vector::Zero(n);
        m.adam_v = Vector::Zero(n);
        // Kaiming-uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
        // weights and biases, drawn in layer order.
        Rng rng(spec.seed);
        for (const auto& l : layer_dims(spec)) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
            for (int i = 0; i < l.out * l.in; ++i)
                m.params[l.w_offset + i] = rng.uniform(-bound, bound);
            for (int i = 0; i < l.out; ++i)
                m.params[l.b_offset + i] = rng.uniform(-bound, bound);
        }
        return m;
    }
};

namespace detail {

using WeightMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using WeightMapMut =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline WeightMap weights(const Vector& params, const LayerDims& l) {
    return WeightMap(params.data() + l.w_offset, l.out, l.in);
}

inline Eigen::Map<const Vector> biases(const Vector& params, const LayerDims& l) {
    return Eigen::Map<const Vector>(params.data() + l.b_offset, l.out);
}

inline double selu(double z) {
    return z > 0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * std::expm1(z);
}

inline double selu_grad(double z) {
    return z > 0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(z);
}

// Batched SELU value and derivative sharing one vectorized exponential.
inline void selu_batch(const Matrix& z, Matrix& value, Matrix* grad) {
    const auto za = z.array();
    Eigen::ArrayXXd ez = za.min(0.0).exp();
    const double la = kSeluLambda * kSeluAlpha;
    value = (za > 0.0).select(kSeluLambda * za, la * (ez - 1.0));
    if (grad) *grad = (za > 0.0).select(kSeluLambda, la * ez);
}

}  // namespace detail

/// Batched evaluation; rows of `inputs` are [x, c, t] rows.
inline Matrix forward_batch(const FlowModel& model, const Matrix& inputs) {
    require(static_cast<int>(inputs.cols()) == model.spec.input_dim,
            "forward: input width does not match spec.input_dim");
    auto layers = layer_dims(model.spec);
    Matrix a = inputs;
    for (std::size_t li = 0; li + 1 < layers.size(); ++li) {
        const auto& l = layers[li];
        Matrix z = (a * detail::weights(model.params, l).transpose()).rowwise() +
                   detail::biases(model.params, l).transpose();
        detail::selu_batch(z, a, nullptr);
    }
    const auto& out = layers.back();
    return (a * detail::weights(model.params, out).transpose()).rowwise() +
           detail::biases(model.params, out).transpose();
}

/// v(t, x | c) for a single sample.
inline Vector forward(const FlowModel& model, double t, const Vector& x, const Vector& c) {
    require(static_cast<int>(x.size() + c.size()) + 1 == model.spec.input_dim,
            "forward: len(x) + len(c) + 1 must equal spec.input_dim");
    require(model.spec.output_dim == static_cast<int>(x.size()),
            "forward: output_dim must equal len(x)");
    Matrix row(1, model.spec.input_dim);
    row.block(0, 0, 1, x.size()) = x.transpose();
    if (c.size() > 0) row.block(0, x.size(), 1, c.size()) = c.transpose();
    row(0, model.spec.input_dim - 1) = t;
    return forward_batch(model, row).row(0).transpose();
}

/// Mean-over-batch squared error of the network outputs against `targets`,
/// with the full reverse-mode gradient in `grad`.
inline double loss_and_grad(const FlowModel& model, const Matrix& inputs, const Matrix& targets,
                            Vector& grad) {
    require(inputs.rows() >= 1, "loss_and_grad: empty batch");
    require(inputs.rows() == targets.rows(), "loss_and_grad: batch length mismatch");
    require(static_cast<int>(targets.cols()) == model.spec.output_dim,
            "loss_and_grad: target width does not match output_dim");
    require_finite(inputs, "loss_and_grad inputs");
    require_finite(targets, "loss_and_grad targets");

    auto layers = layer_dims(model.spec);
    const auto n_layers = layers.size();
    const double n = static_cast<double>(inputs.rows());

    // Forward, caching activations and SELU derivatives.
    std::vector<Matrix> acts(n_layers);  // acts[li] = input to layer li
    std::vector<Matrix> dselu(n_layers - 1);
    Matrix a = inputs;
    for (std::size_t li = 0; li + 1 < n_layers; ++li) {
        const auto& l = layers[li];
        acts[li] = std::move(a);
        Matrix z = (acts[li] * detail::weights(model.params, l).transpose()).rowwise() +
                   detail::biases(model.params, l).transpose();
        detail::selu_batch(z, a, &dselu[li]);
    }
    acts[n_layers - 1] = std::move(a);
    const auto& out = layers.back();
    Matrix y = (acts[n_layers - 1] * detail::weights(model.params, out).transpose()).rowwise() +
               detail::biases(model.params, out).transpose();

    Matrix resid = y - targets;
    const double loss = resid.squaredNorm() / n;

    grad.resize(model.params.size());
    Matrix delta = resid * (2.0 / n);
    for (std::size_t li = n_layers; li-- > 0;) {
        const auto& l = layers[li];
        detail::WeightMapMut gw(grad.data() + l.w_offset, l.out, l.in);
        gw.noalias() = delta.transpose() * acts[li];
        Eigen::Map<Vector>(grad.data() + l.b_offset, l.out) = delta.colwise().sum().transpose();
        if (li > 0) {
            delta = (delta * detail::weights(model.params, l)).cwiseProduct(dselu[li - 1]);
        }
    }
    if (!std::isfinite(loss)) throw NumericError("loss_and_grad: non-finite loss");
    return loss;
}

inline std::pair<double, Vector> loss_and_grad(const FlowModel& model, const Matrix& inputs,
                                               const Matrix& targets) {
    Vector grad;
    double loss = loss_and_grad(model, inputs, targets, grad);
    return {loss, std::move(grad)};
}

/// Bias-corrected Adam update, in place.
inline void adam_step(FlowModel& model, const Vector& grad, const OptimizerConfig& cfg) {
    cfg.validate();
    require(grad.size() == model.params.size(), "adam_step: grad length mismatch");
    require_finite(grad, "adam_step grad");
    model.adam_steps += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(model.adam_steps));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(model.adam_steps));
    model.adam_m = b1 * model.adam_m + (1.0 - b1) * grad;
    model.adam_v = b2 * model.adam_v + (1.0 - b2) * grad.cwiseProduct(grad);
    Vector denom = (model.adam_v / corr2).cwiseSqrt();
    denom.array() += cfg.eps;
    model.params -= cfg.learning_rate * (model.adam_m / corr1).cwiseQuotient(denom);
}

}  // namespace cotflow::nn
