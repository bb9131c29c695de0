#pragma once

#include "cotflow/common.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace cotflow::ode {

enum class SolverKind { Euler, Midpoint, Dopri5 };

inline const char* solver_name(SolverKind k) {
    switch (k) {
        case SolverKind::Euler: return "euler";
        case SolverKind::Midpoint: return "midpoint";
        case SolverKind::Dopri5: return "dopri5";
    }
    return "?";
}

inline SolverKind solver_from_name(const std::string& s) {
    if (s == "euler") return SolverKind::Euler;
    if (s == "midpoint") return SolverKind::Midpoint;
    if (s == "dopri5") return SolverKind::Dopri5;
    throw ValueError("unknown solver: " + s);
}

struct SolverConfig {
    SolverKind kind = SolverKind::Euler;
    int steps = 1;       // fixed-step kinds
    double rtol = 1e-5;  // dopri5
    double atol = 1e-5;  // dopri5
    int max_nfe = 10000;
    bool record_path = false;

    void validate() const {
        require(steps >= 1, "SolverConfig: steps must be >= 1");
        require(rtol > 0 && atol > 0, "SolverConfig: rtol and atol must be > 0");
        require(max_nfe >= 1, "SolverConfig: max_nfe must be >= 1");
    }
};

struct PathPoint {
    double t;
    Matrix x;
};

/// Samples at t = 1 with integration telemetry. One batched field call
/// counts as one NFE.
struct SolverReport {
    Matrix samples;
    long nfe = 0;
    std::vector<PathPoint> path;
    long accepted = 0;
    long rejected = 0;
};

namespace detail {

template <class Field>
class CountingField {
  public:
    CountingField(Field& f, long max_nfe) : f_(f), max_nfe_(max_nfe) {}

    Matrix operator()(double t, const Matrix& x) {
        if (++nfe_ > max_nfe_) throw NumericError("integrate: max_nfe exceeded");
        Matrix v = f_(t, x);
        if (!v.allFinite()) throw NumericError("integrate: field returned non-finite values");
        return v;
    }

    long nfe() const { return nfe_; }

  private:
    Field& f_;
    long max_nfe_;
    long nfe_ = 0;
};

// Dormand-Prince 5(4) coefficients.
inline constexpr double kDpC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double kDpA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
// b - b*: weights of the embedded error estimate.
inline constexpr double kDpE[7] = {71.0 / 57600,      0.0,         -71.0 / 16695, 71.0 / 1920,
                                   -17253.0 / 339200, 22.0 / 525,  -1.0 / 40};

template <class CF>
SolverReport run_dopri5(CF& field, const Matrix& x0, const SolverConfig& cfg) {
    SolverReport rep;
    const double t_end = 1.0;
    double t = 0.0;
    Matrix y = x0;
    if (cfg.record_path) rep.path.push_back({t, y});

    Matrix k[7];
    k[0] = field(t, y);  // the single initial evaluation; FSAL reuses it

    // First step guess from the initial state and slope only (no extra NFE).
    auto err_scale = [&](const Matrix& a, const Matrix& b) {
        return (cfg.atol + cfg.rtol * a.cwiseAbs().cwiseMax(b.cwiseAbs()).array());
    };
    const double d0 = std::sqrt((y.array() / err_scale(y, y)).square().mean());
    const double d1 = std::sqrt((k[0].array() / err_scale(y, y)).square().mean());
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-2 : 0.01 * d0 / d1;
    h = std::clamp(h, 1e-4, t_end);

    const double safety = 0.9, beta = 0.04, expo = 0.2 - 0.75 * beta;
    double err_prev = 1.0;
    bool just_rejected = false;

    while (t < t_end) {
        h = std::min(h, t_end - t);
        for (int s = 1; s < 7; ++s) {
            Matrix ys = y;
            for (int q = 0; q < s; ++q) ys += (h * kDpA[s][q]) * k[q];
            k[s] = field(t + kDpC[s] * h, ys);
        }
        // Stage 7 state (c7 = 1) is the 5th-order solution.
        Matrix y_new = y;
        for (int q = 0; q < 6; ++q) y_new += (h * kDpA[6][q]) * k[q];

        Matrix err = Matrix::Zero(y.rows(), y.cols());
        for (int q = 0; q < 7; ++q) err += (h * kDpE[q]) * k[q];
        const double err_norm =
            std::sqrt((err.array() / err_scale(y, y_new)).square().mean());

        if (err_norm <= 1.0) {
            t += h;
            y = std::move(y_new);
            k[0] = k[6];  // FSAL
            ++rep.accepted;
            if (cfg.record_path) rep.path.push_back({t, y});
            double fac = safety * std::pow(std::max(err_norm, 1e-10), -expo) *
                         std::pow(std::max(err_prev, 1e-10), beta);
            fac = std::min(fac, just_rejected ? 1.0 : 10.0);
            h *= std::max(fac, 0.2);
            err_prev = std::max(err_norm, 1e-10);
            just_rejected = false;
        } else {
            ++rep.rejected;
            h *= std::max(safety * std::pow(err_norm, -0.2), 0.2);
            just_rejected = true;
        }
        if (h < 1e-14) throw NumericError("dopri5: step size underflow");
    }
    rep.samples = std::move(y);
    return rep;
}

}  // namespace detail

/// Integrate dx = field(t, x) dt over [0, 1]. Fixed-step kinds use a uniform
/// grid; dopri5 adapts with a PI controller. NFE: euler = steps, midpoint =
/// 2*steps, dopri5 = 1 + 6 * attempted steps.
template <class Field>
SolverReport integrate(Field&& field, const Matrix& x0, const SolverConfig& cfg) {
    cfg.validate();
    require_finite(x0, "integrate x0");
    detail::CountingField<std::remove_reference_t<Field>> counting(field, cfg.max_nfe);

    SolverReport rep;
    if (cfg.kind == SolverKind::Dopri5) {
        rep = detail::run_dopri5(counting, x0, cfg);
    } else {
        const int steps = cfg.steps;
        const double h = 1.0 / steps;
        Matrix y = x0;
        if (cfg.record_path) rep.path.push_back({0.0, y});
        for (int s = 0; s < steps; ++s) {
            const double t = static_cast<double>(s) * h;
            if (cfg.kind == SolverKind::Euler) {
                y += h * counting(t, y);
            } else {
                Matrix k1 = counting(t, y);
                y += h * counting(t + 0.5 * h, y + (0.5 * h) * k1);
            }
            if (cfg.record_path) rep.path.push_back({h * (s + 1), y});
        }
        rep.samples = std::move(y);
        rep.accepted = steps;
    }
    rep.nfe = counting.nfe();
    return rep;
}

/// Spec surface: field takes (t, x, c) with the conditions fixed across the
/// integration.
template <class Field3>
SolverReport integrate(Field3&& field, const Matrix& x0, const Matrix& c,
                       const SolverConfig& cfg) {
    require(c.rows() == x0.rows(), "integrate: condition rows mismatch");
    return integrate([&](double t, const Matrix& x) { return field(t, x, c); }, x0, cfg);
}

/// Mean over samples of the maximum perpendicular deviation of the recorded
/// path from the chord x(0) -> x(1), normalized by the chord length. Zero for
/// perfectly straight paths; a degenerate zero-length chord contributes its
/// raw deviation.
inline double straightness(const SolverReport& rep) {
    require(rep.path.size() >= 3, "straightness: need a recorded path with >= 3 points");
    const int n = static_cast<int>(rep.path.front().x.rows());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        Vector a = rep.path.front().x.row(i).transpose();
        Vector b = rep.path.back().x.row(i).transpose();
        Vector chord = b - a;
        const double len = chord.norm();
        double max_dev = 0.0;
        for (const auto& pp : rep.path) {
            Vector rel = pp.x.row(i).transpose() - a;
            double dev;
            if (len > 0) {
                // rejection from the chord direction; avoids the cancellation
                // in sqrt(|rel|^2 - along^2) for near-straight paths
                Vector unit = chord / len;
                dev = (rel - rel.dot(unit) * unit).norm();
            } else {
                dev = rel.norm();
            }
            max_dev = std::max(max_dev, dev);
        }
        total += len > 0 ? max_dev / len : max_dev;
    }
    return total / n;
}

}  // namespace cotflow::ode
