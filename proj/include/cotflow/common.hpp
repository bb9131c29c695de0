#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace cotflow {

using Matrix = Eigen::MatrixXd;  // rows are samples
using Vector = Eigen::VectorXd;

/// Malformed shapes or argument values (maps to CLI exit code 2).
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite states, solver blow-ups, exceeded safety caps (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File, schema, version, and checksum problems (CLI exit code 2).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValueError(msg);
}

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) throw NumericError(what + ": non-finite values");
}

inline void require_finite(const Vector& v, const std::string& what) {
    if (!v.allFinite()) throw NumericError(what + ": non-finite values");
}

}  // namespace cotflow
