#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace stormpg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Input object violates a structural invariant (bad simplex, reward range, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed configuration file or parameter set.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Computation left its supported numeric regime (divergence, singular system).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Flat index of the logit for (state, action); parameter vectors are laid out
/// state-major so the per-state block of theta occupies a contiguous range.
inline int param_index(int state, int action, int n_actions) {
    return state * n_actions + action;
}

inline double sq(double x) { return x * x; }
inline double cube(double x) { return x * x * x; }

} // namespace stormpg
