#pragma once

#include "stormpg/sampling.hpp"

#include <functional>

namespace stormpg {

/**
 * Visits every positive-probability trajectory of length `horizon` under
 * (params, init), passing each trajectory together with its exact probability
 * rho(s0) prod_h pi(a_h|s_h) P(s_{h+1}|s_h, a_h). Zero-probability branches
 * are pruned. Throws NumericError when the outcome tree (|S||A|)^H exceeds
 * max_outcomes.
 *
 * The visited probabilities sum to 1, which makes this the exhaustive oracle
 * behind every expectation identity checked in the test suites.
 */
void enumerate_trajectories(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                            int horizon,
                            const std::function<void(const Trajectory&, double)>& visit,
                            double max_outcomes = 1e6);

/// Exhaustive expectation of a per-trajectory estimator under (params, init).
Vec enumeration_expectation(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                            int horizon,
                            const std::function<Vec(const Trajectory&)>& estimate,
                            double max_outcomes = 1e6);

/// Exhaustively enumerated mean and variance of the importance weight
/// w(tau | theta_old, theta_new) with tau ~ p(. | theta_new, init).
struct WeightMoments {
    double mean;
    double second_moment;
    double variance;
};

WeightMoments enumerate_weight_moments(const TabularMdp& mdp, const SoftmaxParams& theta_old,
                                       const SoftmaxParams& theta_new, const Vec& init, int horizon,
                                       double max_outcomes = 1e6);

} // namespace stormpg
