#pragma once

#include "stormpg/policy.hpp"

#include <optional>
#include <span>
#include <vector>

namespace stormpg {

struct Step {
    int state;
    int action;
    double reward;
};

/// H-step rollout. discount is copied from the generating MDP so estimators
/// can weight rewards without re-threading the environment.
struct Trajectory {
    std::vector<Step> steps;
    int terminal_state = 0;
    double discount = 0.0;

    int horizon() const { return static_cast<int>(steps.size()); }
};

/// s0 ~ init, a_h ~ pi_theta(.|s_h), s_{h+1} ~ P(.|s_h, a_h); deterministic
/// given the stream position.
Trajectory sample_trajectory(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                             int horizon, SampleStream& stream);

enum class EstimatorKind { reinforce, pgt, gpomdp };

const char* estimator_name(EstimatorKind kind);

struct GradEstimate {
    Vec grad;
    EstimatorKind kind;
    int batch_size;
    int horizon;
};

/// Baselines: a constant for REINFORCE, a per-step vector (length H) for
/// GPOMDP. An empty per_step means zeros, the default the bounds assume.
struct BaselineSpec {
    double constant = 0.0;
    Vec per_step;
};

/// Truncated GPOMDP: g = sum_h [sum_{j<=h} score(s_j, a_j)] (gamma^h r_h - b_h).
/// With zero baselines and rewards in [0,1], ||g||_2 <= M_g/(1-gamma)^2.
GradEstimate gpomdp(const Trajectory& traj, const SoftmaxParams& params,
                    const BaselineSpec& baselines = {});

/// Truncated PGT. Per trajectory this is the same sum as GPOMDP with zero
/// baselines; it is evaluated through the identical summation order, so the
/// two estimates are bit-identical, differing only in their tag.
GradEstimate pgt(const Trajectory& traj, const SoftmaxParams& params);

/// Truncated REINFORCE with a constant baseline:
/// g = (sum_h score(s_h, a_h)) (sum_h gamma^h r_h - b).
GradEstimate reinforce(const Trajectory& traj, const SoftmaxParams& params, double baseline = 0.0);

struct WeightClip {
    double lo;
    double hi;
};

/// Likelihood ratio w = prod_h pi_old(a_h|s_h) / pi_new(a_h|s_h), accumulated
/// in log space and exponentiated once; clipped to [lo, hi] only when a clip
/// is supplied (after the full product, not per factor).
double importance_weight(const Trajectory& traj, const SoftmaxParams& theta_old,
                         const SoftmaxParams& theta_new,
                         const std::optional<WeightClip>& clip = std::nullopt);

/// Arithmetic mean over the batch in trajectory-index order (fixed reduction
/// order, so results do not depend on how the batch was produced).
GradEstimate batch_estimate(std::span<const Trajectory> batch, const SoftmaxParams& params,
                            EstimatorKind kind, const BaselineSpec& baselines = {});

/// Debug dump: one JSON line with fields steps ([state, action, reward]
/// triples) and terminal_state.
std::string trajectory_json_line(const Trajectory& traj);

} // namespace stormpg
