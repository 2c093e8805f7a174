#include "stormpg/enumeration.hpp"

#include <cmath>

namespace stormpg {

namespace {

void recurse(const TabularMdp& mdp, const std::vector<Vec>& probs_by_state, int horizon,
             Trajectory& traj, int state, double prob,
             const std::function<void(const Trajectory&, double)>& visit) {
    if (traj.horizon() == horizon) {
        traj.terminal_state = state;
        visit(traj, prob);
        return;
    }
    const int A = mdp.n_actions();
    for (int a = 0; a < A; ++a) {
        const double pa = probs_by_state[state][a];
        if (pa <= 0.0) continue;
        traj.steps.push_back({state, a, mdp.reward()(state, a)});
        for (int s2 = 0; s2 < mdp.n_states(); ++s2) {
            const double pt = mdp.transition()(state * A + a, s2);
            if (pt <= 0.0) continue;
            recurse(mdp, probs_by_state, horizon, traj, s2, prob * pa * pt, visit);
        }
        traj.steps.pop_back();
    }
}

} // namespace

void enumerate_trajectories(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                            int horizon,
                            const std::function<void(const Trajectory&, double)>& visit,
                            double max_outcomes) {
    if (horizon < 1) throw ValidationError("enumerate_trajectories: horizon must be >= 1");
    const double tree = std::pow(static_cast<double>(mdp.n_states()) * mdp.n_actions(), horizon);
    if (tree > max_outcomes)
        throw NumericError("enumerate_trajectories: outcome tree of size " + std::to_string(tree) +
                           " exceeds the enumeration guard");

    std::vector<Vec> probs_by_state(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) probs_by_state[s] = action_probs(params, s);

    Trajectory traj;
    traj.discount = mdp.discount();
    traj.steps.reserve(horizon);
    for (int s0 = 0; s0 < mdp.n_states(); ++s0) {
        if (init[s0] <= 0.0) continue;
        recurse(mdp, probs_by_state, horizon, traj, s0, init[s0], visit);
    }
}

Vec enumeration_expectation(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                            int horizon, const std::function<Vec(const Trajectory&)>& estimate,
                            double max_outcomes) {
    Vec acc = Vec::Zero(static_cast<long>(params.n_states()) * params.n_actions());
    enumerate_trajectories(
        mdp, params, init, horizon,
        [&](const Trajectory& traj, double prob) { acc += prob * estimate(traj); }, max_outcomes);
    return acc;
}

WeightMoments enumerate_weight_moments(const TabularMdp& mdp, const SoftmaxParams& theta_old,
                                       const SoftmaxParams& theta_new, const Vec& init, int horizon,
                                       double max_outcomes) {
    WeightMoments out{0.0, 0.0, 0.0};
    enumerate_trajectories(
        mdp, theta_new, init, horizon,
        [&](const Trajectory& traj, double prob) {
            const double w = importance_weight(traj, theta_old, theta_new);
            out.mean += prob * w;
            out.second_moment += prob * w * w;
        },
        max_outcomes);
    out.variance = out.second_moment - out.mean * out.mean;
    return out;
}

} // namespace stormpg
