#pragma once

#include "stormpg/mdp.hpp"
#include "stormpg/policy.hpp"

namespace stormpg {

/// Bundled 2-state 2-action MDP (gamma 0.8) used by the enumeration suites.
/// Identical to data/mdp_2state.json.
TabularMdp fixture_two_state();

/// 1-state 2-action bandit with rewards (1, 0). Identical to
/// data/mdp_bandit.json at the default discount.
TabularMdp fixture_bandit(double gamma = 0.5);

/// The 5-state 3-action slippery-chain benchmark (gamma 0.8): action 0 drifts
/// left, 1 stays, 2 drifts right; staying at state 4 pays 1, staying at state
/// 0 pays a 0.3 decoy, everything else 0.02. Identical to
/// data/mdp_bench_5x3.json.
TabularMdp fixture_benchmark();

/// Random MDP with full-support transitions and strictly positive rho and mu.
TabularMdp random_mdp(SampleStream& stream, int n_states, int n_actions, double gamma);

/// Logits drawn uniformly from [-scale, scale].
SoftmaxParams random_softmax(SampleStream& stream, int n_states, int n_actions, double scale);

/// Random row-stochastic policy with full support.
PolicyTable random_policy(SampleStream& stream, int n_states, int n_actions);

} // namespace stormpg
