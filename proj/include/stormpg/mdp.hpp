#pragma once

#include "stormpg/common.hpp"

#include <string>
#include <utility>

namespace stormpg {

/**
 * Finite discounted MDP held as dense tensors.
 *
 * transition is stored as an (S*A) x S matrix whose row s*A+a is the
 * distribution over successor states of (s, a). Rewards are S x A and must lie
 * in [0, 1]. perf_init (rho) is the performance measure, opt_init (mu) the
 * optimization/exploration measure.
 *
 * Construction validates every invariant (row sums within 1e-12, entries
 * >= 0, reward range, discount in (0,1), simplex inits) and then renormalizes
 * each probability row exactly once, so downstream code sees exact simplexes.
 * Violations throw ValidationError naming the offending field and indices.
 */
class TabularMdp {
public:
    TabularMdp(Mat transition, Mat reward, double discount, Vec perf_init, Vec opt_init,
               bool require_positive_opt_init = false);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double discount() const { return discount_; }
    const Mat& transition() const { return transition_; }
    const Mat& reward() const { return reward_; }
    const Vec& perf_init() const { return perf_init_; }
    const Vec& opt_init() const { return opt_init_; }

    double transition_prob(int s, int a, int s_next) const {
        return transition_(s * n_actions_ + a, s_next);
    }

    /// Set when discount > 0.999: the (I - gamma P) solves are ill-conditioned
    /// but the computation proceeds.
    bool conditioning_warning() const { return discount_ > 0.999; }

private:
    int n_states_;
    int n_actions_;
    Mat transition_;
    Mat reward_;
    double discount_;
    Vec perf_init_;
    Vec opt_init_;
};

/// Stochastic policy as a row-simplex matrix pi[s][a]; rows validated to 1e-12.
class PolicyTable {
public:
    explicit PolicyTable(Mat probs);

    const Mat& probs() const { return probs_; }
    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }

private:
    Mat probs_;
};

/// V, Q and A = Q - V of one policy.
struct ValueBundle {
    Vec v;   // per state
    Mat q;   // state x action
    Mat adv; // state x action
};

/// Discounted visitation d over states and v[s][a] = d[s] * pi[a|s].
struct VisitationBundle {
    Vec state_dist;
    Mat state_action_dist;
};

/// Loads the JSON MDP format (fields n_states, n_actions, transition[s][a][s'],
/// reward[s][a], gamma, rho[s], mu[s]) and validates it.
TabularMdp load_mdp_json(const std::string& path, bool require_positive_opt_init = false);
TabularMdp parse_mdp_json(const std::string& text, bool require_positive_opt_init = false);

/// S x S transition matrix of the Markov chain induced by pi.
Mat policy_transition(const TabularMdp& mdp, const PolicyTable& pi);
/// Expected one-step reward per state under pi.
Vec policy_reward(const TabularMdp& mdp, const PolicyTable& pi);

/// Solves the Bellman system V = r_pi + gamma P_pi V by a dense direct solve
/// and fills Q and A from it.
ValueBundle policy_evaluation(const TabularMdp& mdp, const PolicyTable& pi);

/// d = (1-gamma) init' (I - gamma P_pi)^{-1} as a direct row solve.
VisitationBundle discounted_visitation(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init);

/// J = init' V.
double exact_return(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init);

/// Finite-horizon return by backward recursion; 0 <= J^H <= J.
double truncated_return(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init, int horizon);

/// Value iteration to sup-norm tolerance 1e-12, greedy deterministic policy
/// with lowest-index tie-break; second element is J* under perf_init.
std::pair<PolicyTable, double> optimal_policy(const TabularMdp& mdp);

/// max_s d_rho^{pi*}(s) / mu(s); requires mu component-wise positive.
double mismatch_coefficient(const TabularMdp& mdp, const PolicyTable& pi_star);

/// State marginals m_0..m_{n-1} under pi: m_0 = init, m_{h+1} = P_pi' m_h.
std::vector<Vec> state_marginals(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init, int steps);

/// Validates a caller-supplied distribution (simplex within 1e-12).
void check_simplex(const Vec& dist, const std::string& what);

} // namespace stormpg
