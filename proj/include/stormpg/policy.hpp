#pragma once

#include "stormpg/mdp.hpp"
#include "stormpg/rng.hpp"

namespace stormpg {

/// Soft-max policy parameters: a logit per (state, action), all entries finite.
class SoftmaxParams {
public:
    /// All-zero logits, i.e. the uniform policy (the default initialization).
    SoftmaxParams(int n_states, int n_actions) : theta_(Mat::Zero(n_states, n_actions)) {}

    explicit SoftmaxParams(Mat theta) : theta_(std::move(theta)) {
        if (!theta_.allFinite()) throw ValidationError("softmax params: non-finite logit");
    }

    int n_states() const { return static_cast<int>(theta_.rows()); }
    int n_actions() const { return static_cast<int>(theta_.cols()); }
    const Mat& theta() const { return theta_; }

    Vec flattened() const {
        Vec out(theta_.size());
        for (int s = 0; s < theta_.rows(); ++s)
            for (int a = 0; a < theta_.cols(); ++a) out[param_index(s, a, n_actions())] = theta_(s, a);
        return out;
    }

    static SoftmaxParams from_flat(const Vec& flat, int n_states, int n_actions) {
        Mat theta(n_states, n_actions);
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a) theta(s, a) = flat[param_index(s, a, n_actions)];
        return SoftmaxParams(std::move(theta));
    }

private:
    Mat theta_;
};

/// pi(.|s) by max-shifted exponentials; the result is an exact simplex.
Vec action_probs(const SoftmaxParams& params, int state);

/// log pi(.|s) computed directly as theta - logsumexp(theta), never as the log
/// of a probability, so it stays accurate at extreme logits.
Vec log_action_probs(const SoftmaxParams& params, int state);

/// Full policy table (row s = action_probs(s)).
PolicyTable policy_table(const SoftmaxParams& params);

/// Gradient of log pi(a|s) in parameter space: block s holds e_a - pi(.|s),
/// every other block is zero. Its 2-norm is at most 2.
Vec score(const SoftmaxParams& params, int state, int action);

/// Inverse-CDF draw over action_probs(state) from the given stream.
int sample_action(const SoftmaxParams& params, int state, SampleStream& stream);

/// Log-barrier (KL-to-uniform) regularizer coefficient.
struct RegularizerSpec {
    double lambda = 0.0;
};

struct BarrierTerm {
    double value;
    Vec grad;
};

/// value = lambda/(|S||A|) sum log pi + lambda log|A| (zero at uniform theta);
/// grad = lambda/(|S||A|) sum of scores.
BarrierTerm log_barrier(const SoftmaxParams& params, const RegularizerSpec& reg);

/// L_{lambda,init}(theta) = exact return of the induced policy + barrier value.
double regularized_objective(const TabularMdp& mdp, const SoftmaxParams& params,
                             const RegularizerSpec& reg, const Vec& init);

/**
 * Fisher information under the visitation measure of the induced policy:
 * F = sum_{s,a} v_init(s,a) score(s,a) score(s,a)'.
 *
 * For soft-max policies F annihilates the per-state constant directions, so
 * mu_f (the smallest eigenvalue of F) is always 0 up to round-off. mu_f_restricted
 * is the smallest eigenvalue on the orthogonal complement of those directions,
 * which is the quantity the Fisher-non-degeneracy checks use. condition_number
 * is lambda_max over the smallest eigenvalue above the 1e-10 pseudo-inverse
 * cutoff.
 */
struct FisherReport {
    Mat fisher;
    double mu_f;
    double mu_f_restricted;
    double condition_number;
};

FisherReport fisher_information(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init);

/// Orthonormal basis of the complement of the per-state constant directions
/// (|S|(|A|-1) columns); shared by the Fisher report and the lemma checkers.
Mat state_block_complement_basis(int n_states, int n_actions);

/// theta as a JSON matrix [s][a] (shortest round-trip decimals) and back.
std::string theta_to_json(const SoftmaxParams& params);
SoftmaxParams theta_from_json(const std::string& text);

} // namespace stormpg
