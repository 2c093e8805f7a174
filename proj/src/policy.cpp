#include "stormpg/policy.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace stormpg {

Vec log_action_probs(const SoftmaxParams& params, int state) {
    const Vec logits = params.theta().row(state);
    const double shift = logits.maxCoeff();
    const double lse = shift + std::log((logits.array() - shift).exp().sum());
    return logits.array() - lse;
}

Vec action_probs(const SoftmaxParams& params, int state) {
    const Vec logits = params.theta().row(state);
    const double shift = logits.maxCoeff();
    Vec p = (logits.array() - shift).exp();
    p /= p.sum();
    return p;
}

PolicyTable policy_table(const SoftmaxParams& params) {
    Mat probs(params.n_states(), params.n_actions());
    for (int s = 0; s < params.n_states(); ++s) probs.row(s) = action_probs(params, s);
    return PolicyTable(std::move(probs));
}

Vec score(const SoftmaxParams& params, int state, int action) {
    const int A = params.n_actions();
    Vec g = Vec::Zero(static_cast<long>(params.n_states()) * A);
    const Vec p = action_probs(params, state);
    for (int a = 0; a < A; ++a) g[param_index(state, a, A)] = -p[a];
    g[param_index(state, action, A)] += 1.0;
    return g;
}

int sample_action(const SoftmaxParams& params, int state, SampleStream& stream) {
    return stream.categorical(action_probs(params, state));
}

BarrierTerm log_barrier(const SoftmaxParams& params, const RegularizerSpec& reg) {
    if (reg.lambda < 0.0) throw ValidationError("log_barrier: lambda must be >= 0");
    const int S = params.n_states();
    const int A = params.n_actions();
    BarrierTerm out{0.0, Vec::Zero(static_cast<long>(S) * A)};
    if (reg.lambda == 0.0) return out;

    const double coeff = reg.lambda / (static_cast<double>(S) * A);
    double log_prob_sum = 0.0;
    for (int s = 0; s < S; ++s) {
        const Vec logp = log_action_probs(params, s);
        log_prob_sum += logp.sum();
        // sum_a score(s, a) has block s equal to (1 - A pi(.|s)).
        const Vec p = action_probs(params, s);
        for (int a = 0; a < A; ++a)
            out.grad[param_index(s, a, A)] = coeff * (1.0 - A * p[a]);
    }
    out.value = coeff * log_prob_sum + reg.lambda * std::log(static_cast<double>(A));
    return out;
}

double regularized_objective(const TabularMdp& mdp, const SoftmaxParams& params,
                             const RegularizerSpec& reg, const Vec& init) {
    return exact_return(mdp, policy_table(params), init) + log_barrier(params, reg).value;
}

Mat state_block_complement_basis(int n_states, int n_actions) {
    // Per block: an orthonormal basis of {x in R^A : sum(x) = 0}, obtained by
    // Gram-Schmidt of e_i - e_{i+1}; blocks are disjoint so stacking stays
    // orthonormal.
    Mat block(n_actions, n_actions - 1);
    for (int i = 0; i < n_actions - 1; ++i) {
        Vec v = Vec::Zero(n_actions);
        v[i] = 1.0;
        v[i + 1] = -1.0;
        for (int j = 0; j < i; ++j) v -= block.col(j).dot(v) * block.col(j);
        block.col(i) = v / v.norm();
    }
    Mat basis = Mat::Zero(static_cast<long>(n_states) * n_actions,
                          static_cast<long>(n_states) * (n_actions - 1));
    for (int s = 0; s < n_states; ++s)
        basis.block(static_cast<long>(s) * n_actions, static_cast<long>(s) * (n_actions - 1),
                    n_actions, n_actions - 1) = block;
    return basis;
}

std::string theta_to_json(const SoftmaxParams& params) {
    nlohmann::json rows = nlohmann::json::array();
    for (int s = 0; s < params.n_states(); ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < params.n_actions(); ++a) row.push_back(params.theta()(s, a));
        rows.push_back(std::move(row));
    }
    return rows.dump();
}

SoftmaxParams theta_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("theta json: parse failure: ") + e.what());
    }
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
        throw ValidationError("theta json: expected a non-empty [s][a] matrix");
    const int n_states = static_cast<int>(j.size());
    const int n_actions = static_cast<int>(j[0].size());
    Mat theta(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        if (static_cast<int>(j[s].size()) != n_actions)
            throw ValidationError("theta json: ragged row at state " + std::to_string(s));
        for (int a = 0; a < n_actions; ++a) theta(s, a) = j[s][a].get<double>();
    }
    return SoftmaxParams(std::move(theta));
}

FisherReport fisher_information(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init) {
    const int S = params.n_states();
    const int A = params.n_actions();
    const VisitationBundle vis = discounted_visitation(mdp, policy_table(params), init);

    Mat fisher = Mat::Zero(static_cast<long>(S) * A, static_cast<long>(S) * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const Vec g = score(params, s, a);
            fisher.noalias() += vis.state_action_dist(s, a) * (g * g.transpose());
        }
    fisher = 0.5 * (fisher + fisher.transpose()); // symmetrize round-off

    Eigen::SelfAdjointEigenSolver<Mat> eig(fisher);
    const Vec evals = eig.eigenvalues();
    const double mu_f = evals.minCoeff();
    const double lam_max = evals.maxCoeff();

    double smallest_kept = lam_max;
    for (int i = 0; i < evals.size(); ++i)
        if (evals[i] > 1e-10 * std::max(lam_max, 1e-300)) {
            smallest_kept = evals[i];
            break;
        }
    const double cond = lam_max > 0.0 ? lam_max / smallest_kept : 0.0;

    double mu_restricted = std::numeric_limits<double>::quiet_NaN();
    if (A > 1) {
        const Mat basis = state_block_complement_basis(S, A);
        Eigen::SelfAdjointEigenSolver<Mat> eig_r(Mat(basis.transpose() * fisher * basis));
        mu_restricted = eig_r.eigenvalues().minCoeff();
    }
    return FisherReport{std::move(fisher), mu_f, mu_restricted, cond};
}

} // namespace stormpg
