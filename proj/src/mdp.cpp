#include "stormpg/mdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace stormpg {

namespace {

constexpr double kSimplexTol = 1e-12;

void check_probability_row(Vec& row, double tol, const std::string& where) {
    for (int i = 0; i < row.size(); ++i) {
        if (!std::isfinite(row[i]))
            throw ValidationError(where + ": non-finite entry at index " + std::to_string(i));
        if (row[i] < -tol)
            throw ValidationError(where + ": negative probability " + std::to_string(row[i]) +
                                  " at index " + std::to_string(i));
        if (row[i] < 0.0) row[i] = 0.0;
    }
    const double sum = row.sum();
    if (std::abs(sum - 1.0) > tol)
        throw ValidationError(where + ": row sum " + std::to_string(sum) + " differs from 1");
    row /= sum; // renormalize exactly once at load
}

} // namespace

void check_simplex(const Vec& dist, const std::string& what) {
    Vec copy = dist;
    check_probability_row(copy, kSimplexTol, what);
}

TabularMdp::TabularMdp(Mat transition, Mat reward, double discount, Vec perf_init, Vec opt_init,
                       bool require_positive_opt_init)
    : n_states_(static_cast<int>(reward.rows())),
      n_actions_(static_cast<int>(reward.cols())),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      discount_(discount),
      perf_init_(std::move(perf_init)),
      opt_init_(std::move(opt_init)) {
    if (n_states_ <= 0 || n_actions_ <= 0)
        throw ValidationError("mdp: n_states and n_actions must be positive");
    if (transition_.rows() != static_cast<long>(n_states_) * n_actions_ ||
        transition_.cols() != n_states_)
        throw ValidationError("mdp: transition must be (n_states*n_actions) x n_states");
    if (!(discount_ > 0.0 && discount_ < 1.0))
        throw ValidationError("mdp: gamma must lie in (0, 1), got " + std::to_string(discount_));
    if (perf_init_.size() != n_states_ || opt_init_.size() != n_states_)
        throw ValidationError("mdp: rho and mu must have length n_states");

    for (int s = 0; s < n_states_; ++s) {
        for (int a = 0; a < n_actions_; ++a) {
            Vec row = transition_.row(s * n_actions_ + a);
            check_probability_row(row, kSimplexTol,
                                  "transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")");
            transition_.row(s * n_actions_ + a) = row;
            const double r = reward_(s, a);
            if (!(r >= 0.0 && r <= 1.0))
                throw ValidationError("reward out of [0,1] at (s=" + std::to_string(s) +
                                      ", a=" + std::to_string(a) + "): " + std::to_string(r));
        }
    }
    check_probability_row(perf_init_, kSimplexTol, "rho");
    check_probability_row(opt_init_, kSimplexTol, "mu");
    if (require_positive_opt_init) {
        for (int s = 0; s < n_states_; ++s)
            if (opt_init_[s] <= 0.0)
                throw ValidationError("mu must be strictly positive for soft-max runs; mu(s=" +
                                      std::to_string(s) + ") = " + std::to_string(opt_init_[s]));
    }
}

PolicyTable::PolicyTable(Mat probs) : probs_(std::move(probs)) {
    for (int s = 0; s < probs_.rows(); ++s) {
        Vec row = probs_.row(s);
        check_probability_row(row, kSimplexTol, "policy row (s=" + std::to_string(s) + ")");
        probs_.row(s) = row;
    }
}

TabularMdp parse_mdp_json(const std::string& text, bool require_positive_opt_init) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mdp json: parse failure: ") + e.what());
    }
    for (const char* field : {"n_states", "n_actions", "transition", "reward", "gamma", "rho", "mu"})
        if (!j.contains(field))
            throw ConfigError(std::string("mdp json: missing field '") + field + "'");

    const int S = j.at("n_states").get<int>();
    const int A = j.at("n_actions").get<int>();
    if (S <= 0 || A <= 0) throw ValidationError("mdp json: n_states/n_actions must be positive");

    const auto& jt = j.at("transition");
    const auto& jr = j.at("reward");
    if (static_cast<int>(jt.size()) != S) throw ValidationError("mdp json: transition must have n_states rows");
    if (static_cast<int>(jr.size()) != S) throw ValidationError("mdp json: reward must have n_states rows");

    Mat transition(S * A, S);
    Mat reward(S, A);
    for (int s = 0; s < S; ++s) {
        if (static_cast<int>(jt[s].size()) != A || static_cast<int>(jr[s].size()) != A)
            throw ValidationError("mdp json: state " + std::to_string(s) + " must list n_actions entries");
        for (int a = 0; a < A; ++a) {
            if (static_cast<int>(jt[s][a].size()) != S)
                throw ValidationError("mdp json: transition[" + std::to_string(s) + "][" +
                                      std::to_string(a) + "] must list n_states probabilities");
            for (int s2 = 0; s2 < S; ++s2) transition(s * A + a, s2) = jt[s][a][s2].get<double>();
            reward(s, a) = jr[s][a].get<double>();
        }
    }

    auto read_dist = [&](const char* name) {
        const auto& jd = j.at(name);
        if (static_cast<int>(jd.size()) != S)
            throw ValidationError(std::string("mdp json: ") + name + " must have n_states entries");
        Vec d(S);
        for (int s = 0; s < S; ++s) d[s] = jd[s].get<double>();
        return d;
    };

    return TabularMdp(std::move(transition), std::move(reward), j.at("gamma").get<double>(),
                      read_dist("rho"), read_dist("mu"), require_positive_opt_init);
}

TabularMdp load_mdp_json(const std::string& path, bool require_positive_opt_init) {
    std::ifstream in(path);
    if (!in) throw ConfigError("mdp json: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_mdp_json(ss.str(), require_positive_opt_init);
}

Mat policy_transition(const TabularMdp& mdp, const PolicyTable& pi) {
    const int S = mdp.n_states();
    const int A = mdp.n_actions();
    Mat p = Mat::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            p.row(s) += pi.probs()(s, a) * mdp.transition().row(s * A + a);
    return p;
}

Vec policy_reward(const TabularMdp& mdp, const PolicyTable& pi) {
    return (pi.probs().array() * mdp.reward().array()).rowwise().sum();
}

ValueBundle policy_evaluation(const TabularMdp& mdp, const PolicyTable& pi) {
    const int S = mdp.n_states();
    const int A = mdp.n_actions();
    const Mat p_pi = policy_transition(mdp, pi);
    const Mat system = Mat::Identity(S, S) - mdp.discount() * p_pi;
    Eigen::FullPivLU<Mat> lu(system);
    if (!lu.isInvertible())
        throw NumericError("policy_evaluation: singular Bellman system (should not occur for gamma < 1)");

    ValueBundle out;
    out.v = lu.solve(policy_reward(mdp, pi));
    out.q.resize(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out.q(s, a) = mdp.reward()(s, a) + mdp.discount() * mdp.transition().row(s * A + a).dot(out.v);
    out.adv = out.q - out.v.replicate(1, A);
    return out;
}

VisitationBundle discounted_visitation(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init) {
    check_simplex(init, "visitation init");
    const int S = mdp.n_states();
    const Mat p_pi = policy_transition(mdp, pi);
    const Mat system = Mat::Identity(S, S) - mdp.discount() * p_pi.transpose();
    Eigen::FullPivLU<Mat> lu(system);
    if (!lu.isInvertible())
        throw NumericError("discounted_visitation: singular occupancy system");

    VisitationBundle out;
    out.state_dist = lu.solve(((1.0 - mdp.discount()) * init).eval());
    out.state_action_dist = out.state_dist.asDiagonal() * pi.probs();
    return out;
}

double exact_return(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init) {
    check_simplex(init, "return init");
    return init.dot(policy_evaluation(mdp, pi).v);
}

double truncated_return(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init, int horizon) {
    if (horizon < 1) throw ValidationError("truncated_return: horizon must be >= 1");
    check_simplex(init, "return init");
    const Mat p_pi = policy_transition(mdp, pi);
    const Vec r_pi = policy_reward(mdp, pi);
    Vec v = Vec::Zero(mdp.n_states());
    for (int h = 0; h < horizon; ++h) v = r_pi + mdp.discount() * (p_pi * v);
    return init.dot(v);
}

std::pair<PolicyTable, double> optimal_policy(const TabularMdp& mdp) {
    const int S = mdp.n_states();
    const int A = mdp.n_actions();
    Vec v = Vec::Zero(S);
    const int max_sweeps = 100000;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        Vec next(S);
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const double q = mdp.reward()(s, a) + mdp.discount() * mdp.transition().row(s * A + a).dot(v);
                if (q > best) best = q;
            }
            next[s] = best;
        }
        const double delta = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (delta <= 1e-12) break;
    }

    Mat greedy = Mat::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        int best_a = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            const double q = mdp.reward()(s, a) + mdp.discount() * mdp.transition().row(s * A + a).dot(v);
            if (q > best) { // strict: ties resolve to the lowest action index
                best = q;
                best_a = a;
            }
        }
        greedy(s, best_a) = 1.0;
    }
    PolicyTable pi(std::move(greedy));
    const double j_star = exact_return(mdp, pi, mdp.perf_init());
    return {std::move(pi), j_star};
}

double mismatch_coefficient(const TabularMdp& mdp, const PolicyTable& pi_star) {
    const Vec d = discounted_visitation(mdp, pi_star, mdp.perf_init()).state_dist;
    double worst = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s) {
        if (mdp.opt_init()[s] <= 0.0)
            throw ValidationError("mismatch_coefficient: mu(s=" + std::to_string(s) +
                                  ") is not strictly positive");
        worst = std::max(worst, d[s] / mdp.opt_init()[s]);
    }
    return worst;
}

std::vector<Vec> state_marginals(const TabularMdp& mdp, const PolicyTable& pi, const Vec& init, int steps) {
    std::vector<Vec> out;
    out.reserve(steps);
    const Mat p_pi_t = policy_transition(mdp, pi).transpose();
    Vec m = init;
    for (int h = 0; h < steps; ++h) {
        out.push_back(m);
        m = p_pi_t * m;
    }
    return out;
}

} // namespace stormpg
