#include "stormpg/sampling.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace stormpg {

const char* estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::reinforce: return "reinforce";
        case EstimatorKind::pgt: return "pgt";
        case EstimatorKind::gpomdp: return "gpomdp";
    }
    return "unknown";
}

Trajectory sample_trajectory(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                             int horizon, SampleStream& stream) {
    if (horizon < 1) throw ValidationError("sample_trajectory: horizon must be >= 1");
    Trajectory traj;
    traj.discount = mdp.discount();
    traj.steps.reserve(horizon);
    int s = stream.categorical(init);
    for (int h = 0; h < horizon; ++h) {
        const int a = sample_action(params, s, stream);
        traj.steps.push_back({s, a, mdp.reward()(s, a)});
        s = stream.categorical(mdp.transition().row(s * mdp.n_actions() + a));
    }
    traj.terminal_state = s;
    return traj;
}

GradEstimate gpomdp(const Trajectory& traj, const SoftmaxParams& params, const BaselineSpec& baselines) {
    const int H = traj.horizon();
    if (baselines.per_step.size() != 0 && baselines.per_step.size() != H)
        throw ValidationError("gpomdp: baseline length " + std::to_string(baselines.per_step.size()) +
                              " does not match horizon " + std::to_string(H));
    Vec cum_score = Vec::Zero(static_cast<long>(params.n_states()) * params.n_actions());
    Vec g = Vec::Zero(cum_score.size());
    double disc = 1.0;
    for (int h = 0; h < H; ++h) {
        const Step& step = traj.steps[h];
        cum_score += score(params, step.state, step.action);
        const double b = baselines.per_step.size() ? baselines.per_step[h] : 0.0;
        g += cum_score * (disc * step.reward - b);
        disc *= traj.discount;
    }
    return GradEstimate{std::move(g), EstimatorKind::gpomdp, 1, H};
}

GradEstimate pgt(const Trajectory& traj, const SoftmaxParams& params) {
    GradEstimate est = gpomdp(traj, params, {});
    est.kind = EstimatorKind::pgt;
    return est;
}

GradEstimate reinforce(const Trajectory& traj, const SoftmaxParams& params, double baseline) {
    const int H = traj.horizon();
    Vec sum_score = Vec::Zero(static_cast<long>(params.n_states()) * params.n_actions());
    double ret = 0.0;
    double disc = 1.0;
    for (int h = 0; h < H; ++h) {
        const Step& step = traj.steps[h];
        sum_score += score(params, step.state, step.action);
        ret += disc * step.reward;
        disc *= traj.discount;
    }
    return GradEstimate{(sum_score * (ret - baseline)).eval(), EstimatorKind::reinforce, 1, H};
}

double importance_weight(const Trajectory& traj, const SoftmaxParams& theta_old,
                         const SoftmaxParams& theta_new, const std::optional<WeightClip>& clip) {
    double log_w = 0.0;
    for (const Step& step : traj.steps) {
        const double lp_old = log_action_probs(theta_old, step.state)[step.action];
        const double lp_new = log_action_probs(theta_new, step.state)[step.action];
        if (!std::isfinite(lp_new))
            throw ValidationError("importance_weight: action " + std::to_string(step.action) +
                                  " at state " + std::to_string(step.state) +
                                  " has degenerate support under theta_new");
        if (!std::isfinite(lp_old))
            throw ValidationError("importance_weight: degenerate support under theta_old");
        log_w += lp_old - lp_new;
    }
    double w = std::exp(log_w);
    if (clip) w = std::clamp(w, clip->lo, clip->hi);
    return w;
}

std::string trajectory_json_line(const Trajectory& traj) {
    nlohmann::json j;
    j["steps"] = nlohmann::json::array();
    for (const Step& step : traj.steps)
        j["steps"].push_back({step.state, step.action, step.reward});
    j["terminal_state"] = traj.terminal_state;
    return j.dump();
}

GradEstimate batch_estimate(std::span<const Trajectory> batch, const SoftmaxParams& params,
                            EstimatorKind kind, const BaselineSpec& baselines) {
    if (batch.empty()) throw ValidationError("batch_estimate: empty batch");
    Vec sum = Vec::Zero(static_cast<long>(params.n_states()) * params.n_actions());
    const int H = batch.front().horizon();
    for (const Trajectory& traj : batch) {
        if (traj.horizon() != H)
            throw ValidationError("batch_estimate: mixed horizons in batch");
        switch (kind) {
            case EstimatorKind::gpomdp: sum += gpomdp(traj, params, baselines).grad; break;
            case EstimatorKind::pgt: sum += pgt(traj, params).grad; break;
            case EstimatorKind::reinforce: sum += reinforce(traj, params, baselines.constant).grad; break;
        }
    }
    return GradEstimate{(sum / static_cast<double>(batch.size())).eval(), kind,
                        static_cast<int>(batch.size()), H};
}

} // namespace stormpg
