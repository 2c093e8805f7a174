#include "stormpg/optimizer.hpp"

#include "stormpg/oracle.hpp"

#include <cmath>

namespace stormpg {

const char* algorithm_name(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::storm_s: return "storm_s";
        case Algorithm::storm_f: return "storm_f";
        case Algorithm::vanilla: return "vanilla";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "storm_s") return Algorithm::storm_s;
    if (name == "storm_f") return Algorithm::storm_f;
    if (name == "vanilla") return Algorithm::vanilla;
    throw ConfigError("algorithm must be one of storm_s|storm_f|vanilla, got '" + name + "'");
}

int auto_horizon(double gamma) {
    const int h = static_cast<int>(std::ceil(std::log(1e-3) / std::log(gamma) - 1e-12));
    return std::max(1, h);
}

namespace {

/// Batch means of the fresh gradients and of the weight-corrected differences,
/// both reduced in trajectory-index order and divided by B the same way the
/// vanilla batch mean is.
struct MomentumTerms {
    Vec mean_g;
    Vec mean_corr;
    std::vector<double> weights;
};

MomentumTerms momentum_terms(std::span<const Trajectory> batch, const SoftmaxParams& theta_t,
                             const SoftmaxParams& theta_prev,
                             const std::optional<WeightClip>& clip) {
    const long dim = static_cast<long>(theta_t.n_states()) * theta_t.n_actions();
    MomentumTerms terms;
    terms.weights.reserve(batch.size());
    Vec sum_g = Vec::Zero(dim);
    Vec sum_corr = Vec::Zero(dim);
    for (const Trajectory& traj : batch) {
        const Vec g_new = gpomdp(traj, theta_t).grad;
        const double w = importance_weight(traj, theta_prev, theta_t, clip);
        terms.weights.push_back(w);
        sum_g += g_new;
        sum_corr += g_new - w * gpomdp(traj, theta_prev).grad;
    }
    const double b = static_cast<double>(batch.size());
    terms.mean_g = sum_g / b;
    terms.mean_corr = sum_corr / b;
    return terms;
}

double population_variance(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += sq(x - mean);
    return var / static_cast<double>(xs.size());
}

} // namespace

void validate_run_config(const TabularMdp& mdp, const RunConfig& config) {
    if (config.iterations < 1) throw ConfigError("T must be >= 1");
    if (config.batch_size < 1) throw ConfigError("B must be >= 1");
    if (config.lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (!(config.k > 0.0)) throw ConfigError("k must be positive");
    if (!(config.w_bound > 0.0)) throw ConfigError("W must be positive");
    if (config.horizon < 0) throw ConfigError("H must be 'auto' or a positive integer");
    if (config.mode == HyperMode::practical) {
        if (!(config.practical.k > 0.0) || !(config.practical.c > 0.0) || config.practical.m < 0.0)
            throw ConfigError("practical mode requires k > 0, c > 0, m >= 0");
    }
    if (config.clip && !(config.clip->lo <= config.clip->hi && config.clip->lo > 0.0))
        throw ConfigError("clip bounds must satisfy 0 < lo <= hi");
    if (config.algorithm == Algorithm::storm_s) {
        if (!(config.lambda > 0.0)) throw ConfigError("storm_s requires lambda > 0");
        for (int s = 0; s < mdp.n_states(); ++s)
            if (mdp.opt_init()[s] <= 0.0)
                throw ValidationError("storm_s requires strictly positive mu; mu(s=" +
                                      std::to_string(s) + ") = " +
                                      std::to_string(mdp.opt_init()[s]));
    }
}

MomentumState storm_update(const MomentumState& state, std::span<const Trajectory> batch,
                           const SoftmaxParams& theta_t, const SoftmaxParams& theta_prev,
                           double beta_t, const std::optional<WeightClip>& clip) {
    if (batch.empty()) throw ValidationError("storm_update: empty batch");
    if (!(beta_t > 0.0) || beta_t > 1.0)
        throw ValidationError("storm_update: beta_t must lie in (0, 1]");
    const MomentumTerms terms = momentum_terms(batch, theta_t, theta_prev, clip);
    MomentumState next;
    next.u = beta_t * terms.mean_g + (1.0 - beta_t) * (state.u + terms.mean_corr);
    next.t = state.t + 1;
    next.beta = beta_t;
    next.eta = state.eta;
    return next;
}

namespace {

struct LoopContext {
    Vec sampling_init;        // mu for storm_s/vanilla, rho for storm_f
    bool use_barrier = false; // add the log-barrier gradient to the ascent direction
    bool momentum = false;    // momentum recursion vs plain batch mean
    bool fisher_diagnostics = false;
};

RunRecord run_loop(const TabularMdp& mdp, const RunConfig& config) {
    validate_run_config(mdp, config);

    LoopContext ctx;
    switch (config.algorithm) {
        case Algorithm::storm_s:
            ctx = {mdp.opt_init(), true, true, false};
            break;
        case Algorithm::storm_f:
            ctx = {mdp.perf_init(), false, true, true};
            break;
        case Algorithm::vanilla:
            ctx = {mdp.opt_init(), config.lambda > 0.0, false, false};
            break;
    }

    const int horizon = config.horizon > 0 ? config.horizon : auto_horizon(mdp.discount());
    const double bundle_lambda = config.algorithm == Algorithm::storm_f ? 0.0 : config.lambda;
    RunRecord record;
    record.algorithm = config.algorithm;
    record.master_seed = config.seed;
    record.mode = config.mode;
    record.horizon_used = horizon;
    record.lambda = config.lambda;
    record.theory_bundle =
        derive_constants(2.0, 1.0, mdp.discount(), horizon, config.w_bound, bundle_lambda, config.k);
    record.params_in_force = config.mode == HyperMode::theory ? step_params(record.theory_bundle)
                                                              : config.practical;
    record.h_theorem = std::numeric_limits<double>::quiet_NaN();

    auto [pi_star, j_star] = optimal_policy(mdp);
    if (config.algorithm == Algorithm::storm_s) {
        // Horizon the asymptotic analysis prescribes,
        // H = log_gamma((1-gamma) eps / (|S||A| mismatch)), with eps implied by
        // the lambda rule of lemma2_check; absolute constant 1, logged only.
        const double mismatch = mismatch_coefficient(mdp, pi_star);
        const double eps_implied = 4.0 * config.lambda * mismatch / (1.0 - mdp.discount());
        const double arg = (1.0 - mdp.discount()) * eps_implied /
                           (static_cast<double>(mdp.n_states()) * mdp.n_actions() * mismatch);
        if (arg > 0.0 && arg < 1.0) record.h_theorem = std::log(arg) / std::log(mdp.discount());
    }

    const int T = config.iterations;
    const int B = config.batch_size;
    const RegularizerSpec reg{ctx.use_barrier ? config.lambda : 0.0};
    const double nan = std::numeric_limits<double>::quiet_NaN();

    SoftmaxParams theta(mdp.n_states(), mdp.n_actions());
    SoftmaxParams theta_prev = theta;
    MomentumState state;
    state.u = Vec::Zero(static_cast<long>(mdp.n_states()) * mdp.n_actions());
    double beta_t = 1.0; // the t = 1 init path is the beta = 1 case of the recursion
    double max_var_w = 0.0;

    record.rows.reserve(T);
    record.thetas.reserve(T);
    for (int t = 1; t <= T; ++t) {
        std::vector<Trajectory> batch;
        batch.reserve(B);
        for (int i = 0; i < B; ++i) {
            SampleStream stream(config.seed, static_cast<std::uint64_t>(t),
                                static_cast<std::uint64_t>(i));
            batch.push_back(sample_trajectory(mdp, theta, ctx.sampling_init, horizon, stream));
        }

        if (t == 1 || !ctx.momentum) {
            state.u = batch_estimate(batch, theta, EstimatorKind::gpomdp).grad;
            state.t = t;
            beta_t = 1.0;
        } else {
            state = storm_update(state, batch, theta, theta_prev, beta_t, config.clip);
            std::vector<double> weights;
            weights.reserve(B);
            for (const Trajectory& traj : batch)
                weights.push_back(importance_weight(traj, theta_prev, theta, config.clip));
            max_var_w = std::max(max_var_w, population_variance(weights));
        }

        const ScheduleStep sched = schedule(t, record.params_in_force);

        IterRow row;
        row.t = t;
        row.eta = sched.eta_t;
        row.beta = beta_t;
        row.j_exact = exact_return(mdp, policy_table(theta), mdp.perf_init());
        row.l_lambda_exact = ctx.use_barrier
                                 ? regularized_objective(mdp, theta, reg, mdp.opt_init())
                                 : row.j_exact;
        row.grad_norm_exact =
            config.algorithm == Algorithm::storm_f
                ? exact_policy_gradient(mdp, theta, mdp.perf_init()).norm()
                : exact_regularized_gradient(mdp, theta, reg, mdp.opt_init()).norm();
        row.u_norm = state.u.norm();
        row.err_norm_exact =
            (state.u - exact_truncated_gradient(mdp, theta, ctx.sampling_init, horizon)).norm();
        row.max_var_w = max_var_w;
        row.trajectories = static_cast<long>(B) * t;
        row.mu_f_restricted = nan;
        row.eps_bias = nan;
        row.lemma4_lhs = nan;
        row.lemma4_rhs = nan;
        if (ctx.fisher_diagnostics) {
            const BoundReport lemma4 = lemma4_check(mdp, theta, pi_star);
            row.mu_f_restricted = lemma4.constituents.at("mu_f_restricted");
            row.eps_bias = lemma4.constituents.at("eps_bias");
            row.lemma4_lhs = lemma4.lhs;
            row.lemma4_rhs = lemma4.rhs;
        }
        record.rows.push_back(row);
        record.thetas.push_back(theta.theta());

        if (t < T) {
            Vec direction = state.u;
            if (ctx.use_barrier) direction += log_barrier(theta, reg).grad;
            Mat next = theta.theta();
            for (int s = 0; s < mdp.n_states(); ++s)
                for (int a = 0; a < mdp.n_actions(); ++a)
                    next(s, a) += sched.eta_t * direction[param_index(s, a, mdp.n_actions())];
            if (!next.allFinite() || next.cwiseAbs().maxCoeff() > config.theta_guard)
                throw NumericError("policy parameters diverged at t=" + std::to_string(t) +
                                   " (sup-norm " + std::to_string(next.cwiseAbs().maxCoeff()) +
                                   " exceeds " + std::to_string(config.theta_guard) +
                                   "); check the step-size configuration");
            theta_prev = theta;
            theta = SoftmaxParams(std::move(next));
            beta_t = sched.beta_next;
        }
    }

    record.final_theta = theta.theta();
    SampleStream xi_stream(config.seed, 0, 0); // reserved bookkeeping substream
    record.theta_xi_index = 1 + static_cast<int>(xi_stream.uniform01() * T);
    record.theta_xi_index = std::min(record.theta_xi_index, T);
    record.theta_xi = record.thetas[record.theta_xi_index - 1];
    return record;
}

} // namespace

RunRecord run_storm_pg_s(const TabularMdp& mdp, const RunConfig& config) {
    RunConfig c = config;
    c.algorithm = Algorithm::storm_s;
    return run_loop(mdp, c);
}

RunRecord run_storm_pg_f(const TabularMdp& mdp, const RunConfig& config) {
    RunConfig c = config;
    c.algorithm = Algorithm::storm_f;
    return run_loop(mdp, c);
}

RunRecord vanilla_pg_baseline(const TabularMdp& mdp, const RunConfig& config) {
    RunConfig c = config;
    c.algorithm = Algorithm::vanilla;
    return run_loop(mdp, c);
}

RunRecord run_algorithm(const TabularMdp& mdp, const RunConfig& config) {
    return run_loop(mdp, config);
}

} // namespace stormpg
