#include "stormpg/verify.hpp"

#include "stormpg/experiment.hpp"
#include "stormpg/fixtures.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace stormpg {

namespace {

struct SuiteContext {
    bool full = false;
    std::optional<TabularMdp> custom_mdp;
    std::vector<BoundReport>* checks;
    std::vector<std::string>* warnings;
};

void push(SuiteContext& ctx, BoundReport report) { ctx.checks->push_back(std::move(report)); }

// --- constants ---------------------------------------------------------------

/// Second entry of the double-entry bookkeeping: the same formulas written
/// through pow/exp instead of repeated multiplication.
ConstantsBundle recompute_constants_reference(const ConstantsBundle& in) {
    ConstantsBundle ref = in;
    const double om = 1.0 - in.gamma;
    ref.l_g = in.m_h * std::pow(om, -2.0);
    ref.g_bound = in.m_g * std::pow(om, -2.0);
    ref.sigma = ref.g_bound;
    ref.l_smooth = 2.0 * std::pow(in.m_g, 2.0) * std::pow(om, -3.0) + in.m_h * std::pow(om, -2.0);
    ref.l_lambda = ref.l_smooth + in.lambda;
    ref.c_w = std::exp(0.5 * std::log(static_cast<double>(in.horizon) *
                                      (2.0 * in.horizon * std::pow(in.m_g, 2.0) + in.m_h) *
                                      (in.w_bound + 1.0)));
    ref.b_sq = std::pow(ref.l_g, 2.0) + std::pow(ref.g_bound * ref.c_w, 2.0);
    ref.c = std::pow(3.0 * std::pow(in.k, 3.0) * ref.l_lambda, -1.0) + 96.0 * ref.b_sq;
    ref.m = std::max({2.0, std::pow(2.0 * ref.l_lambda * in.k, 3.0),
                      std::pow(ref.c * in.k / (2.0 * ref.l_lambda), 3.0)});
    ref.eta0 = in.k * std::pow(ref.m, -1.0 / 3.0);
    return ref;
}

double max_rel_error(const ConstantsBundle& a, const ConstantsBundle& b) {
    auto rel = [](double x, double y) {
        return std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)});
    };
    return std::max({rel(a.l_g, b.l_g), rel(a.g_bound, b.g_bound), rel(a.sigma, b.sigma),
                     rel(a.l_smooth, b.l_smooth), rel(a.l_lambda, b.l_lambda), rel(a.c_w, b.c_w),
                     rel(a.b_sq, b.b_sq), rel(a.c, b.c), rel(a.m, b.m), rel(a.eta0, b.eta0)});
}

void suite_constants(SuiteContext& ctx) {
    const std::vector<double> gammas = ctx.full ? std::vector<double>{0.5, 0.8, 0.9, 0.95, 0.99}
                                                : std::vector<double>{0.8, 0.9};
    const std::vector<int> horizons = ctx.full ? std::vector<int>{1, 5, 20, 66} : std::vector<int>{5, 31};
    const std::vector<double> lambdas = {0.0, 0.02, 0.5};
    const std::vector<double> ks = {0.5, 1.0, 2.0};

    double worst = 0.0;
    std::string worst_id = "none";
    int instances = 0;
    for (double gamma : gammas)
        for (int horizon : horizons)
            for (double lambda : lambdas)
                for (double k : ks) {
                    const ConstantsBundle bundle = derive_constants(2.0, 1.0, gamma, horizon, 1.0, lambda, k);
                    const double err = max_rel_error(bundle, recompute_constants_reference(bundle));
                    ++instances;
                    if (err > worst) {
                        worst = err;
                        worst_id = "gamma=" + std::to_string(gamma) + ",H=" + std::to_string(horizon) +
                                   ",lambda=" + std::to_string(lambda) + ",k=" + std::to_string(k);
                    }
                }
    BoundReport entry = make_report("constants_double_entry", worst_id, worst, 1e-12);
    entry.holds = worst <= 1e-12; // exact double-entry tolerance, no relative slack
    entry.slack = 1e-12 - worst;
    entry.constituents = {{"instances", static_cast<double>(instances)}};
    push(ctx, std::move(entry));

    // Schedule invariants on a theory bundle: eta_t <= 1/(2 L_lambda),
    // eta nonincreasing (theory m is ~1e21, where the decay sits below the
    // ulp), beta in (0, 1].
    const ConstantsBundle bundle = derive_constants(2.0, 1.0, 0.9, 66, 1.0, 0.1, 1.0);
    const int t_max = ctx.full ? 10000 : 500;
    double max_eta = 0.0;
    double prev_eta = std::numeric_limits<double>::infinity();
    bool monotone = true;
    double min_beta = 1.0;
    double max_beta = 0.0;
    for (int t = 1; t <= t_max; ++t) {
        const ScheduleStep step = schedule(t, bundle);
        max_eta = std::max(max_eta, step.eta_t);
        if (step.eta_t > prev_eta) monotone = false;
        prev_eta = step.eta_t;
        min_beta = std::min(min_beta, step.beta_next);
        max_beta = std::max(max_beta, step.beta_next);
    }
    BoundReport sched_report =
        make_report("schedule_eta_bound", "theory gamma=0.9", max_eta, 1.0 / (2.0 * bundle.l_lambda));
    sched_report.holds = sched_report.holds && monotone && min_beta > 0.0 && max_beta <= 1.0;
    sched_report.constituents = {{"eta0", bundle.eta0},
                                 {"min_beta", min_beta},
                                 {"max_beta", max_beta},
                                 {"monotone", monotone ? 1.0 : 0.0}};
    push(ctx, std::move(sched_report));
}

// --- estimators ---------------------------------------------------------------

void suite_estimators(SuiteContext& ctx) {
    const TabularMdp mdp = fixture_two_state();
    const int horizon = 3;
    SampleStream stream(2024);
    const SoftmaxParams theta = random_softmax(stream, mdp.n_states(), mdp.n_actions(), 1.5);
    const Vec exact = exact_truncated_gradient(mdp, theta, mdp.perf_init(), horizon);

    auto expectation_gap = [&](EstimatorKind kind) {
        const Vec mean = enumeration_expectation(
            mdp, theta, mdp.perf_init(), horizon, [&](const Trajectory& traj) {
                switch (kind) {
                    case EstimatorKind::gpomdp: return gpomdp(traj, theta).grad;
                    case EstimatorKind::pgt: return pgt(traj, theta).grad;
                    case EstimatorKind::reinforce: return reinforce(traj, theta).grad;
                }
                return Vec();
            });
        return (mean - exact).cwiseAbs().maxCoeff();
    };
    for (EstimatorKind kind : {EstimatorKind::gpomdp, EstimatorKind::pgt, EstimatorKind::reinforce})
        push(ctx, make_report("unbiasedness_enumeration", estimator_name(kind), expectation_gap(kind),
                              1e-9));

    // PGT and GPOMDP(b=0) must agree bit-for-bit on sampled trajectories.
    const int n_traj = ctx.full ? 10000 : 500;
    double worst_gap = 0.0;
    for (int i = 0; i < n_traj; ++i) {
        SampleStream traj_stream(77, 1, i);
        const Trajectory traj = sample_trajectory(mdp, theta, mdp.perf_init(), 20, traj_stream);
        const double gap = (pgt(traj, theta).grad - gpomdp(traj, theta).grad).cwiseAbs().maxCoeff();
        worst_gap = std::max(worst_gap, gap);
    }
    BoundReport identity = make_report("pgt_equals_gpomdp", std::to_string(n_traj) + " trajectories",
                                       worst_gap, 0.0);
    identity.holds = worst_gap == 0.0;
    push(ctx, std::move(identity));

    // Norm bound ||g|| <= M_g/(1-gamma)^2 across random MDPs.
    const int n_mdps = ctx.full ? 20 : 5;
    const int per_mdp = ctx.full ? 500 : 100;
    for (int m = 0; m < n_mdps; ++m) {
        SampleStream gen(3000 + m);
        const double gamma = 0.5 + 0.45 * gen.uniform01();
        const TabularMdp random = random_mdp(gen, 2 + m % 3, 2 + m % 2, gamma);
        const SoftmaxParams params = random_softmax(gen, random.n_states(), random.n_actions(), 2.0);
        const int h = auto_horizon(gamma);
        double max_norm = 0.0;
        for (int i = 0; i < per_mdp; ++i) {
            SampleStream traj_stream(4000 + m, 1, i);
            const Trajectory traj = sample_trajectory(random, params, random.perf_init(), h, traj_stream);
            max_norm = std::max(max_norm, gpomdp(traj, params).grad.norm());
        }
        push(ctx, make_report("estimator_norm_bound", "mdp=" + std::to_string(m), max_norm,
                              2.0 / sq(1.0 - gamma)));
    }

    // Momentum error contraction, enumerated on the bundled MDP with H = 2.
    SampleStream pair_stream(5150);
    const SoftmaxParams theta_prev = random_softmax(pair_stream, mdp.n_states(), mdp.n_actions(), 1.0);
    Mat stepped = theta_prev.theta();
    for (int s = 0; s < stepped.rows(); ++s)
        for (int a = 0; a < stepped.cols(); ++a) stepped(s, a) += 0.3 * (2.0 * pair_stream.uniform01() - 1.0);
    const SoftmaxParams theta_t(stepped);
    Vec u_prev = exact_truncated_gradient(mdp, theta_prev, mdp.opt_init(), 2);
    u_prev.array() += 0.2; // a deliberately biased previous estimate
    for (double beta : {0.15, 0.6, 1.0})
        push(ctx, momentum_contraction_check(mdp, theta_prev, theta_t, u_prev, beta, 2));
}

// --- weights ------------------------------------------------------------------

void suite_weights(SuiteContext& ctx) {
    const TabularMdp mdp = fixture_two_state();
    const int horizon = 3;

    // Optimizer-produced parameter pairs.
    RunConfig config;
    config.algorithm = Algorithm::storm_s;
    config.iterations = ctx.full ? 101 : 21;
    config.batch_size = 5;
    config.horizon = horizon;
    config.lambda = 0.05;
    config.mode = HyperMode::practical;
    config.practical = StepParams{0.5, 2.0, 8.0};
    config.seed = 99;
    const RunRecord run = run_storm_pg_s(mdp, config);

    double max_mean_gap = 0.0;
    double min_variance = 0.0;
    double max_w_variance = 0.0;
    std::vector<double> variances;
    std::vector<double> step_sq;
    for (std::size_t idx = 1; idx < run.thetas.size(); ++idx) {
        const SoftmaxParams prev(run.thetas[idx - 1]);
        const SoftmaxParams curr(run.thetas[idx]);
        const WeightMoments moments =
            enumerate_weight_moments(mdp, prev, curr, mdp.opt_init(), horizon);
        max_mean_gap = std::max(max_mean_gap, std::abs(moments.mean - 1.0));
        min_variance = std::min(min_variance, moments.variance);
        max_w_variance = std::max(max_w_variance, moments.variance);
        variances.push_back(moments.variance);
        step_sq.push_back((curr.theta() - prev.theta()).squaredNorm());
    }
    push(ctx, make_report("weight_mean_identity",
                          std::to_string(variances.size()) + " pairs", max_mean_gap, 1e-10));
    BoundReport nonneg = make_report("weight_variance_nonnegative", "", -min_variance, 0.0);
    nonneg.holds = min_variance >= -1e-15;
    push(ctx, std::move(nonneg));

    // Var[w] <= C_w^2 ||dtheta||^2 with W set to the enumerated run maximum.
    const double c_w_sq = horizon * (2.0 * horizon * 4.0 + 1.0) * (max_w_variance + 1.0);
    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < variances.size(); ++i)
        if (step_sq[i] > 0.0) worst_ratio = std::max(worst_ratio, variances[i] / (c_w_sq * step_sq[i]));
    BoundReport var_bound = make_report("weight_variance_bound",
                                        std::to_string(variances.size()) + " pairs", worst_ratio, 1.0);
    var_bound.constituents = {{"w_enumerated_max", max_w_variance}, {"c_w_sq", c_w_sq}};
    push(ctx, std::move(var_bound));

    // Importance-correction identity:
    // E_theta[g(theta) - w g(theta')] = grad J^H(theta) - grad J^H(theta').
    const SoftmaxParams theta_a(run.thetas.front());
    const SoftmaxParams theta_b(run.thetas.back());
    const Vec corrected = enumeration_expectation(
        mdp, theta_b, mdp.opt_init(), horizon, [&](const Trajectory& traj) {
            return (gpomdp(traj, theta_b).grad -
                    importance_weight(traj, theta_a, theta_b) * gpomdp(traj, theta_a).grad)
                .eval();
        });
    const Vec expected = exact_truncated_gradient(mdp, theta_b, mdp.opt_init(), horizon) -
                         exact_truncated_gradient(mdp, theta_a, mdp.opt_init(), horizon);
    push(ctx, make_report("weight_correction_identity", "",
                          (corrected - expected).cwiseAbs().maxCoeff(), 1e-9));
}

// --- gradients ------------------------------------------------------------------

void suite_gradients(SuiteContext& ctx) {
    const int n_mdps = ctx.full ? 5 : 2;
    const int thetas_per_mdp = ctx.full ? 4 : 2;
    for (int m = 0; m < n_mdps; ++m) {
        SampleStream gen(6000 + m);
        const TabularMdp mdp = ctx.custom_mdp && m == 0
                                   ? *ctx.custom_mdp
                                   : random_mdp(gen, 3 + m % 2, 2 + m % 2, 0.7 + 0.05 * m);
        for (int i = 0; i < thetas_per_mdp; ++i) {
            const SoftmaxParams theta = random_softmax(gen, mdp.n_states(), mdp.n_actions(), 1.5);
            const Vec exact = exact_policy_gradient(mdp, theta, mdp.perf_init());
            const Vec fd = finite_diff_gradient(
                [&](const Mat& t) {
                    return exact_return(mdp, policy_table(SoftmaxParams(t)), mdp.perf_init());
                },
                theta.theta());
            const double scale = std::max(1.0, exact.cwiseAbs().maxCoeff());
            push(ctx, make_report("exact_gradient_vs_fd",
                                  "mdp=" + std::to_string(m) + ",theta=" + std::to_string(i),
                                  (exact - fd).cwiseAbs().maxCoeff() / scale, 1e-6));
        }

        // Dual-route truncated gradient and the truncation-bias bound.
        SampleStream theta_gen(6500 + m);
        const SoftmaxParams theta = random_softmax(theta_gen, mdp.n_states(), mdp.n_actions(), 1.0);
        const int h_enum = std::min<int>(
            3, static_cast<int>(std::log(1e6) /
                                std::log(static_cast<double>(mdp.n_states()) * mdp.n_actions())));
        const Vec dp = exact_truncated_gradient(mdp, theta, mdp.perf_init(), h_enum);
        const Vec enumerated =
            exact_truncated_gradient_enumerated(mdp, theta, mdp.perf_init(), h_enum);
        push(ctx, make_report("truncated_gradient_dual_route", "mdp=" + std::to_string(m),
                              (dp - enumerated).cwiseAbs().maxCoeff(), 1e-9));
        for (int h : {1, 5, 25})
            push(ctx, truncation_bias_check(mdp, theta, h));

        // H large enough makes grad J^H match grad J.
        const int h_sat = static_cast<int>(
            std::ceil(std::log(1e-10 * (1.0 - mdp.discount())) / std::log(mdp.discount())));
        const Vec tail_gap = exact_truncated_gradient(mdp, theta, mdp.perf_init(), h_sat) -
                             exact_policy_gradient(mdp, theta, mdp.perf_init());
        push(ctx, make_report("truncated_gradient_saturation", "mdp=" + std::to_string(m),
                              tail_gap.norm(), 1e-9));
    }
}

// --- bounds ---------------------------------------------------------------------

void suite_bounds(SuiteContext& ctx) {
    // Descent lemma on randomized quadratics (and a trig instance).
    const int n_quadratic = ctx.full ? 1000 : 100;
    int violations = 0;
    BoundReport worst;
    worst.slack = std::numeric_limits<double>::infinity();
    SampleStream gen(7000);
    for (int i = 0; i < n_quadratic; ++i) {
        const int dim = 2 + static_cast<int>(gen.uniform01() * 4);
        Mat q(dim, dim);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) q(r, c) = 2.0 * gen.uniform01() - 1.0;
        q = Mat(0.5 * (q + q.transpose()));
        const SmoothFn f = neg_quadratic(q, Vec::Zero(dim));
        if (f.l_smooth <= 0.0) continue;
        Vec x(dim), u(dim);
        for (int d = 0; d < dim; ++d) {
            x[d] = 4.0 * gen.uniform01() - 2.0;
            u[d] = 4.0 * gen.uniform01() - 2.0;
        }
        const double eta = (0.1 + 0.9 * gen.uniform01()) / (2.0 * f.l_smooth);
        BoundReport report = descent_lemma_check(f, x, u, eta);
        if (!report.holds) ++violations;
        if (report.slack < worst.slack) worst = report;
    }
    worst.check_name = "descent_lemma_randomized";
    worst.instance_id = std::to_string(n_quadratic) + " quadratics, worst slack";
    worst.holds = violations == 0;
    worst.constituents["violations"] = violations;
    push(ctx, std::move(worst));

    SampleStream trig_gen(7100);
    Vec amp(3), freq(3), phase(3);
    for (int i = 0; i < 3; ++i) {
        amp[i] = 0.5 + trig_gen.uniform01();
        freq[i] = 0.5 + 2.0 * trig_gen.uniform01();
        phase[i] = 6.28 * trig_gen.uniform01();
    }
    const SmoothFn trig = trig_field(amp, freq, phase);
    Vec x0(3), u0(3);
    for (int i = 0; i < 3; ++i) {
        x0[i] = 2.0 * trig_gen.uniform01() - 1.0;
        u0[i] = 2.0 * trig_gen.uniform01() - 1.0;
    }
    push(ctx, descent_lemma_check(trig, x0, u0, 1.0 / (2.0 * trig.l_smooth)));

    // Smoothness of J and of the regularized objective.
    for (double gamma : {0.8, 0.9}) {
        SampleStream mdp_gen(7200 + static_cast<int>(gamma * 100));
        const TabularMdp mdp = random_mdp(mdp_gen, 3, 2, gamma);
        std::vector<SoftmaxParams> thetas;
        const int n_thetas = ctx.full ? 20 : 5;
        for (int i = 0; i < n_thetas; ++i)
            thetas.push_back(random_softmax(mdp_gen, mdp.n_states(), mdp.n_actions(), 1.5));
        push(ctx, smoothness_check(mdp, thetas, 0.1));
    }

    // Soft-max compatible-approximation error vanishes.
    const int n_compat = ctx.full ? 5 : 2;
    for (int m = 0; m < n_compat; ++m) {
        SampleStream gen_c(7300 + m);
        const TabularMdp mdp = random_mdp(gen_c, 3 + m % 2, 2 + m % 2, 0.75);
        const PolicyTable pi_star = optimal_policy(mdp).first;
        double worst_bias = 0.0;
        const int n_thetas = ctx.full ? 20 : 5;
        for (int i = 0; i < n_thetas; ++i) {
            const SoftmaxParams theta = random_softmax(gen_c, mdp.n_states(), mdp.n_actions(), 2.0);
            worst_bias = std::max(worst_bias, compatible_error(mdp, theta, pi_star).eps_bias);
        }
        push(ctx, make_report("softmax_eps_bias", "mdp=" + std::to_string(m), worst_bias, 1e-8));
    }

    // Lemma 1 after exact-gradient ascent to stationarity.
    const int n_lemma1 = ctx.full ? 5 : 2;
    for (int m = 0; m < n_lemma1; ++m) {
        SampleStream gen_l(7400 + m);
        const TabularMdp mdp = random_mdp(gen_l, 3, 2, 0.75);
        const double lambda = 0.2;
        const double tol = lambda / (2.0 * mdp.n_states() * mdp.n_actions());
        const SoftmaxParams stationary = ascend_regularized(mdp, lambda, tol, 200000);
        BoundReport report = lemma1_check(mdp, stationary, lambda);
        report.instance_id = "mdp=" + std::to_string(m);
        if (!report.applicable) report.holds = false; // ascent must have reached the gate
        push(ctx, std::move(report));
    }

    // Lemma 4 instances: softened optimal policy, uniform theta on the bandit.
    {
        const TabularMdp bandit = fixture_bandit(0.5);
        const PolicyTable pi_star = optimal_policy(bandit).first;
        push(ctx, lemma4_check(bandit, SoftmaxParams(1, 2), pi_star, 1e-6));

        SampleStream gen_4(7500);
        const TabularMdp mdp = random_mdp(gen_4, 3, 2, 0.8);
        const PolicyTable opt = optimal_policy(mdp).first;
        Mat softened(mdp.n_states(), mdp.n_actions());
        for (int s = 0; s < mdp.n_states(); ++s)
            for (int a = 0; a < mdp.n_actions(); ++a) softened(s, a) = opt.probs()(s, a) > 0.5 ? 5.0 : -5.0;
        BoundReport near_opt = lemma4_check(mdp, SoftmaxParams(softened), opt, 1e-6);
        near_opt.instance_id = "softened optimal";
        push(ctx, std::move(near_opt));
    }

    // Lemma 2 on a completed storm_s trace with the prescribed lambda.
    {
        const TabularMdp mdp = fixture_two_state();
        const double epsilon = 1.0;
        const double mismatch = mismatch_coefficient(mdp, optimal_policy(mdp).first);
        const double lambda = epsilon * (1.0 - mdp.discount()) / (4.0 * mismatch);
        RunConfig config;
        config.algorithm = Algorithm::storm_s;
        config.iterations = ctx.full ? 60 : 15;
        config.batch_size = 5;
        config.horizon = 10;
        config.lambda = lambda;
        config.mode = HyperMode::practical;
        config.practical = StepParams{0.5, 2.0, 8.0};
        config.seed = 11;
        const RunRecord run = run_storm_pg_s(mdp, config);
        push(ctx, lemma2_check(run, mdp, lambda, epsilon));
    }
}

} // namespace

VerifyReport run_verify_suite(const std::string& suite, const std::string& scale,
                              const std::optional<std::string>& mdp_path) {
    if (suite != "estimators" && suite != "weights" && suite != "gradients" && suite != "bounds" &&
        suite != "constants" && suite != "all")
        throw ConfigError("suite must be one of estimators|weights|gradients|bounds|constants|all");
    if (scale != "small" && scale != "full")
        throw ConfigError("scale must be small|full");

    VerifyReport report;
    report.suite = suite;
    report.scale = scale;

    SuiteContext ctx;
    ctx.full = scale == "full";
    ctx.checks = &report.checks;
    ctx.warnings = &report.warnings;

    if (mdp_path) {
        try {
            ctx.custom_mdp = load_mdp_json(*mdp_path, true);
            BoundReport ok = make_report("fixture_validation", *mdp_path, 0.0, 0.0);
            ok.holds = true;
            report.checks.push_back(std::move(ok));
        } catch (const std::exception& e) {
            BoundReport bad = make_report("fixture_validation", e.what(), 1.0, 0.0);
            bad.holds = false;
            report.checks.push_back(std::move(bad));
            report.all_hold = false;
            return report;
        }
    }

    if (suite == "constants" || suite == "all") suite_constants(ctx);
    if (suite == "estimators" || suite == "all") suite_estimators(ctx);
    if (suite == "weights" || suite == "all") suite_weights(ctx);
    if (suite == "gradients" || suite == "all") suite_gradients(ctx);
    if (suite == "bounds" || suite == "all") suite_bounds(ctx);

    for (const BoundReport& check : report.checks)
        if (check.applicable && !check.holds) report.all_hold = false;
    return report;
}

std::string verify_report_json(const VerifyReport& report) {
    nlohmann::json j;
    j["suite"] = report.suite;
    j["scale"] = report.scale;
    j["all_hold"] = report.all_hold;
    j["warnings"] = report.warnings;
    j["checks"] = nlohmann::json::array();
    for (const BoundReport& check : report.checks) {
        nlohmann::json entry;
        entry["check_name"] = check.check_name;
        entry["instance_id"] = check.instance_id;
        entry["lhs"] = check.lhs;
        entry["rhs"] = check.rhs;
        entry["holds"] = check.holds;
        entry["slack"] = check.slack;
        entry["applicable"] = check.applicable;
        entry["constituents"] = check.constituents;
        j["checks"].push_back(std::move(entry));
    }
    return j.dump(2);
}

} // namespace stormpg
