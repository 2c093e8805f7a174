#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stormpg/fixtures.hpp"
#include "stormpg/oracle.hpp"

#include <cmath>

using namespace stormpg;

namespace {

TabularMdp zero_reward_mdp() {
    Mat transition(4, 2);
    transition << 0.6, 0.4, 0.3, 0.7, 0.5, 0.5, 0.2, 0.8;
    Mat reward = Mat::Zero(2, 2);
    Vec init(2);
    init << 0.5, 0.5;
    return TabularMdp(transition, reward, 0.8, init, init);
}

RunConfig practical_config(Algorithm algorithm, int iterations, std::uint64_t seed) {
    RunConfig config;
    config.algorithm = algorithm;
    config.iterations = iterations;
    config.batch_size = 4;
    config.horizon = 8;
    config.lambda = 0.05;
    config.mode = HyperMode::practical;
    config.practical = StepParams{0.4, 2.0, 8.0};
    config.seed = seed;
    return config;
}

} // namespace

TEST_CASE("derive_constants reproduces the closed-form values") {
    const ConstantsBundle b = derive_constants(2.0, 1.0, 0.9, 5, 1.0, 0.0, 1.0);
    CHECK(b.l_g == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(b.g_bound == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(b.sigma == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(b.l_smooth == doctest::Approx(8100.0).epsilon(1e-12));
    CHECK(b.c_w == doctest::Approx(std::sqrt(410.0)).epsilon(1e-12));
    CHECK(b.b_sq == doctest::Approx(100.0 * 100.0 + 200.0 * 200.0 * 410.0).epsilon(1e-12));

    SUBCASE("invariants forced by the definition of m") {
        for (double k : {0.2, 1.0, 3.0})
            for (double lambda : {0.0, 0.1, 2.0}) {
                const ConstantsBundle bundle = derive_constants(2.0, 1.0, 0.8, 31, 1.0, lambda, k);
                CHECK(bundle.eta0 <= 1.0 / (2.0 * bundle.l_lambda) * (1.0 + 1e-12));
                CHECK(bundle.c * sq(bundle.eta0) <= 1.0 + 1e-12);
                CHECK(bundle.m >= 2.0);
            }
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(derive_constants(2, 1, 1.0, 5, 1, 0, 1), ValidationError);
        CHECK_THROWS_AS(derive_constants(2, 1, 0.9, 0, 1, 0, 1), ValidationError);
        CHECK_THROWS_AS(derive_constants(2, 1, 0.9, 5, 0, 0, 1), ValidationError);
        CHECK_THROWS_AS(derive_constants(2, 1, 0.9, 5, 1, -0.1, 1), ValidationError);
        CHECK_THROWS_AS(derive_constants(2, 1, 0.9, 5, 1, 0, 0), ValidationError);
    }
    SUBCASE("W scaling of C_w") {
        const ConstantsBundle w0 = derive_constants(2, 1, 0.9, 5, 0.5, 0, 1);
        const ConstantsBundle w1 = derive_constants(2, 1, 0.9, 5, 2.0, 0, 1);
        CHECK(w0.c_w / w1.c_w == doctest::Approx(std::sqrt(1.5 / 3.0)).epsilon(1e-12));
    }
}

TEST_CASE("schedule: cube-root decay, monotonicity, beta range") {
    CHECK(schedule(1, StepParams{1.0, 1.0, 7.0}).eta_t == doctest::Approx(0.5).epsilon(1e-14));

    // Strict decay is resolvable at practical magnitudes of m.
    const StepParams practical{0.5, 2.0, 8.0};
    double prev = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= 2000; ++t) {
        const double eta = schedule(t, practical).eta_t;
        CHECK(eta < prev);
        prev = eta;
    }

    // Theory bundles push m to ~1e21, where eta_t is constant to the ulp; the
    // sequence must still be nonincreasing, bounded by 1/(2 L_lambda), with
    // beta in (0, 1].
    const ConstantsBundle bundle = derive_constants(2.0, 1.0, 0.9, 66, 1.0, 0.1, 1.0);
    prev = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= 2000; ++t) {
        const ScheduleStep step = schedule(t, bundle);
        CHECK(step.eta_t <= prev);
        CHECK(step.eta_t <= 1.0 / (2.0 * bundle.l_lambda) * (1 + 1e-12));
        CHECK(step.beta_next > 0.0);
        CHECK(step.beta_next <= 1.0);
        prev = step.eta_t;
    }
    CHECK_THROWS_AS(schedule(0, bundle), ValidationError);
}

TEST_CASE("storm_update: vanilla reduction, stale-parameter averaging, contraction") {
    const TabularMdp mdp = fixture_two_state();
    SampleStream gen(31);
    const SoftmaxParams theta_t = random_softmax(gen, 2, 2, 1.0);
    const SoftmaxParams theta_prev = [&] {
        Mat t = theta_t.theta();
        t.array() -= 0.3;
        t(0, 1) += 0.5;
        return SoftmaxParams(t);
    }();

    std::vector<Trajectory> batch;
    for (int i = 0; i < 6; ++i) {
        SampleStream stream(32, 2, i);
        batch.push_back(sample_trajectory(mdp, theta_t, mdp.opt_init(), 5, stream));
    }
    MomentumState prev;
    prev.u = Vec::Constant(4, 0.7);
    prev.t = 1;

    SUBCASE("beta = 1 gives the plain batch mean, bit for bit") {
        const MomentumState next = storm_update(prev, batch, theta_t, theta_prev, 1.0, std::nullopt);
        const Vec mean = batch_estimate(batch, theta_t, EstimatorKind::gpomdp).grad;
        CHECK((next.u - mean).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("identical parameters turn the update into an exponential average") {
        const double beta = 0.35;
        const MomentumState next = storm_update(prev, batch, theta_t, theta_t, beta, std::nullopt);
        const Vec mean = batch_estimate(batch, theta_t, EstimatorKind::gpomdp).grad;
        const Vec expected = beta * mean + (1.0 - beta) * prev.u;
        CHECK((next.u - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("enumerated expectation contracts the estimation error") {
        for (double beta : {0.2, 0.7, 1.0}) {
            const BoundReport report =
                momentum_contraction_check(mdp, theta_prev, theta_t, prev.u, beta, 2);
            CHECK(report.lhs <= 1e-9);
        }
    }
    SUBCASE("invalid beta and empty batches are rejected") {
        CHECK_THROWS_AS(storm_update(prev, batch, theta_t, theta_prev, 0.0, std::nullopt),
                        ValidationError);
        CHECK_THROWS_AS(storm_update(prev, batch, theta_t, theta_prev, 1.5, std::nullopt),
                        ValidationError);
        CHECK_THROWS_AS(storm_update(prev, {}, theta_t, theta_prev, 0.5, std::nullopt),
                        ValidationError);
    }
}

TEST_CASE("auto horizon tracks the discount") {
    CHECK(auto_horizon(0.8) == 31);
    CHECK(auto_horizon(0.9) == 66);
    CHECK(std::pow(0.8, auto_horizon(0.8)) <= 1e-3);
    CHECK(std::pow(0.8, auto_horizon(0.8) - 1) > 1e-3);
}

TEST_CASE("run loop: single-iteration record and config validation") {
    const TabularMdp mdp = fixture_benchmark();
    RunConfig config = practical_config(Algorithm::storm_s, 1, 5);
    const RunRecord record = run_storm_pg_s(mdp, config);
    CHECK(record.rows.size() == 1);
    CHECK(record.thetas.size() == 1);
    CHECK((record.final_theta - Mat::Zero(5, 3)).cwiseAbs().maxCoeff() == 0.0); // theta unchanged
    CHECK(record.rows[0].trajectories == 4);
    CHECK(record.rows[0].beta == 1.0);
    CHECK(record.theta_xi_index == 1);

    SUBCASE("storm_s rejects lambda = 0") {
        config.lambda = 0.0;
        CHECK_THROWS_AS(run_storm_pg_s(mdp, config), ConfigError);
    }
    SUBCASE("bad T, B, practical params") {
        RunConfig bad = practical_config(Algorithm::storm_s, 0, 5);
        CHECK_THROWS_AS(run_storm_pg_s(mdp, bad), ConfigError);
        bad = practical_config(Algorithm::storm_s, 2, 5);
        bad.batch_size = 0;
        CHECK_THROWS_AS(run_storm_pg_s(mdp, bad), ConfigError);
        bad = practical_config(Algorithm::storm_s, 2, 5);
        bad.practical.c = 0.0;
        CHECK_THROWS_AS(run_storm_pg_s(mdp, bad), ConfigError);
    }
    SUBCASE("storm_s refuses a mu with zeros") {
        Mat transition(4, 2);
        transition << 1, 0, 0, 1, 1, 0, 0, 1;
        Mat reward = Mat::Constant(2, 2, 0.5);
        Vec rho(2), mu(2);
        rho << 0.5, 0.5;
        mu << 1.0, 0.0;
        const TabularMdp degenerate(transition, reward, 0.8, rho, mu);
        CHECK_THROWS_WITH_AS(run_storm_pg_s(degenerate, config),
                             doctest::Contains("strictly positive"), ValidationError);
    }
}

TEST_CASE("zero-reward MDP: exact J stays 0 under every algorithm") {
    const TabularMdp mdp = zero_reward_mdp();
    for (Algorithm algorithm : {Algorithm::storm_s, Algorithm::vanilla}) {
        RunConfig config = practical_config(algorithm, 12, 9);
        if (algorithm == Algorithm::storm_s) config.lambda = 0.02;
        if (algorithm == Algorithm::vanilla) config.lambda = 0.0;
        const RunRecord record = run_algorithm(mdp, config);
        for (const IterRow& row : record.rows) {
            CHECK(row.j_exact == 0.0);
            CHECK(std::isfinite(row.u_norm));
        }
    }
}

TEST_CASE("vanilla equals storm when beta is pinned at 1") {
    const TabularMdp mdp = fixture_benchmark();
    RunConfig storm = practical_config(Algorithm::storm_s, 10, 77);
    storm.practical.c = 1e30; // beta_{t+1} = min(1, c eta^2) = 1 for every t
    RunConfig vanilla = storm;
    vanilla.algorithm = Algorithm::vanilla;

    const RunRecord storm_record = run_storm_pg_s(mdp, storm);
    const RunRecord vanilla_record = vanilla_pg_baseline(mdp, vanilla);
    REQUIRE(storm_record.thetas.size() == vanilla_record.thetas.size());
    for (std::size_t t = 0; t < storm_record.thetas.size(); ++t)
        CHECK((storm_record.thetas[t] - vanilla_record.thetas[t]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((storm_record.final_theta - vanilla_record.final_theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vanilla batch mean converges to the exact truncated gradient (LLN)") {
    const TabularMdp mdp = fixture_two_state();
    const SoftmaxParams theta(2, 2);
    const int horizon = 10;
    const Vec exact = exact_truncated_gradient(mdp, theta, mdp.opt_init(), horizon);

    const int B = 20000;
    std::vector<Trajectory> batch;
    batch.reserve(B);
    for (int i = 0; i < B; ++i) {
        SampleStream stream(123, 1, i);
        batch.push_back(sample_trajectory(mdp, theta, mdp.opt_init(), horizon, stream));
    }
    const Vec mean = batch_estimate(batch, theta, EstimatorKind::gpomdp).grad;
    double trace_cov = 0.0;
    for (const Trajectory& traj : batch)
        trace_cov += (gpomdp(traj, theta).grad - exact).squaredNorm();
    trace_cov /= B;
    // E||mean - exact||^2 = tr(cov)/B; allow a generous multiple of it.
    CHECK((mean - exact).squaredNorm() <= 9.0 * trace_cov / B);
}

TEST_CASE("runs are deterministic and account for trajectories exactly") {
    const TabularMdp mdp = fixture_benchmark();
    const RunConfig config = practical_config(Algorithm::storm_s, 7, 2024);
    const RunRecord a = run_storm_pg_s(mdp, config);
    const RunRecord b = run_storm_pg_s(mdp, config);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].j_exact == b.rows[i].j_exact);
        CHECK(a.rows[i].u_norm == b.rows[i].u_norm);
        CHECK(a.rows[i].err_norm_exact == b.rows[i].err_norm_exact);
        CHECK(a.rows[i].trajectories == config.batch_size * (static_cast<long>(i) + 1));
    }
    CHECK((a.final_theta - b.final_theta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.theta_xi_index == b.theta_xi_index);
    CHECK(a.theta_xi_index >= 1);
    CHECK(a.theta_xi_index <= config.iterations);
}

TEST_CASE("storm_f logs Fisher diagnostics and improves the bandit") {
    const TabularMdp bandit = fixture_bandit(0.5);
    RunConfig config;
    config.algorithm = Algorithm::storm_f;
    config.iterations = 40;
    config.batch_size = 8;
    config.horizon = 12;
    config.mode = HyperMode::practical;
    config.practical = StepParams{0.3, 2.0, 8.0};

    std::vector<double> final_j;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        config.seed = seed;
        const RunRecord record = run_storm_pg_f(bandit, config);
        final_j.push_back(record.rows.back().j_exact);
        for (const IterRow& row : record.rows) {
            CHECK(std::isfinite(row.mu_f_restricted));
            CHECK(row.eps_bias <= 1e-8);
            CHECK(row.lemma4_lhs <= row.lemma4_rhs + 1e-9 * std::max(1.0, std::abs(row.lemma4_rhs)));
        }
    }
    std::sort(final_j.begin(), final_j.end());
    const double j_uniform = 1.0; // uniform policy on r = (1, 0) at gamma = 0.5
    CHECK(final_j[final_j.size() / 2] > j_uniform);
}

TEST_CASE("divergence guard aborts with a diagnostic") {
    const TabularMdp mdp = fixture_two_state();
    RunConfig config = practical_config(Algorithm::storm_s, 50, 3);
    config.practical = StepParams{1e7, 1.0, 8.0}; // absurd step scale
    config.theta_guard = 1e3;
    CHECK_THROWS_WITH_AS(run_storm_pg_s(mdp, config), doctest::Contains("diverged"), NumericError);
}

TEST_CASE("theory-mode run uses the derived schedule and stays microscopic") {
    const TabularMdp mdp = fixture_two_state();
    RunConfig config;
    config.algorithm = Algorithm::storm_s;
    config.iterations = 5;
    config.batch_size = 2;
    config.horizon = 10;
    config.lambda = 0.05;
    config.mode = HyperMode::theory;
    config.seed = 4;
    const RunRecord record = run_storm_pg_s(mdp, config);
    CHECK(record.params_in_force.k == record.theory_bundle.k);
    CHECK(record.params_in_force.c == record.theory_bundle.c);
    CHECK(record.params_in_force.m == record.theory_bundle.m);
    for (const IterRow& row : record.rows) {
        CHECK(row.eta <= record.theory_bundle.eta0);
        CHECK(row.beta <= 1.0);
        CHECK(row.beta > 0.0);
    }
    // Steps this small cannot move theta by more than a hair.
    CHECK(record.final_theta.cwiseAbs().maxCoeff() <= 1e-4);
}
