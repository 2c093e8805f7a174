#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stormpg/fixtures.hpp"
#include "stormpg/mdp.hpp"
#include "stormpg/rng.hpp"

#include <cmath>

using namespace stormpg;

namespace {

TabularMdp one_state_mdp(double reward, double gamma) {
    Mat transition(1, 1);
    transition << 1.0;
    Mat r(1, 1);
    r << reward;
    Vec init = Vec::Ones(1);
    return TabularMdp(std::move(transition), std::move(r), gamma, init, init);
}

PolicyTable uniform_policy(int n_states, int n_actions) {
    return PolicyTable(Mat::Constant(n_states, n_actions, 1.0 / n_actions));
}

} // namespace

TEST_CASE("validation accepts the minimal MDP and rejects bad rows") {
    CHECK_NOTHROW(one_state_mdp(0.5, 0.9));

    Mat bad_row(1, 1);
    bad_row << 0.9;
    Mat r(1, 1);
    r << 0.5;
    Vec init = Vec::Ones(1);
    CHECK_THROWS_WITH_AS(TabularMdp(bad_row, r, 0.9, init, init),
                         doctest::Contains("transition row (s=0, a=0)"), ValidationError);

    Mat ok(1, 1);
    ok << 1.0;
    Mat bad_reward(1, 1);
    bad_reward << 1.5;
    CHECK_THROWS_WITH_AS(TabularMdp(ok, bad_reward, 0.9, init, init),
                         doctest::Contains("reward out of [0,1]"), ValidationError);
    CHECK_THROWS_AS(TabularMdp(ok, r, 1.0, init, init), ValidationError);
    CHECK_THROWS_AS(TabularMdp(ok, r, 0.0, init, init), ValidationError);
}

TEST_CASE("soft-max runs demand a strictly positive mu") {
    Mat transition(4, 2);
    transition << 1, 0, 1, 0, 0, 1, 0, 1;
    Mat reward = Mat::Zero(2, 2);
    Vec rho(2), mu(2);
    rho << 0.5, 0.5;
    mu << 1.0, 0.0;
    CHECK_NOTHROW(TabularMdp(transition, reward, 0.9, rho, mu));
    CHECK_THROWS_WITH_AS(TabularMdp(transition, reward, 0.9, rho, mu, true),
                         doctest::Contains("strictly positive"), ValidationError);
}

TEST_CASE("probability rows are renormalized once at load") {
    Mat transition(1, 1);
    transition << 1.0 + 5e-13;
    Mat r = Mat::Zero(1, 1);
    Vec init = Vec::Ones(1);
    const TabularMdp mdp(transition, r, 0.9, init, init);
    CHECK(mdp.transition()(0, 0) == 1.0);
}

TEST_CASE("json loader reports missing fields and parses the bundled files") {
    CHECK_THROWS_WITH_AS(parse_mdp_json(R"({"n_states": 1})", false),
                         doctest::Contains("n_actions"), ConfigError);

    const TabularMdp loaded = load_mdp_json(std::string(DATA_DIR) + "/mdp_2state.json");
    const TabularMdp embedded = fixture_two_state();
    CHECK(loaded.n_states() == embedded.n_states());
    CHECK(loaded.n_actions() == embedded.n_actions());
    CHECK((loaded.transition() - embedded.transition()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.reward() - embedded.reward()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.discount() == embedded.discount());
    CHECK((loaded.perf_init() - embedded.perf_init()).cwiseAbs().maxCoeff() == 0.0);

    const TabularMdp bench = load_mdp_json(std::string(DATA_DIR) + "/mdp_bench_5x3.json");
    const TabularMdp bench_embedded = fixture_benchmark();
    CHECK((bench.transition() - bench_embedded.transition()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((bench.reward() - bench_embedded.reward()).cwiseAbs().maxCoeff() == 0.0);

    const TabularMdp bandit = load_mdp_json(std::string(DATA_DIR) + "/mdp_bandit.json");
    CHECK(bandit.n_states() == 1);
    CHECK(bandit.reward()(0, 0) == 1.0);
}

TEST_CASE("policy evaluation solves closed forms") {
    SUBCASE("constant reward gives the geometric series") {
        const TabularMdp mdp = one_state_mdp(1.0, 0.9);
        const ValueBundle values = policy_evaluation(mdp, uniform_policy(1, 1));
        CHECK(values.v[0] == doctest::Approx(10.0).epsilon(1e-12));
    }
    SUBCASE("two-action bandit, uniform policy, gamma 0.5") {
        const TabularMdp mdp = fixture_bandit(0.5);
        const ValueBundle values = policy_evaluation(mdp, uniform_policy(1, 2));
        CHECK(values.v[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(values.q(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(values.q(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(values.adv(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(values.adv(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
    }
}

TEST_CASE("policy evaluation matches a truncated Monte-Carlo rollout oracle") {
    SampleStream gen(42);
    const double gamma = 0.6;
    const TabularMdp mdp = random_mdp(gen, 3, 2, gamma);
    const PolicyTable pi = random_policy(gen, 3, 2);
    const ValueBundle values = policy_evaluation(mdp, pi);

    const int horizon = static_cast<int>(std::ceil(std::log(1e-9) / std::log(gamma)));
    const double truncation_bias = std::pow(gamma, horizon) / (1.0 - gamma);
    const int n_rollouts = 200000;
    for (int s0 = 0; s0 < mdp.n_states(); ++s0) {
        double sum = 0.0;
        double sum_sq = 0.0;
        SampleStream stream(1000 + s0);
        for (int i = 0; i < n_rollouts; ++i) {
            double ret = 0.0;
            double disc = 1.0;
            int s = s0;
            for (int h = 0; h < horizon; ++h) {
                const int a = stream.categorical(pi.probs().row(s));
                ret += disc * mdp.reward()(s, a);
                disc *= gamma;
                s = stream.categorical(mdp.transition().row(s * mdp.n_actions() + a));
            }
            sum += ret;
            sum_sq += ret * ret;
        }
        const double mean = sum / n_rollouts;
        const double var = sum_sq / n_rollouts - mean * mean;
        const double stderr_mc = std::sqrt(var / n_rollouts);
        CHECK(std::abs(mean - values.v[s0]) <= 3.0 * stderr_mc + truncation_bias);
    }
}

TEST_CASE("Bellman residual stays below 1e-10 on random instances") {
    for (int trial = 0; trial < 10; ++trial) {
        SampleStream gen(100 + trial);
        const TabularMdp mdp = random_mdp(gen, 4, 3, 0.5 + 0.45 * gen.uniform01());
        const PolicyTable pi = random_policy(gen, 4, 3);
        const ValueBundle values = policy_evaluation(mdp, pi);
        const Vec residual = values.v - (policy_reward(mdp, pi) +
                                         mdp.discount() * policy_transition(mdp, pi) * values.v);
        CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(values.v.cwiseAbs().maxCoeff() <= 1.0 / (1.0 - mdp.discount()) + 1e-9);
        CHECK((values.adv - (values.q - values.v.replicate(1, 3))).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("discounted visitation: closed forms and the forward-propagation oracle") {
    SUBCASE("single state") {
        const TabularMdp mdp = one_state_mdp(0.0, 0.7);
        const VisitationBundle vis = discounted_visitation(mdp, uniform_policy(1, 1), mdp.perf_init());
        CHECK(vis.state_dist[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("absorbing two-state chain at gamma 0.5") {
        Mat transition(2, 2);
        transition << 0.0, 1.0, // state 0 forced to 1
            0.0, 1.0;           // state 1 absorbing
        Mat reward = Mat::Zero(2, 1);
        Vec init(2);
        init << 1.0, 0.0;
        Vec mu(2);
        mu << 0.5, 0.5;
        const TabularMdp mdp(transition, reward, 0.5, init, mu);
        const VisitationBundle vis = discounted_visitation(mdp, uniform_policy(2, 1), mdp.perf_init());
        CHECK(vis.state_dist[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(vis.state_dist[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("linear solve equals the truncated forward sum") {
        SampleStream gen(7);
        const TabularMdp mdp = random_mdp(gen, 4, 2, 0.85);
        const PolicyTable pi = random_policy(gen, 4, 2);
        const VisitationBundle vis = discounted_visitation(mdp, pi, mdp.perf_init());
        CHECK(std::abs(vis.state_dist.sum() - 1.0) <= 1e-10);

        const int steps = static_cast<int>(std::ceil(std::log(1e-12) / std::log(0.85))) + 1;
        const std::vector<Vec> marginals = state_marginals(mdp, pi, mdp.perf_init(), steps);
        Vec partial = Vec::Zero(4);
        double disc = 1.0;
        for (const Vec& m : marginals) {
            partial += disc * m;
            disc *= mdp.discount();
        }
        partial *= 1.0 - mdp.discount();
        CHECK((vis.state_dist - partial).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((vis.state_action_dist -
               Mat(vis.state_dist.asDiagonal() * pi.probs())).cwiseAbs().maxCoeff() == 0.0);
        CHECK(vis.state_action_dist.minCoeff() >= 0.0);
    }
}

TEST_CASE("returns: closed forms and the truncation inequality") {
    const TabularMdp constant = one_state_mdp(1.0, 0.5);
    const PolicyTable pi = uniform_policy(1, 1);
    CHECK(exact_return(constant, pi, constant.perf_init()) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(exact_return(one_state_mdp(0.0, 0.5), pi, constant.perf_init()) == 0.0);

    const TabularMdp bandit = fixture_bandit(0.5);
    CHECK(exact_return(bandit, uniform_policy(1, 2), bandit.perf_init()) ==
          doctest::Approx(1.0).epsilon(1e-12));

    CHECK(truncated_return(constant, pi, constant.perf_init(), 3) ==
          doctest::Approx(1.75).epsilon(1e-12));
    SUBCASE("one-step return is the expected immediate reward") {
        SampleStream gen(11);
        const TabularMdp mdp = random_mdp(gen, 3, 2, 0.9);
        const PolicyTable policy = random_policy(gen, 3, 2);
        double expected = 0.0;
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a)
                expected += mdp.perf_init()[s] * policy.probs()(s, a) * mdp.reward()(s, a);
        CHECK(truncated_return(mdp, policy, mdp.perf_init(), 1) ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("J - J^H shrinks below gamma^H/(1-gamma)") {
        SampleStream gen(13);
        const TabularMdp mdp = random_mdp(gen, 3, 3, 0.8);
        const PolicyTable policy = random_policy(gen, 3, 3);
        const double j = exact_return(mdp, policy, mdp.perf_init());
        const int h = static_cast<int>(std::ceil(std::log(1e-10) / std::log(0.8)));
        const double jh = truncated_return(mdp, policy, mdp.perf_init(), h);
        CHECK(jh <= j + 1e-12);
        CHECK(j - jh <= 1e-9 / (1.0 - mdp.discount()));
        for (int small_h : {1, 2, 5})
            CHECK(j - truncated_return(mdp, policy, mdp.perf_init(), small_h) <=
                  std::pow(0.8, small_h) / 0.2 + 1e-12);
    }
}

TEST_CASE("optimal policy: bandit, tie-break, dominance, greedy stability") {
    SUBCASE("bandit prefers the rewarding arm") {
        const TabularMdp bandit = fixture_bandit(0.5);
        const auto [pi, j_star] = optimal_policy(bandit);
        CHECK(pi.probs()(0, 0) == 1.0);
        CHECK(j_star == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("action-independent rewards resolve ties to action 0") {
        Mat transition(4, 2);
        transition << 0.5, 0.5, 0.5, 0.5, 0.3, 0.7, 0.3, 0.7;
        Mat reward(2, 2);
        reward << 0.4, 0.4, 0.9, 0.9;
        Vec init(2);
        init << 0.5, 0.5;
        const TabularMdp mdp(transition, reward, 0.9, init, init);
        const auto [pi, j_star] = optimal_policy(mdp);
        CHECK(pi.probs()(0, 0) == 1.0);
        CHECK(pi.probs()(1, 0) == 1.0);
    }
    SUBCASE("optimal return dominates random stochastic policies") {
        SampleStream gen(17);
        const TabularMdp mdp = random_mdp(gen, 4, 3, 0.85);
        const auto [pi_star, j_star] = optimal_policy(mdp);
        for (int i = 0; i < 100; ++i) {
            const PolicyTable pi = random_policy(gen, 4, 3);
            CHECK(exact_return(mdp, pi, mdp.perf_init()) <= j_star + 1e-10);
        }
    }
    SUBCASE("one more Bellman backup does not change the greedy argmax") {
        SampleStream gen(19);
        const TabularMdp mdp = random_mdp(gen, 5, 3, 0.9);
        const auto [pi_star, j_star] = optimal_policy(mdp);
        const ValueBundle values = policy_evaluation(mdp, pi_star);
        Vec backed_up(5);
        for (int s = 0; s < 5; ++s) {
            double best = -1e300;
            for (int a = 0; a < 3; ++a)
                best = std::max(best, mdp.reward()(s, a) +
                                          mdp.discount() *
                                              mdp.transition().row(s * 3 + a).dot(values.v));
            backed_up[s] = best;
        }
        for (int s = 0; s < 5; ++s) {
            int greedy = 0;
            double best = -1e300;
            for (int a = 0; a < 3; ++a) {
                const double q = mdp.reward()(s, a) +
                                 mdp.discount() * mdp.transition().row(s * 3 + a).dot(backed_up);
                if (q > best) {
                    best = q;
                    greedy = a;
                }
            }
            CHECK(pi_star.probs()(s, greedy) == 1.0);
        }
    }
}

TEST_CASE("mismatch coefficient: closed forms and brute-force recomputation") {
    SUBCASE("single state gives 1") {
        const TabularMdp mdp = one_state_mdp(0.3, 0.9);
        CHECK(mismatch_coefficient(mdp, uniform_policy(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("componentwise quotient") {
        SampleStream gen(23);
        const TabularMdp mdp = random_mdp(gen, 4, 2, 0.8);
        const auto [pi_star, j_star] = optimal_policy(mdp);
        const Vec d = discounted_visitation(mdp, pi_star, mdp.perf_init()).state_dist;
        double brute = 0.0;
        for (int s = 0; s < 4; ++s) brute = std::max(brute, d[s] / mdp.opt_init()[s]);
        CHECK(mismatch_coefficient(mdp, pi_star) == doctest::Approx(brute).epsilon(1e-14));
        CHECK(mismatch_coefficient(mdp, pi_star) > 0.0);
    }
    SUBCASE("zero mu entry is rejected") {
        Mat transition(2, 2);
        transition << 1, 0, 0, 1;
        Mat reward = Mat::Zero(2, 1);
        Vec rho(2), mu(2);
        rho << 0.5, 0.5;
        mu << 1.0, 0.0;
        const TabularMdp mdp(transition, reward, 0.9, rho, mu);
        CHECK_THROWS_AS(mismatch_coefficient(mdp, uniform_policy(2, 1)), ValidationError);
    }
}

TEST_CASE("performance difference lemma holds on random policy pairs") {
    for (int trial = 0; trial < 5; ++trial) {
        SampleStream gen(300 + trial);
        const TabularMdp mdp = random_mdp(gen, 4, 3, 0.6 + 0.3 * gen.uniform01());
        const PolicyTable pi_a = random_policy(gen, 4, 3);
        const PolicyTable pi_b = random_policy(gen, 4, 3);
        const ValueBundle values_b = policy_evaluation(mdp, pi_b);
        const VisitationBundle vis_a = discounted_visitation(mdp, pi_a, mdp.perf_init());
        double lhs = 0.0;
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) lhs += vis_a.state_action_dist(s, a) * values_b.adv(s, a);
        const double rhs = (1.0 - mdp.discount()) *
                           (exact_return(mdp, pi_a, mdp.perf_init()) -
                            exact_return(mdp, pi_b, mdp.perf_init()));
        CHECK(std::abs(lhs - rhs) <= 1e-9);
    }
}

TEST_CASE("conditioning warning trips above gamma 0.999") {
    CHECK_FALSE(one_state_mdp(0.1, 0.99).conditioning_warning());
    CHECK(one_state_mdp(0.1, 0.9995).conditioning_warning());
}
