#include "stormpg/fixtures.hpp"

namespace stormpg {

TabularMdp fixture_two_state() {
    Mat transition(4, 2);
    transition << 0.9, 0.1, // (s=0, a=0)
        0.2, 0.8,           // (s=0, a=1)
        0.7, 0.3,           // (s=1, a=0)
        0.4, 0.6;           // (s=1, a=1)
    Mat reward(2, 2);
    reward << 0.1, 0.9, 0.8, 0.2;
    Vec rho(2), mu(2);
    rho << 0.6, 0.4;
    mu << 0.6, 0.4;
    return TabularMdp(std::move(transition), std::move(reward), 0.8, std::move(rho), std::move(mu));
}

TabularMdp fixture_bandit(double gamma) {
    Mat transition(2, 1);
    transition << 1.0, 1.0;
    Mat reward(1, 2);
    reward << 1.0, 0.0;
    Vec init = Vec::Ones(1);
    return TabularMdp(std::move(transition), std::move(reward), gamma, init, init);
}

TabularMdp fixture_benchmark() {
    // Slippery chain: action 0 drifts left, 1 stays, 2 drifts right. Literal
    // entries so the matrix is bit-identical to data/mdp_bench_5x3.json.
    Mat transition(15, 5);
    transition << //
        0.95, 0.05, 0.00, 0.00, 0.00, // (0, left)
        0.85, 0.15, 0.00, 0.00, 0.00, // (0, stay)
        0.20, 0.80, 0.00, 0.00, 0.00, // (0, right)
        0.80, 0.15, 0.05, 0.00, 0.00, // (1, left)
        0.15, 0.70, 0.15, 0.00, 0.00, // (1, stay)
        0.05, 0.15, 0.80, 0.00, 0.00, // (1, right)
        0.00, 0.80, 0.15, 0.05, 0.00, // (2, left)
        0.00, 0.15, 0.70, 0.15, 0.00, // (2, stay)
        0.00, 0.05, 0.15, 0.80, 0.00, // (2, right)
        0.00, 0.00, 0.80, 0.15, 0.05, // (3, left)
        0.00, 0.00, 0.15, 0.70, 0.15, // (3, stay)
        0.00, 0.00, 0.05, 0.15, 0.80, // (3, right)
        0.00, 0.00, 0.00, 0.80, 0.20, // (4, left)
        0.00, 0.00, 0.00, 0.15, 0.85, // (4, stay)
        0.00, 0.00, 0.00, 0.05, 0.95; // (4, right)
    Mat reward(5, 3);
    reward << //
        0.02, 0.30, 0.02, //
        0.02, 0.02, 0.02, //
        0.02, 0.02, 0.02, //
        0.02, 0.02, 0.02, //
        0.02, 1.00, 0.02;
    Vec init = Vec::Constant(5, 0.2);
    return TabularMdp(std::move(transition), std::move(reward), 0.8, init, init);
}

TabularMdp random_mdp(SampleStream& stream, int n_states, int n_actions, double gamma) {
    Mat transition(n_states * n_actions, n_states);
    for (int row = 0; row < transition.rows(); ++row) {
        double sum = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) {
            const double mass = 0.05 + stream.uniform01();
            transition(row, s2) = mass;
            sum += mass;
        }
        transition.row(row) /= sum;
    }
    Mat reward(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) reward(s, a) = stream.uniform01();

    auto positive_dist = [&] {
        Vec d(n_states);
        double sum = 0.0;
        for (int s = 0; s < n_states; ++s) {
            d[s] = 0.2 + stream.uniform01();
            sum += d[s];
        }
        return (d / sum).eval();
    };
    return TabularMdp(std::move(transition), std::move(reward), gamma, positive_dist(), positive_dist());
}

SoftmaxParams random_softmax(SampleStream& stream, int n_states, int n_actions, double scale) {
    Mat theta(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) theta(s, a) = scale * (2.0 * stream.uniform01() - 1.0);
    return SoftmaxParams(std::move(theta));
}

PolicyTable random_policy(SampleStream& stream, int n_states, int n_actions) {
    Mat probs(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            probs(s, a) = 0.05 + stream.uniform01();
            sum += probs(s, a);
        }
        probs.row(s) /= sum;
    }
    return PolicyTable(std::move(probs));
}

} // namespace stormpg
