#include "stormpg/oracle.hpp"

#include <cmath>
#include <limits>

namespace stormpg {

ExactGradients exact_gradients(const TabularMdp& mdp, const SoftmaxParams& params,
                               const RegularizerSpec& reg, int horizon) {
    ExactGradients out;
    out.grad_j = exact_policy_gradient(mdp, params, mdp.perf_init());
    out.grad_j_h = exact_truncated_gradient(mdp, params, mdp.opt_init(), horizon);
    out.grad_l = exact_regularized_gradient(mdp, params, reg, mdp.opt_init());
    const double g_bound = 2.0 / sq(1.0 - mdp.discount());
    if (out.grad_j.norm() > g_bound + 1e-8)
        throw NumericError("exact_gradients: ||grad J|| exceeds the score-based norm bound");
    return out;
}

Vec exact_policy_gradient(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init) {
    const int S = mdp.n_states();
    const int A = mdp.n_actions();
    const PolicyTable pi = policy_table(params);
    const ValueBundle values = policy_evaluation(mdp, pi);
    const VisitationBundle vis = discounted_visitation(mdp, pi, init);

    Vec grad = Vec::Zero(static_cast<long>(S) * A);
    const double scale = 1.0 / (1.0 - mdp.discount());
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            grad[param_index(s, a, A)] = scale * vis.state_dist[s] * pi.probs()(s, a) * values.adv(s, a);
    return grad;
}

Vec exact_truncated_gradient(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                             int horizon) {
    const int S = mdp.n_states();
    const int A = mdp.n_actions();
    Vec grad = Vec::Zero(static_cast<long>(S) * A);
    if (horizon == 0) return grad;
    if (horizon < 0) throw ValidationError("exact_truncated_gradient: horizon must be >= 0");

    const PolicyTable pi = policy_table(params);

    // q_by_len[n] is the n-step action value (its own discounting starts at 0).
    std::vector<Mat> q_by_len(horizon + 1);
    q_by_len[0] = Mat::Zero(S, A);
    Vec v = Vec::Zero(S);
    for (int n = 1; n <= horizon; ++n) {
        Mat q(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                q(s, a) = mdp.reward()(s, a) + mdp.discount() * mdp.transition().row(s * A + a).dot(v);
        for (int s = 0; s < S; ++s) v[s] = pi.probs().row(s).dot(q.row(s));
        q_by_len[n] = std::move(q);
    }

    // grad J^H = sum_h gamma^h sum_{s,a} m_h(s) pi(a|s) Q_{H-h}(s,a) score(s,a);
    // the per-state block of sum_a c_a score(s,a) is c - (sum_a c_a) pi(.|s).
    const std::vector<Vec> marginals = state_marginals(mdp, pi, init, horizon);
    double disc = 1.0;
    for (int h = 0; h < horizon; ++h) {
        const Mat& q = q_by_len[horizon - h];
        for (int s = 0; s < S; ++s) {
            if (marginals[h][s] == 0.0) continue;
            double total = 0.0;
            for (int a = 0; a < A; ++a) {
                const double c = disc * marginals[h][s] * pi.probs()(s, a) * q(s, a);
                grad[param_index(s, a, A)] += c;
                total += c;
            }
            for (int a = 0; a < A; ++a) grad[param_index(s, a, A)] -= total * pi.probs()(s, a);
        }
        disc *= mdp.discount();
    }
    return grad;
}

Vec exact_truncated_gradient_enumerated(const TabularMdp& mdp, const SoftmaxParams& params,
                                        const Vec& init, int horizon, double max_outcomes) {
    if (horizon == 0) return Vec::Zero(static_cast<long>(mdp.n_states()) * mdp.n_actions());
    return enumeration_expectation(
        mdp, params, init, horizon,
        [&](const Trajectory& traj) { return gpomdp(traj, params).grad; }, max_outcomes);
}

Vec exact_regularized_gradient(const TabularMdp& mdp, const SoftmaxParams& params,
                               const RegularizerSpec& reg, const Vec& init) {
    return exact_policy_gradient(mdp, params, init) + log_barrier(params, reg).grad;
}

Vec exact_truncated_regularized_gradient(const TabularMdp& mdp, const SoftmaxParams& params,
                                         const RegularizerSpec& reg, const Vec& init, int horizon) {
    return exact_truncated_gradient(mdp, params, init, horizon) + log_barrier(params, reg).grad;
}

double default_fd_step(const Mat& theta) {
    const double eps = std::numeric_limits<double>::epsilon();
    const double scale = theta.size() ? theta.cwiseAbs().maxCoeff() : 0.0;
    return std::cbrt(eps) * (1.0 + scale);
}

Vec finite_diff_gradient(const std::function<double(const Mat&)>& f, const Mat& theta, double step) {
    if (step <= 0.0) step = default_fd_step(theta);
    const int S = static_cast<int>(theta.rows());
    const int A = static_cast<int>(theta.cols());
    Vec grad(static_cast<long>(S) * A);
    Mat probe = theta;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double saved = probe(s, a);
            probe(s, a) = saved + step;
            const double up = f(probe);
            probe(s, a) = saved - step;
            const double down = f(probe);
            probe(s, a) = saved;
            grad[param_index(s, a, A)] = (up - down) / (2.0 * step);
        }
    return grad;
}

Mat finite_diff_hessian(const std::function<Vec(const Mat&)>& grad_fn, const Mat& theta, double step) {
    if (step <= 0.0) step = default_fd_step(theta);
    const int S = static_cast<int>(theta.rows());
    const int A = static_cast<int>(theta.cols());
    const long n = static_cast<long>(S) * A;
    Mat hess(n, n);
    Mat probe = theta;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double saved = probe(s, a);
            probe(s, a) = saved + step;
            const Vec up = grad_fn(probe);
            probe(s, a) = saved - step;
            const Vec down = grad_fn(probe);
            probe(s, a) = saved;
            hess.col(param_index(s, a, A)) = (up - down) / (2.0 * step);
        }
    return 0.5 * (hess + hess.transpose());
}

double spectral_norm(const Mat& symmetric) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(symmetric, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

BoundReport make_report(std::string check_name, std::string instance_id, double lhs, double rhs) {
    BoundReport report;
    report.check_name = std::move(check_name);
    report.instance_id = std::move(instance_id);
    report.lhs = lhs;
    report.rhs = rhs;
    report.slack = rhs - lhs;
    report.holds = lhs <= rhs + 1e-9 * std::max(1.0, std::abs(rhs));
    return report;
}

BoundReport truncation_bias_check(const TabularMdp& mdp, const SoftmaxParams& params, int horizon) {
    const double m_g = 2.0;
    const double gamma = mdp.discount();
    const Vec diff = exact_truncated_gradient(mdp, params, mdp.perf_init(), horizon) -
                     exact_policy_gradient(mdp, params, mdp.perf_init());
    const double lhs = diff.norm();
    const double rhs =
        m_g * ((horizon + 1.0) / (1.0 - gamma) + gamma / sq(1.0 - gamma)) * std::pow(gamma, horizon);
    BoundReport report = make_report("truncation_bias", "H=" + std::to_string(horizon), lhs, rhs);
    report.constituents = {{"m_g", m_g}, {"gamma", gamma}, {"horizon", static_cast<double>(horizon)}};
    return report;
}

namespace {

/// Moore-Penrose solve of F x = b dropping eigenvalues <= 1e-10 max(1, lambda_max).
Vec pinv_solve(const Mat& fisher, const Vec& rhs) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(fisher);
    const Vec evals = eig.eigenvalues();
    const double cutoff = 1e-10 * std::max(1.0, evals.maxCoeff());
    Vec coeffs = eig.eigenvectors().transpose() * rhs;
    for (int i = 0; i < coeffs.size(); ++i)
        coeffs[i] = evals[i] > cutoff ? coeffs[i] / evals[i] : 0.0;
    return eig.eigenvectors() * coeffs;
}

} // namespace

CompatReport compatible_error(const TabularMdp& mdp, const SoftmaxParams& params,
                              const PolicyTable& pi_star) {
    const FisherReport fisher = fisher_information(mdp, params, mdp.perf_init());
    const Vec grad_j = exact_policy_gradient(mdp, params, mdp.perf_init());
    const Vec u_star = pinv_solve(fisher.fisher, grad_j);

    const ValueBundle values = policy_evaluation(mdp, policy_table(params));
    const VisitationBundle vis_star = discounted_visitation(mdp, pi_star, mdp.perf_init());

    double eps_bias = 0.0;
    const double one_minus = 1.0 - mdp.discount();
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const double weight = vis_star.state_action_dist(s, a);
            if (weight == 0.0) continue;
            const double fit = one_minus * u_star.dot(score(params, s, a));
            eps_bias += weight * sq(values.adv(s, a) - fit);
        }
    return CompatReport{u_star, eps_bias, fisher.condition_number};
}

BoundReport lemma4_check(const TabularMdp& mdp, const SoftmaxParams& params,
                         const PolicyTable& pi_star, double mu_f_threshold) {
    const double m_g = 2.0;
    const FisherReport fisher = fisher_information(mdp, params, mdp.perf_init());
    const CompatReport compat = compatible_error(mdp, params, pi_star);
    const double grad_norm = exact_policy_gradient(mdp, params, mdp.perf_init()).norm();
    const double j_star = exact_return(mdp, pi_star, mdp.perf_init());
    const double j_theta = exact_return(mdp, policy_table(params), mdp.perf_init());

    const double lhs = j_star - j_theta;
    const double rhs = std::sqrt(std::max(compat.eps_bias, 0.0)) / (1.0 - mdp.discount()) +
                       (m_g / fisher.mu_f_restricted) * grad_norm;
    BoundReport report = make_report("lemma4_gradient_domination", "", lhs, rhs);
    report.applicable = fisher.mu_f_restricted > mu_f_threshold;
    report.constituents = {{"eps_bias", compat.eps_bias},
                           {"mu_f", fisher.mu_f},
                           {"mu_f_restricted", fisher.mu_f_restricted},
                           {"grad_j_norm", grad_norm},
                           {"j_star", j_star},
                           {"m_g", m_g}};
    return report;
}

BoundReport lemma1_check(const TabularMdp& mdp, const SoftmaxParams& params, double lambda) {
    const double S = mdp.n_states();
    const double A = mdp.n_actions();
    const double eps_opt = lambda / (2.0 * S * A); // always from the live lambda
    const double grad_norm =
        exact_regularized_gradient(mdp, params, RegularizerSpec{lambda}, mdp.opt_init()).norm();

    auto [pi_star, j_star] = optimal_policy(mdp);
    const double mismatch = mismatch_coefficient(mdp, pi_star);
    const double j_theta = exact_return(mdp, policy_table(params), mdp.perf_init());

    BoundReport report = make_report("lemma1_log_barrier_domination", "",
                                     j_star - j_theta,
                                     2.0 * lambda / (1.0 - mdp.discount()) * mismatch);
    report.applicable = grad_norm <= eps_opt;
    report.constituents = {{"grad_l_norm", grad_norm},
                           {"eps_opt", eps_opt},
                           {"mismatch", mismatch},
                           {"lambda", lambda},
                           {"j_star", j_star}};
    return report;
}

BoundReport lemma2_check(const RunRecord& run, const TabularMdp& mdp, double lambda, double epsilon) {
    const double S = mdp.n_states();
    const double A = mdp.n_actions();
    auto [pi_star, j_star] = optimal_policy(mdp);
    const double mismatch = mismatch_coefficient(mdp, pi_star);
    const double prescribed = epsilon * (1.0 - mdp.discount()) / (4.0 * mismatch);

    const int total = static_cast<int>(run.thetas.size());
    if (total == 0) throw ValidationError("lemma2_check: empty run record");
    const RegularizerSpec reg{lambda};

    double j_sum = 0.0;
    double eta_grad_sq_sum = 0.0;
    int i_plus = 0;
    const double eps_opt = lambda / (2.0 * S * A);
    for (int idx = 0; idx < total; ++idx) {
        const SoftmaxParams theta(run.thetas[idx]);
        j_sum += exact_return(mdp, policy_table(theta), mdp.perf_init());
        const double g = exact_regularized_gradient(mdp, theta, reg, mdp.opt_init()).norm();
        eta_grad_sq_sum += run.rows[idx].eta * sq(g);
        if (g >= eps_opt) ++i_plus;
    }
    const double eta_last = run.rows.back().eta;
    const double lhs = j_star - j_sum / total;
    const double rhs = sq(mismatch) * 64.0 * sq(S) * sq(A) * eta_grad_sq_sum /
                           (sq(epsilon) * total * eta_last * cube(1.0 - mdp.discount())) +
                       epsilon / 2.0;

    BoundReport report = make_report("lemma2_trace_bound", "T=" + std::to_string(total), lhs, rhs);
    report.applicable = std::abs(lambda - prescribed) <= 1e-9 * std::max(std::abs(prescribed), 1e-300);
    report.constituents = {{"mismatch", mismatch},
                           {"lambda", lambda},
                           {"lambda_prescribed", prescribed},
                           {"epsilon", epsilon},
                           {"i_plus_count", static_cast<double>(i_plus)},
                           {"eps_opt", eps_opt},
                           {"sum_eta_grad_sq", eta_grad_sq_sum},
                           {"eta_T", eta_last},
                           {"j_star", j_star}};
    return report;
}

BoundReport lemma3_budget(std::span<const RunRecord> runs, const TabularMdp& mdp,
                          const ConstantsBundle& bundle, int batch_size) {
    if (runs.empty()) throw ValidationError("lemma3_budget: no runs supplied");
    const double S = mdp.n_states();
    const double A = mdp.n_actions();
    const RegularizerSpec reg{bundle.lambda};

    bool theory_mode = true;
    std::vector<double> per_run_sums;
    per_run_sums.reserve(runs.size());
    for (const RunRecord& run : runs) {
        if (run.mode != HyperMode::theory) theory_mode = false;
        double sum = 0.0;
        for (std::size_t idx = 0; idx < run.thetas.size(); ++idx) {
            const SoftmaxParams theta(run.thetas[idx]);
            const double g = exact_truncated_regularized_gradient(mdp, theta, reg, mdp.opt_init(),
                                                                  run.horizon_used)
                                 .norm();
            sum += run.rows[idx].eta * sq(g);
        }
        per_run_sums.push_back(sum);
    }
    double lhs = 0.0;
    for (double v : per_run_sums) lhs += v;
    lhs /= static_cast<double>(per_run_sums.size());
    double var = 0.0;
    for (double v : per_run_sums) var += sq(v - lhs);
    const double stderr_mc =
        per_run_sums.size() > 1
            ? std::sqrt(var / (per_run_sums.size() - 1.0) / static_cast<double>(per_run_sums.size()))
            : 0.0;

    const double t_count = static_cast<double>(runs.front().rows.size());
    // The unknown L^H(theta*) - L^H(theta_1): theta_1 is uniform here, so the
    // gap is at most 1/(1-gamma) + lambda log|A|.
    const double gap_ub = 1.0 / (1.0 - bundle.gamma) + bundle.lambda * std::log(A);
    const double log_t = std::log(t_count + 2.0);
    const double gamma1 = sq(bundle.c) * sq(bundle.sigma) * cube(bundle.k) * log_t / (44.0 * bundle.b_sq) +
                          std::cbrt(bundle.m) * sq(bundle.sigma) / (88.0 * bundle.b_sq * bundle.k) +
                          gap_ub / 22.0;
    const double gamma2 = 48.0 / 11.0 * gap_ub;
    const double gamma3 = sq(bundle.sigma) * std::cbrt(bundle.m) / (44.0 * bundle.b_sq * bundle.k) +
                          sq(bundle.c) * sq(bundle.sigma) * cube(bundle.k) * log_t / (22.0 * bundle.b_sq);
    const double rhs = gamma2 + (gamma1 + gamma3) / batch_size;

    BoundReport report = make_report("lemma3_budget", "seeds=" + std::to_string(runs.size()), lhs, rhs);
    report.applicable = theory_mode;
    report.constituents = {{"gamma1", gamma1},
                           {"gamma2", gamma2},
                           {"gamma3", gamma3},
                           {"l_gap_ub", gap_ub},
                           {"batch_size", static_cast<double>(batch_size)},
                           {"mc_stderr", stderr_mc},
                           {"n_seeds", static_cast<double>(runs.size())},
                           {"iterations", t_count}};
    return report;
}

BoundReport momentum_contraction_check(const TabularMdp& mdp, const SoftmaxParams& theta_prev,
                                       const SoftmaxParams& theta_t, const Vec& u_prev,
                                       double beta_t, int horizon) {
    MomentumState prev;
    prev.u = u_prev;
    prev.t = 1;
    Vec expected_u = Vec::Zero(u_prev.size());
    enumerate_trajectories(mdp, theta_t, mdp.opt_init(), horizon,
                           [&](const Trajectory& traj, double prob) {
                               const Trajectory batch[1] = {traj};
                               expected_u += prob *
                                             storm_update(prev, batch, theta_t, theta_prev, beta_t,
                                                          std::nullopt)
                                                 .u;
                           });
    const Vec e_t = expected_u - exact_truncated_gradient(mdp, theta_t, mdp.opt_init(), horizon);
    const Vec e_prev = u_prev - exact_truncated_gradient(mdp, theta_prev, mdp.opt_init(), horizon);
    const double lhs = (e_t - (1.0 - beta_t) * e_prev).cwiseAbs().maxCoeff();
    BoundReport report = make_report("momentum_contraction", "beta=" + std::to_string(beta_t), lhs, 1e-9);
    report.constituents = {{"beta", beta_t},
                           {"e_prev_norm", e_prev.norm()},
                           {"e_t_norm", e_t.norm()}};
    return report;
}

SmoothFn neg_quadratic(Mat q, Vec lin) {
    Mat sym = 0.5 * (q + q.transpose());
    const double l = spectral_norm(sym);
    auto value = [sym, lin](const Vec& x) { return -0.5 * x.dot(sym * x) + lin.dot(x); };
    auto grad = [sym, lin](const Vec& x) { return (-(sym * x) + lin).eval(); };
    return SmoothFn{"neg_quadratic", l, value, grad};
}

SmoothFn trig_field(Vec amp, Vec freq, Vec phase) {
    double l = 0.0;
    for (int i = 0; i < amp.size(); ++i) l = std::max(l, std::abs(amp[i]) * sq(freq[i]));
    auto value = [amp, freq, phase](const Vec& x) {
        double v = 0.0;
        for (int i = 0; i < amp.size(); ++i) v += amp[i] * std::sin(freq[i] * x[i] + phase[i]);
        return v;
    };
    auto grad = [amp, freq, phase](const Vec& x) {
        Vec g(x.size());
        for (int i = 0; i < amp.size(); ++i) g[i] = amp[i] * freq[i] * std::cos(freq[i] * x[i] + phase[i]);
        return g;
    };
    return SmoothFn{"trig_field", l, value, grad};
}

BoundReport descent_lemma_check(const SmoothFn& f, const Vec& x, const Vec& u, double eta) {
    if (!(eta > 0.0) || eta > 1.0 / (2.0 * f.l_smooth))
        throw ValidationError("descent_lemma_check: eta must lie in (0, 1/(2L)]");
    const Vec e = u - f.grad(x);
    const double lhs = f.value(x) + eta / 4.0 * u.squaredNorm() - eta / 2.0 * e.squaredNorm();
    const double rhs = f.value((x + eta * u).eval());
    BoundReport report = make_report("descent_lemma", f.name, lhs, rhs);
    report.constituents = {{"l_smooth", f.l_smooth}, {"eta", eta}};
    return report;
}

BoundReport smoothness_check(const TabularMdp& mdp, std::span<const SoftmaxParams> thetas,
                             double lambda) {
    const double m_g = 2.0;
    const double m_h = 1.0;
    const double one_minus = 1.0 - mdp.discount();
    const double l_smooth = 2.0 * sq(m_g) / cube(one_minus) + m_h / sq(one_minus);
    const double softmax_smooth = 8.0 / cube(one_minus) + 2.0 * lambda / mdp.n_states();
    const RegularizerSpec reg{lambda};

    double max_j = 0.0;
    double max_l = 0.0;
    for (const SoftmaxParams& theta : thetas) {
        const Mat hess_j = finite_diff_hessian(
            [&](const Mat& t) { return exact_policy_gradient(mdp, SoftmaxParams(t), mdp.perf_init()); },
            theta.theta());
        max_j = std::max(max_j, spectral_norm(hess_j));
        const Mat hess_l = finite_diff_hessian(
            [&](const Mat& t) {
                return exact_regularized_gradient(mdp, SoftmaxParams(t), reg, mdp.opt_init());
            },
            theta.theta());
        max_l = std::max(max_l, spectral_norm(hess_l));
    }
    BoundReport report = make_report("smoothness", "samples=" + std::to_string(thetas.size()),
                                     max_j, l_smooth);
    report.constituents = {{"hessian_j_max", max_j},
                           {"hessian_l_lambda_max", max_l},
                           {"softmax_smoothness", softmax_smooth},
                           {"lambda", lambda}};
    return report;
}

SoftmaxParams ascend_regularized(const TabularMdp& mdp, double lambda, double grad_tol,
                                 int max_iters, std::optional<SoftmaxParams> start) {
    const RegularizerSpec reg{lambda};
    SoftmaxParams theta = start ? *std::move(start)
                                : SoftmaxParams(mdp.n_states(), mdp.n_actions());
    double value = regularized_objective(mdp, theta, reg, mdp.opt_init());
    double step = 1.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        const Vec grad = exact_regularized_gradient(mdp, theta, reg, mdp.opt_init());
        const double grad_norm = grad.norm();
        if (grad_norm <= grad_tol) return theta;

        step *= 2.0; // let the accepted step grow back after cautious phases
        for (;;) {
            const Mat probe = theta.theta() + step * SoftmaxParams::from_flat(grad, mdp.n_states(),
                                                                              mdp.n_actions())
                                                         .theta();
            const double probe_value = regularized_objective(mdp, SoftmaxParams(probe), reg,
                                                             mdp.opt_init());
            if (probe_value >= value + 0.5 * step * sq(grad_norm)) {
                theta = SoftmaxParams(probe);
                value = probe_value;
                break;
            }
            step *= 0.5;
            if (step < 1e-18)
                throw NumericError("ascend_regularized: line search collapsed");
        }
    }
    throw NumericError("ascend_regularized: gradient norm did not reach tolerance within " +
                       std::to_string(max_iters) + " iterations");
}

} // namespace stormpg
