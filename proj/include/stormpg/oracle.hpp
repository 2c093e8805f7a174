#pragma once

#include "stormpg/enumeration.hpp"
#include "stormpg/optimizer.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>

namespace stormpg {

// ---------------------------------------------------------------------------
// Exact gradients
// ---------------------------------------------------------------------------

/// The three exact gradients at one theta: grad J_rho, grad J^H under the
/// optimization measure, and grad L_{lambda,mu}.
struct ExactGradients {
    Vec grad_j;
    Vec grad_j_h;
    Vec grad_l;
};

ExactGradients exact_gradients(const TabularMdp& mdp, const SoftmaxParams& params,
                               const RegularizerSpec& reg, int horizon);

/// Policy-gradient-theorem oracle:
/// grad[s,a] = 1/(1-gamma) d_init(s) pi(a|s) A(s,a), assembled from the dense
/// DP quantities.
Vec exact_policy_gradient(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init);

/// Exact gradient of the truncated return J^H by a finite-horizon DP
/// recursion (state marginals forward, n-step action values backward).
/// H = 0 returns the zero vector.
Vec exact_truncated_gradient(const TabularMdp& mdp, const SoftmaxParams& params, const Vec& init,
                             int horizon);

/// Second, independent route to grad J^H: probability-weighted GPOMDP over the
/// exhaustively enumerated outcome tree. Guarded by the enumeration size.
Vec exact_truncated_gradient_enumerated(const TabularMdp& mdp, const SoftmaxParams& params,
                                        const Vec& init, int horizon, double max_outcomes = 1e6);

/// grad L_{lambda,init} = grad J_init + barrier gradient.
Vec exact_regularized_gradient(const TabularMdp& mdp, const SoftmaxParams& params,
                               const RegularizerSpec& reg, const Vec& init);

/// grad L^H_{lambda,init} = grad J^H_init + barrier gradient.
Vec exact_truncated_regularized_gradient(const TabularMdp& mdp, const SoftmaxParams& params,
                                         const RegularizerSpec& reg, const Vec& init, int horizon);

/// Central-difference step: cbrt(machine epsilon) scaled by 1 + ||theta||_inf.
double default_fd_step(const Mat& theta);

/// Componentwise central differences of a scalar field over the logits.
Vec finite_diff_gradient(const std::function<double(const Mat&)>& f, const Mat& theta,
                         double step = 0.0);

/// Symmetrized central differences of a gradient field; used for the
/// smoothness checks, where the exact gradient oracle is available.
Mat finite_diff_hessian(const std::function<Vec(const Mat&)>& grad_fn, const Mat& theta,
                        double step = 0.0);

double spectral_norm(const Mat& symmetric);

// ---------------------------------------------------------------------------
// Bound reports
// ---------------------------------------------------------------------------

/// One verified inequality. holds is lhs <= rhs + 1e-9 max(1, |rhs|);
/// applicable = false marks a gated check whose precondition was not met
/// (reported, never counted as a failure). constituents carries every named
/// scalar of the printed formula so a second path can recompute them.
struct BoundReport {
    std::string check_name;
    std::string instance_id;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    double slack = 0.0;
    bool applicable = true;
    std::map<std::string, double> constituents;
};

BoundReport make_report(std::string check_name, std::string instance_id, double lhs, double rhs);

/// ||grad J^H - grad J||_2 <= M_g ((H+1)/(1-gamma) + gamma/(1-gamma)^2) gamma^H
/// with M_g = 2, both gradients exact.
BoundReport truncation_bias_check(const TabularMdp& mdp, const SoftmaxParams& params, int horizon);

/**
 * Compatible function approximation quantities: u* is the minimum-norm
 * solution F_rho(theta)^+ grad J_rho(theta) (pseudo-inverse, eigenvalues
 * below 1e-10 max(1, lambda_max) dropped) and
 * eps_bias = sum_{s,a} v_rho^{pi*}(s,a) (A(s,a) - (1-gamma) u*' score(s,a))^2.
 */
struct CompatReport {
    Vec u_star;
    double eps_bias;
    double fisher_cond;
};

CompatReport compatible_error(const TabularMdp& mdp, const SoftmaxParams& params,
                              const PolicyTable& pi_star);

/// Gradient domination for Fisher-non-degenerate policies:
/// J(pi*) - J(theta) <= sqrt(eps_bias)/(1-gamma) + (M_g/mu_F) ||grad J_rho||
/// with the restricted Fisher eigenvalue standing in for mu_F. Not applicable
/// when that eigenvalue is at or below mu_f_threshold.
BoundReport lemma4_check(const TabularMdp& mdp, const SoftmaxParams& params,
                         const PolicyTable& pi_star, double mu_f_threshold = 1e-10);

/// Log-barrier gradient domination: whenever ||grad L_{lambda,mu}(theta)|| <=
/// lambda/(2|S||A|), J(pi*) - J_rho(theta) <= 2 lambda mismatch/(1-gamma).
/// Reported not-applicable when the gradient precondition fails.
BoundReport lemma1_check(const TabularMdp& mdp, const SoftmaxParams& params, double lambda);

/// Pathwise optimality-gap bound over a completed trace, applicable when
/// lambda = epsilon (1-gamma)/(4 mismatch). All per-iterate quantities are
/// recomputed exactly from the stored thetas; constituents include |I+|.
BoundReport lemma2_check(const RunRecord& run, const TabularMdp& mdp, double lambda, double epsilon);

/// Seed-averaged budget sum_t eta_t ||grad L^H_{lambda,mu}(theta_t)||^2 vs
/// Gamma_2 + (Gamma_1+Gamma_3)/B. The unknown L^H(theta*) - L^H(theta_1) is
/// upper-bounded by 1/(1-gamma) + lambda log|A| (uniform theta_1). A soft,
/// expectation-level check: constituents carry the Monte-Carlo standard error.
BoundReport lemma3_budget(std::span<const RunRecord> runs, const TabularMdp& mdp,
                          const ConstantsBundle& bundle, int batch_size);

/// Enumerated one-step contraction of the momentum error: with the parameter
/// pair and the previous estimate held fixed, E[u_t] - grad J^H(theta_t)
/// equals (1 - beta_t)(u_prev - grad J^H(theta_prev)) exactly. The
/// expectation runs storm_update over every single-trajectory batch of the
/// outcome tree under theta_t.
BoundReport momentum_contraction_check(const TabularMdp& mdp, const SoftmaxParams& theta_prev,
                                       const SoftmaxParams& theta_t, const Vec& u_prev,
                                       double beta_t, int horizon);

/// Synthetic smooth test function with a known smoothness constant.
struct SmoothFn {
    std::string name;
    double l_smooth;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
};

/// f(x) = -x'Qx/2 + lin'x with Q symmetric; L = ||Q||_2.
SmoothFn neg_quadratic(Mat q, Vec lin);

/// f(x) = sum_i amp_i sin(freq_i x_i + phase_i); L = max |amp_i| freq_i^2.
SmoothFn trig_field(Vec amp, Vec freq, Vec phase);

/// f(x + eta u) >= f(x) + (eta/4)||u||^2 - (eta/2)||u - grad f(x)||^2 for
/// 0 < eta <= 1/(2L); reported with lhs/rhs swapped into <= form.
BoundReport descent_lemma_check(const SmoothFn& f, const Vec& x, const Vec& u, double eta);

/// Finite-difference Hessian spectral norm of J_rho at each sample theta vs
/// L = 2 M_g^2/(1-gamma)^3 + M_h/(1-gamma)^2; constituents also report the
/// direct soft-max smoothness constant 8/(1-gamma)^3 + 2 lambda/|S| against
/// the Hessian of L_{lambda,mu}.
BoundReport smoothness_check(const TabularMdp& mdp, std::span<const SoftmaxParams> thetas,
                             double lambda);

/// Exact-gradient ascent on L_{lambda,mu} with Armijo backtracking until
/// ||grad L|| <= grad_tol; throws NumericError if max_iters is exhausted.
SoftmaxParams ascend_regularized(const TabularMdp& mdp, double lambda, double grad_tol,
                                 int max_iters, std::optional<SoftmaxParams> start = std::nullopt);

} // namespace stormpg
