#pragma once

#include "stormpg/constants.hpp"
#include "stormpg/sampling.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stormpg {

enum class Algorithm { storm_s, storm_f, vanilla };
enum class HyperMode { theory, practical };

const char* algorithm_name(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

struct RunConfig {
    Algorithm algorithm = Algorithm::storm_s;
    int iterations = 100; // T
    int batch_size = 10;  // B
    int horizon = 0;      // 0 = auto: smallest H with gamma^H <= 1e-3
    double lambda = 0.0;
    double k = 1.0;
    HyperMode mode = HyperMode::practical;
    StepParams practical{};
    double w_bound = 1.0;
    std::optional<WeightClip> clip;
    std::uint64_t seed = 0;
    double theta_guard = 1e6; // sup-norm divergence guard
};

struct MomentumState {
    Vec u;
    int t = 0;
    double eta = 0.0;
    double beta = 0.0;
};

/**
 * One momentum update
 *   u_t = beta_t mean_i g(tau_i|theta_t)
 *       + (1-beta_t) [u_{t-1} + mean_i (g(tau_i|theta_t) - w_i g(tau_i|theta_{t-1}))]
 * with w_i = w(tau_i | theta_prev, theta_t). The batch must have been sampled
 * under theta_t. Both means are reduced in trajectory-index order and the
 * means are formed before scaling by beta, so beta_t = 1 reproduces the
 * vanilla batch mean bit-for-bit.
 */
MomentumState storm_update(const MomentumState& state, std::span<const Trajectory> batch,
                           const SoftmaxParams& theta_t, const SoftmaxParams& theta_prev,
                           double beta_t, const std::optional<WeightClip>& clip);

/// One logged iteration. Exact quantities come from the dynamic-programming
/// oracles, not from samples.
struct IterRow {
    int t;
    double eta;
    double beta;
    double j_exact;         // J_rho(theta_t)
    double l_lambda_exact;  // L_{lambda,mu}(theta_t); J_rho for storm_f
    double grad_norm_exact; // ||grad L_{lambda,mu}|| (storm_s/vanilla) or ||grad J_rho|| (storm_f)
    double u_norm;
    double err_norm_exact;  // ||u_t - grad J^H(theta_t)|| under the sampling measure
    double max_var_w;       // running max of the within-batch weight variance
    long trajectories;      // cumulative trajectories consumed: B * t
    // storm_f diagnostics (NaN for the other algorithms)
    double mu_f_restricted;
    double eps_bias;
    double lemma4_lhs;
    double lemma4_rhs;
};

struct RunRecord {
    Algorithm algorithm = Algorithm::storm_s;
    std::vector<IterRow> rows;
    std::vector<Mat> thetas; // theta_t aligned with rows
    Mat final_theta;
    int theta_xi_index = 0;  // uniform over {1..T}, drawn from the reserved substream
    Mat theta_xi;
    std::uint64_t master_seed = 0;
    ConstantsBundle theory_bundle{}; // derived for reference in every mode
    HyperMode mode = HyperMode::practical;
    StepParams params_in_force{};
    int horizon_used = 0;
    double lambda = 0.0;
    double h_theorem = 0.0; // horizon the asymptotic analysis prescribes, absolute constant 1 (NaN when n/a)
};

/// Validates a run configuration against an MDP (ranges, practical block,
/// clip bounds, the positive-mu and lambda > 0 requirements of storm_s).
void validate_run_config(const TabularMdp& mdp, const RunConfig& config);

/// Momentum loop with the log-barrier gradient, sampling under mu.
RunRecord run_storm_pg_s(const TabularMdp& mdp, const RunConfig& config);

/// Momentum loop without the barrier, sampling under rho; rows additionally
/// carry the restricted Fisher eigenvalue, eps_bias and both Lemma-4 sides.
RunRecord run_storm_pg_f(const TabularMdp& mdp, const RunConfig& config);

/// Same loop with u_t = the plain batch mean; the comparison arm.
RunRecord vanilla_pg_baseline(const TabularMdp& mdp, const RunConfig& config);

RunRecord run_algorithm(const TabularMdp& mdp, const RunConfig& config);

/// Smallest H >= 1 with gamma^H <= 1e-3 (so the truncation bias is below
/// 1e-3 of the value scale 1/(1-gamma)).
int auto_horizon(double gamma);

} // namespace stormpg
