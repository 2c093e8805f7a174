#pragma once

#include "stormpg/common.hpp"

namespace stormpg {

/**
 * Analysis constants of the momentum schedule, derived from the score bounds
 * (m_g, m_h), the discount, the horizon, the weight-variance bound W, the
 * barrier coefficient lambda and the step scale k:
 *
 *   l_g      = M_h/(1-gamma)^2                 (estimator Lipschitz constant)
 *   g_bound  = M_g/(1-gamma)^2                 (estimator norm bound G)
 *   sigma    = G                               (estimator standard deviation bound)
 *   l_smooth = 2 M_g^2/(1-gamma)^3 + M_h/(1-gamma)^2
 *   l_lambda = L + lambda                      (smoothness of the regularized objective)
 *   c_w      = sqrt(H (2 H M_g^2 + M_h) (W+1)) (weight-variance coefficient)
 *   b_sq     = L_g^2 + G^2 C_w^2
 *   c        = 1/(3 k^3 L_lambda) + 96 b^2
 *   m        = max{2, (2 L_lambda k)^3, (c k / (2 L_lambda))^3}
 *   eta0     = k / m^{1/3}
 *
 * The definition of m forces eta0 <= 1/(2 L_lambda) and c eta0^2 <= 1; both
 * are re-verified after derivation. Passing lambda = 0 yields the constants
 * of the unregularized (Fisher-non-degenerate) schedule, which uses L in
 * place of L_lambda.
 */
struct ConstantsBundle {
    // inputs
    double m_g;
    double m_h;
    double gamma;
    int horizon;
    double w_bound;
    double lambda;
    double k;
    // derived
    double l_g;
    double g_bound;
    double sigma;
    double l_smooth;
    double l_lambda;
    double c_w;
    double b_sq;
    double c;
    double m;
    double eta0;
};

ConstantsBundle derive_constants(double m_g, double m_h, double gamma, int horizon, double w_bound,
                                 double lambda, double k);

/// The (k, c, m) triple the step/momentum schedule actually consumes; filled
/// from a ConstantsBundle in theory mode or supplied directly in practical mode.
struct StepParams {
    double k = 1.0;
    double c = 1.0;
    double m = 8.0;
};

StepParams step_params(const ConstantsBundle& bundle);

struct ScheduleStep {
    double eta_t;     // k / (m + t)^{1/3}
    double beta_next; // min(1, c eta_t^2); the clamp never binds for theory bundles
};

ScheduleStep schedule(int t, const StepParams& params);
ScheduleStep schedule(int t, const ConstantsBundle& bundle);

} // namespace stormpg
