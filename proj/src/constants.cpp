#include "stormpg/constants.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stormpg {

ConstantsBundle derive_constants(double m_g, double m_h, double gamma, int horizon, double w_bound,
                                 double lambda, double k) {
    if (!(m_g > 0.0) || !(m_h > 0.0))
        throw ValidationError("derive_constants: M_g and M_h must be positive");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ValidationError("derive_constants: gamma must lie in (0, 1), got " + std::to_string(gamma));
    if (horizon < 1) throw ValidationError("derive_constants: horizon must be >= 1");
    if (!(w_bound > 0.0)) throw ValidationError("derive_constants: W must be positive");
    if (lambda < 0.0) throw ValidationError("derive_constants: lambda must be >= 0");
    if (!(k > 0.0)) throw ValidationError("derive_constants: k must be positive");

    ConstantsBundle b;
    b.m_g = m_g;
    b.m_h = m_h;
    b.gamma = gamma;
    b.horizon = horizon;
    b.w_bound = w_bound;
    b.lambda = lambda;
    b.k = k;

    const double one_minus = 1.0 - gamma;
    b.l_g = m_h / sq(one_minus);
    b.g_bound = m_g / sq(one_minus);
    b.sigma = b.g_bound;
    b.l_smooth = 2.0 * sq(m_g) / cube(one_minus) + m_h / sq(one_minus);
    b.l_lambda = b.l_smooth + lambda;
    b.c_w = std::sqrt(horizon * (2.0 * horizon * sq(m_g) + m_h) * (w_bound + 1.0));
    b.b_sq = sq(b.l_g) + sq(b.g_bound) * sq(b.c_w);
    b.c = 1.0 / (3.0 * cube(k) * b.l_lambda) + 96.0 * b.b_sq;
    b.m = std::max({2.0, cube(2.0 * b.l_lambda * k), cube(b.c * k / (2.0 * b.l_lambda))});
    b.eta0 = k / std::cbrt(b.m);

    // Forced by the definition of m; a breach indicates an internal error.
    if (!(b.eta0 > 0.0) || b.eta0 > 1.0 / (2.0 * b.l_lambda) * (1.0 + 1e-12))
        throw NumericError("derive_constants: eta0 <= 1/(2 L_lambda) violated");
    if (b.c * sq(b.eta0) > 1.0 + 1e-12)
        throw NumericError("derive_constants: c eta0^2 <= 1 violated");
    for (double v : {b.l_g, b.g_bound, b.sigma, b.l_smooth, b.l_lambda, b.c_w, b.b_sq, b.c, b.m, b.eta0})
        if (!(v > 0.0) || !std::isfinite(v))
            throw NumericError("derive_constants: derived constant not strictly positive/finite");
    return b;
}

StepParams step_params(const ConstantsBundle& bundle) {
    return StepParams{bundle.k, bundle.c, bundle.m};
}

ScheduleStep schedule(int t, const StepParams& params) {
    if (t < 1) throw ValidationError("schedule: t must be >= 1");
    const double eta = params.k / std::cbrt(params.m + static_cast<double>(t));
    // Theory bundles satisfy c eta^2 <= 1 by construction, so the clamp only
    // ever binds for practical overrides; it keeps beta admissible there.
    return ScheduleStep{eta, std::min(1.0, params.c * sq(eta))};
}

ScheduleStep schedule(int t, const ConstantsBundle& bundle) {
    return schedule(t, step_params(bundle));
}

} // namespace stormpg
