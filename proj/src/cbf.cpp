#include "stefan/cbf.hpp"

#include <algorithm>
#include <cmath>

#include "stefan/kernels.hpp"

namespace stefan {

void SetpointSpec::validate(double L, double Tm) const {
    if (!(s_r > 0.0 && s_r < L)) throw StefanError(ErrorCode::kInvalidParameter, "setpoint must lie in (0, L)");
    if (T_star && !(*T_star > Tm)) {
        throw StefanError(ErrorCode::kInvalidParameter, "temperature ceiling must exceed the melting temperature");
    }
    if (q_star && !(*q_star > 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "flux ceiling must be positive");
}

std::optional<double> SetpointSpec::flux_ceiling(const MaterialProperties& liquid) const {
    std::optional<double> q;
    if (T_star) q = liquid.k / s_r * (*T_star - liquid.Tm);
    if (q_star) q = q ? std::min(*q, *q_star) : *q_star;
    return q;
}

double sigma_one_phase(const OnePhaseState& state, const MaterialProperties& mat, const SetpointSpec& spec) {
    const double sensible = mat.rho * mat.cp * state.s() * integrate_profile(state.theta(), state.dxi());
    const double latent = mat.rho * mat.dH * (state.s() - spec.s_r);
    return -(sensible + latent);
}

double sigma_two_phase(const TwoPhaseState& state, const TwoPhaseMaterial& mat, const SetpointSpec& spec) {
    const double h = state.dxi();
    const double liquid = mat.liquid.rho * mat.liquid.cp * state.s() * integrate_profile(state.theta_l(), h);
    const double solid = mat.solid.rho * mat.solid.cp * (state.L() - state.s()) * integrate_profile(state.theta_s(), h);
    return -(liquid + solid + mat.gamma() * (state.s() - spec.s_r));
}

CbfBundle cbf_bundle(double sigma, double h_min, const ActuatorState& act, const CbfParams& params) {
    CbfBundle b{.h1 = sigma, .h2 = act.qc, .h3 = -act.qc + params.c1 * sigma, .h_min = h_min, .c1 = params.c1};
    if (params.q_bar) b.h2_star = *params.q_bar - act.qc;
    if (act.p) {
        const double c1 = params.c1;
        const double c2 = params.c2.value_or(0.0);
        const double p_nonov = c1 * c2 * sigma - (c1 + c2) * act.qc;
        b.h4 = p_nonov - *act.p;
        b.h5 = *act.p + c1 * act.qc;
    }
    return b;
}

CbfBundle cbf_bundle(const OnePhaseState& state, const ActuatorState& act, const MaterialProperties& mat,
                     const SetpointSpec& spec, const CbfParams& params) {
    return cbf_bundle(sigma_one_phase(state, mat, spec), kernels::min_value(state.theta()), act, params);
}

CbfBundle cbf_bundle(const TwoPhaseState& state, const ActuatorState& act, const TwoPhaseMaterial& mat,
                     const SetpointSpec& spec, const CbfParams& params) {
    return cbf_bundle(sigma_two_phase(state, mat, spec), kernels::min_value(state.theta_l()), act, params);
}

} // namespace stefan
