#include "stefan/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "stefan/kernels.hpp"

namespace stefan {

void NonovGains::validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "c1 and c2 must be positive");
    if (c3 && !(*c3 > 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "c3 must be positive");
}

void QpGains::validate() const {
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw StefanError(ErrorCode::kInvalidParameter, "k1 and k2 must be positive");
    if (!(delta1 >= 0.0) || !(delta2 >= 0.0)) {
        throw StefanError(ErrorCode::kInvalidParameter, "delta1 and delta2 must be non-negative");
    }
}

const char* to_string(Clamp clamp) {
    switch (clamp) {
    case Clamp::kNone: return "none";
    case Clamp::kLower: return "lower";
    case Clamp::kUpper: return "upper";
    case Clamp::kInfeasibleResolved: return "infeasible-resolved";
    }
    return "none";
}

double nonovershooting(double sigma, double qc, const NonovGains& g) {
    return -(g.c1 + g.c2) * qc + g.c1 * g.c2 * sigma;
}

FilterDecision saturate(double u_o, double lower, double upper) {
    if (lower > upper) return {upper, lower, upper, u_o, Clamp::kInfeasibleResolved};
    if (u_o > upper) return {upper, lower, upper, u_o, Clamp::kUpper};
    if (u_o < lower) return {lower, lower, upper, u_o, Clamp::kLower};
    if (std::isnan(u_o)) return {lower, lower, upper, u_o, Clamp::kLower};
    return {u_o, lower, upper, u_o, Clamp::kNone};
}

FilterDecision qp_filter(double u_o, double sigma, double qc, const QpGains& g) {
    const double lower = -(g.k1 + g.delta1) * qc + g.k2 * sigma;
    const double upper = -g.k1 * qc + (g.k2 + g.delta2) * sigma;
    return saturate(u_o, lower, upper);
}

FilterDecision qp_filter_upper(double u_o, double sigma, double qc, const QpGains& g, double q_bar) {
    const double lower = -(g.k1 + g.delta1) * qc + g.k2 * sigma;
    // Both upper constraints must hold: the deficit bound and k1 (q_bar - qc) from h2* >= 0.
    const double upper = -g.k1 * qc + std::min((g.k2 + g.delta2) * sigma, g.k1 * q_bar);
    return saturate(u_o, lower, upper);
}

double nonovershooting_high(double sigma, double qc, double p, const NonovGains& g) {
    const double c1 = g.c1, c2 = g.c2, c3 = g.c3.value_or(0.0);
    return c1 * c2 * c3 * sigma - (c1 * c2 + c1 * c3 + c2 * c3) * qc - (c1 + c2 + c3) * p;
}

double nonovershooting_two_phase(double sigma2, double qc, const NonovGains& gains) {
    return nonovershooting(sigma2, qc, gains);
}

// ---------------------------------------------------------------------------

bool ValidationReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* ValidationReport::find(const std::string& name) const {
    auto it = std::find_if(checks.begin(), checks.end(), [&](const Check& c) { return c.name == name; });
    return it == checks.end() ? nullptr : &*it;
}

void ValidationReport::add(std::string name, double margin, std::string detail, bool strict) {
    const bool pass = strict ? margin > 0.0 : margin >= 0.0;
    checks.push_back({std::move(name), pass, margin, std::move(detail)});
}

void ValidationReport::warn(std::string name, double margin, std::string detail) {
    if (margin < 0.0) warnings.push_back({std::move(name), false, margin, std::move(detail)});
}

void ValidationReport::merge(const ValidationReport& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

const char* to_string(ControlVariant v) {
    switch (v) {
    case ControlVariant::kNonov1: return "nonov-1";
    case ControlVariant::kNonov2: return "nonov-2";
    case ControlVariant::kQp: return "qp";
    case ControlVariant::kUpper: return "upper";
    case ControlVariant::kTwoPhase: return "two-phase";
    }
    return "?";
}

namespace {

void check_c1(ValidationReport& r, double c1, const InitialCbfData& init, const char* name) {
    const double need = init.qc0 / init.sigma0;
    r.add(name, c1 - need, fmt::format("gain {:.6g} >= qc(0)/sigma(0) = {:.6g}", c1, need));
}

void validate_nonov(ValidationReport& r, const NonovGains& g, const InitialCbfData& init, ControlVariant variant,
                    std::optional<double> q_bar) {
    r.add("gains.c2_positive", g.c2, "c2 > 0", variant != ControlVariant::kTwoPhase);
    if (variant != ControlVariant::kNonov2) {
        check_c1(r, g.c1, init, "gains.c1_initial_h3");
    }
    if (variant == ControlVariant::kNonov2) {
        const double p0 = init.p0.value_or(0.0);
        const double qc0 = init.qc0;
        double need = init.qc0 / init.sigma0;
        if (qc0 > 0.0) {
            need = std::max(need, -p0 / qc0);
        } else if (p0 < 0.0) {
            need = std::numeric_limits<double>::infinity();
        }
        r.add("gains.c1_order2", g.c1 - need,
              fmt::format("c1 = {:.6g} >= max(qc0/sigma0, -p0/qc0) = {:.6g}", g.c1, need));
        const double denom = g.c1 * init.sigma0 - qc0;
        const double num = p0 + g.c1 * qc0;
        if (denom > 0.0) {
            r.add("gains.c2_order2", g.c2 - num / denom,
                  fmt::format("c2 = {:.6g} >= (p0 + c1 qc0)/(c1 sigma0 - qc0) = {:.6g}", g.c2, num / denom));
        } else {
            r.add("gains.c2_order2", -num, "c1 sigma0 = qc0 requires p0 + c1 qc0 <= 0");
        }
        r.add("gains.c3_positive", g.c3.value_or(0.0), "c3 > 0", true);
    }
    if (variant == ControlVariant::kUpper) {
        if (!q_bar) throw StefanError(ErrorCode::kInvalidParameter, "upper-bound variant needs a flux ceiling");
        const double denom = g.c1 * init.sigma0 - init.qc0;
        const double limit = denom > 0.0 ? g.c1 * *q_bar / denom : std::numeric_limits<double>::infinity();
        r.add("gains.c2_upper", limit - g.c2,
              fmt::format("c2 = {:.6g} <= c1 q_bar/(c1 sigma0 - qc0) = {:.6g}", g.c2, limit));
    }
}

void validate_qp(ValidationReport& r, const QpGains& g, const InitialCbfData& init) {
    check_c1(r, g.k1, init, "gains.k1_initial_h3");
    r.add("gains.k2_positive", g.k2, "k2 > 0", true);
    r.add("gains.delta1_nonnegative", g.delta1, "delta1 >= 0");
    r.add("gains.delta2_nonnegative", g.delta2, "delta2 >= 0");
    // U^* is the non-overshooting law with c1 + c2 = k1, c1 c2 = k2 + delta2. Complex rates make
    // sigma underdamped while U rides U^*, so h1 can dip below zero.
    const double disc = g.k1 * g.k1 - 4.0 * (g.k2 + g.delta2);
    r.warn("gains.upper_bound_real_rates", disc,
           fmt::format("k1^2 - 4 (k2 + delta2) = {:.6g} < 0: upper bound rates are complex", disc));
}

} // namespace

ValidationReport validate_gains(const InitialCbfData& init, const ControllerGains& gains, ControlVariant variant,
                                std::optional<double> q_bar) {
    if (!(init.sigma0 > 0.0)) {
        throw StefanError(ErrorCode::kSetpointAssumption,
                          fmt::format("initial energy deficit {:.6g} is not positive; the setpoint must lie "
                                      "beyond the interface reached by the stored heat",
                                      init.sigma0));
    }
    ValidationReport r;
    if (const auto* nonov = std::get_if<NonovGains>(&gains)) {
        validate_nonov(r, *nonov, init, variant, q_bar);
    } else {
        validate_qp(r, std::get<QpGains>(gains), init);
        if (variant == ControlVariant::kUpper) {
            r.add("gains.flux_ceiling_present", q_bar ? 1.0 : -1.0, "upper-bound filter needs q_bar");
        }
    }
    return r;
}

ValidationReport validate_scenario_assumptions(const OnePhaseState& initial, const ActuatorState& actuator,
                                               const MaterialProperties& mat, double L, const SetpointSpec& spec,
                                               ControlVariant variant) {
    ValidationReport r;
    const double s0 = initial.s();
    const auto theta = initial.theta();
    const double h = initial.dxi();

    r.add("A1.interface_inside", std::min(s0, L - s0), fmt::format("0 < s0 = {:.6g} < L = {:.6g}", s0, L), true);
    r.add("A1.liquid_not_frozen", kernels::min_value(theta), "T0(x) >= Tm on [0, s0]");
    r.add("A2.initial_flux_nonnegative", actuator.qc, "qc(0) >= 0");

    const auto c = derive_constants(mat);
    const double reach = s0 + c.beta / c.alpha * s0 * integrate_profile(theta, h);
    r.add("A3.setpoint_reachable", spec.s_r - reach,
          fmt::format("s0 + (beta/alpha) int T0 - Tm = {:.6g} <= s_r = {:.6g}", reach, spec.s_r));
    r.add("A3.setpoint_inside", L - spec.s_r, fmt::format("s_r = {:.6g} < L", spec.s_r), true);

    const bool upper = variant == ControlVariant::kUpper || spec.T_star || spec.q_star;
    if (upper) {
        const auto q_bar = spec.flux_ceiling(mat);
        if (q_bar) {
            r.add("A4.initial_flux_below_ceiling", *q_bar - actuator.qc,
                  fmt::format("qc(0) = {:.6g} <= q_bar = {:.6g}", actuator.qc, *q_bar));
        }
        if (spec.T_star) {
            const double peak = s0 / spec.s_r * (*spec.T_star - mat.Tm);
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double xi = static_cast<double>(i) * h;
                worst = std::min(worst, peak * (1.0 - xi) - theta[i]);
            }
            r.add("A5.profile_below_affine_envelope", worst,
                  fmt::format("T0 - Tm <= dT0 (1 - x/s0) with dT0 = {:.6g}", peak));
        }
    }
    return r;
}

ValidationReport validate_scenario_assumptions(const TwoPhaseState& initial, double qc0,
                                               const TwoPhaseMaterial& mat, const SetpointSpec& spec,
                                               const NonovGains& gains, const TwoPhaseBounds& b) {
    ValidationReport r;
    const double s0 = initial.s();
    const double L = initial.L();
    const double h = initial.dxi();
    const auto cl = derive_constants(mat.liquid);
    const auto cs = derive_constants(mat.solid);
    const double gamma = mat.gamma();

    r.add("A6.interface_inside", std::min(s0, L - s0), "0 < s0 < L", true);
    r.add("A6.liquid_not_frozen", kernels::min_value(initial.theta_l()), "T_l,0 >= Tm");
    r.add("A6.solid_not_melted", -kernels::max_value(initial.theta_s()), "T_s,0 <= Tm");

    double env_l = std::numeric_limits<double>::infinity();
    double env_s = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < initial.theta_l().size(); ++i) {
        const double xi = static_cast<double>(i) * h;
        const double x_l = xi * s0;
        env_l = std::min(env_l, b.T_l_bar * -std::expm1(L * b.eta_l / cl.alpha * (x_l - s0)) - initial.theta_l()[i]);
        const double x_s = s0 + xi * (L - s0);
        env_s = std::min(env_s, initial.theta_s()[i] + b.T_s_bar * -std::expm1(-L * b.eta_s / cs.alpha * (x_s - s0)));
    }
    r.add("A6.liquid_envelope", env_l, "T_l,0 - Tm <= T_l_bar (1 - exp(L eta_l (x - s0)/alpha_l))");
    r.add("A6.solid_envelope", env_s, "T_s,0 - Tm >= -T_s_bar (1 - exp(-L eta_s (x - s0)/alpha_s))");
    r.add("A2.initial_flux_nonnegative", qc0, "qc(0) >= 0");

    const double s_inf = s_infinity(initial, mat);
    r.add("A7.final_interface_inside", std::min(s_inf, L - s_inf),
          fmt::format("0 < s_inf = {:.6g} < L", s_inf), true);
    r.add("A8.setpoint_beyond_s_inf", spec.s_r - s_inf,
          fmt::format("s_inf = {:.6g} < s_r = {:.6g}", s_inf, spec.s_r), true);
    r.add("A8.setpoint_inside", L - spec.s_r, "s_r < L", true);

    const double sigma0 = sigma_two_phase(initial, mat, spec);
    const double qf_limit =
        std::min(qc0 + gains.c1 * gamma * s_inf, gains.c1 * gains.c2 / (gains.c1 + gains.c2) * gamma * spec.s_r);
    r.add("A9.disturbance_bound", qf_limit - b.q_f_bar,
          fmt::format("q_f_bar = {:.6g} < {:.6g}", b.q_f_bar, qf_limit), true);

    const double qc_bar = std::max({qc0, gains.c2 / gains.c1 * (gains.c1 * sigma0 - qc0), b.q_f_bar});
    const double eps_l = std::max(b.T_l_bar, qc_bar * L / mat.liquid.k);
    const double eps_s = std::max(b.T_s_bar, b.q_f_bar * L / mat.solid.k);
    const double lhs = std::max(mat.liquid.k * eps_l / cl.alpha * (1.0 + cl.alpha / (L * L * b.eta_l)),
                                mat.solid.k * eps_s / cs.alpha * (1.0 + cs.alpha / (L * L * b.eta_s)));
    r.add("L5.well_posed_data", gamma / 4.0 - lhs,
          fmt::format("data constant {:.6g} < gamma/4 = {:.6g} (q_c bar = {:.6g})", lhs, gamma / 4.0, qc_bar), true);
    return r;
}

} // namespace stefan
