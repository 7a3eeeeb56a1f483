#include "stefan/verification.hpp"

#include <algorithm>
#include <cmath>

#include "stefan/kernels.hpp"

namespace stefan {

void SafetyTolerances::validate() const {
    for (double v : {tol_T, tol_s, tol_q, tol_cbf}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw StefanError(ErrorCode::kInvalidParameter, "tolerances must be >= 0");
    }
}

const char* to_string(ViolationKind kind) {
    switch (kind) {
    case ViolationKind::kEnergyDeficit: return "energy-deficit";
    case ViolationKind::kNegativeFlux: return "negative-flux";
    case ViolationKind::kLiquidBelowMelting: return "liquid-below-melting";
    case ViolationKind::kInterfaceOvershoot: return "interface-overshoot";
    case ViolationKind::kInterfaceOutOfDomain: return "interface-out-of-domain";
    case ViolationKind::kFluxCeiling: return "flux-ceiling";
    case ViolationKind::kTemperatureCeiling: return "temperature-ceiling";
    case ViolationKind::kSolidAboveMelting: return "solid-above-melting";
    }
    return "?";
}

namespace {

// Records a violation when value < -tol.
void below(std::vector<Violation>& out, double t, ViolationKind kind, double value, double tol) {
    if (value < -tol || std::isnan(value)) out.push_back({t, kind, std::isnan(value) ? INFINITY : -value - tol});
}

void common(std::vector<Violation>& out, double t, double s, const ActuatorState& actuator, const CbfBundle& b,
            const MonitorLimits& lim, const SafetyTolerances& tol, double theta_max) {
    below(out, t, ViolationKind::kEnergyDeficit, b.h1, tol.tol_cbf);
    below(out, t, ViolationKind::kNegativeFlux, b.h2, tol.tol_q);
    below(out, t, ViolationKind::kLiquidBelowMelting, b.h_min, tol.tol_T);
    if (lim.check_setpoint) below(out, t, ViolationKind::kInterfaceOvershoot, lim.s_r - s, tol.tol_s);
    const double inside = std::min(s - tol.tol_s, lim.L - tol.tol_s - s);
    if (!(inside > 0.0)) out.push_back({t, ViolationKind::kInterfaceOutOfDomain, std::isnan(inside) ? INFINITY : -inside});
    if (lim.q_bar) below(out, t, ViolationKind::kFluxCeiling, *lim.q_bar - actuator.qc, tol.tol_q);
    if (lim.theta_ceiling) below(out, t, ViolationKind::kTemperatureCeiling, *lim.theta_ceiling - theta_max, tol.tol_T);
}

} // namespace

std::vector<Violation> monitor_step(const OnePhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle,
                                    const MonitorLimits& limits, const SafetyTolerances& tol) {
    std::vector<Violation> out;
    const double theta_max = limits.theta_ceiling ? kernels::max_value(state.theta()) : 0.0;
    common(out, state.t(), state.s(), actuator, bundle, limits, tol, theta_max);
    return out;
}

std::vector<Violation> monitor_step(const TwoPhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle,
                                    const MonitorLimits& limits, const SafetyTolerances& tol) {
    std::vector<Violation> out;
    const double theta_max = limits.theta_ceiling ? kernels::max_value(state.theta_l()) : 0.0;
    common(out, state.t(), state.s(), actuator, bundle, limits, tol, theta_max);
    below(out, state.t(), ViolationKind::kSolidAboveMelting, -kernels::max_value(state.theta_s()), tol.tol_T);
    return out;
}

std::span<const TheoremClaim> theorem_claims() {
    static constexpr TheoremClaim claims[] = {
        {"non-overshooting", "h1 >= 0", ViolationKind::kEnergyDeficit},
        {"non-overshooting", "h2 >= 0", ViolationKind::kNegativeFlux},
        {"non-overshooting", "h(x,t) >= 0", ViolationKind::kLiquidBelowMelting},
        {"non-overshooting", "s <= s_r", ViolationKind::kInterfaceOvershoot},
        {"qp-filter", "h1 >= 0", ViolationKind::kEnergyDeficit},
        {"qp-filter", "h2 >= 0", ViolationKind::kNegativeFlux},
        {"qp-filter", "h(x,t) >= 0", ViolationKind::kLiquidBelowMelting},
        {"qp-filter", "s <= s_r", ViolationKind::kInterfaceOvershoot},
        {"upper-bound", "qc <= q_bar", ViolationKind::kFluxCeiling},
        {"upper-bound", "T <= T*", ViolationKind::kTemperatureCeiling},
        {"upper-bound-qp", "qc <= q_bar", ViolationKind::kFluxCeiling},
        {"upper-bound-qp", "T <= T*", ViolationKind::kTemperatureCeiling},
        {"order-2", "h1 >= 0", ViolationKind::kEnergyDeficit},
        {"order-2", "h2 >= 0", ViolationKind::kNegativeFlux},
        {"order-2", "h(x,t) >= 0", ViolationKind::kLiquidBelowMelting},
        {"order-2", "s <= s_r", ViolationKind::kInterfaceOvershoot},
        {"two-phase", "T_l >= Tm", ViolationKind::kLiquidBelowMelting},
        {"two-phase", "T_s <= Tm", ViolationKind::kSolidAboveMelting},
        {"two-phase", "0 < s < L", ViolationKind::kInterfaceOutOfDomain},
        {"two-phase", "h2 >= 0", ViolationKind::kNegativeFlux},
        {"two-phase", "h1 >= 0", ViolationKind::kEnergyDeficit},
    };
    return claims;
}

SafetyMonitor::SafetyMonitor(MonitorLimits limits, SafetyTolerances tol, std::size_t max_stored)
    : limits_(limits), tol_(tol), max_stored_(max_stored) {
    tol_.validate();
}

void SafetyMonitor::record(const std::vector<Violation>& v) {
    for (const auto& x : v) {
        ++count_;
        ++per_kind_[static_cast<std::size_t>(x.kind)];
        if (stored_.size() < max_stored_) stored_.push_back(x);
    }
}

void SafetyMonitor::observe(const OnePhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle) {
    record(monitor_step(state, actuator, bundle, limits_, tol_));
}

void SafetyMonitor::observe(const TwoPhaseState& state, const ActuatorState& actuator, const CbfBundle& bundle) {
    record(monitor_step(state, actuator, bundle, limits_, tol_));
}

// ---------------------------------------------------------------------------

double phi_norm(const OnePhaseState& state, const ActuatorState& actuator, const SetpointSpec& spec) {
    const double ds = state.s() - spec.s_r;
    double phi = state.s() * integrate_squared(state.theta(), state.dxi()) + ds * ds + actuator.qc * actuator.qc;
    if (actuator.p) phi += *actuator.p * *actuator.p;
    return phi;
}

double phi_norm(const TwoPhaseState& state, const ActuatorState& actuator, const SetpointSpec& spec) {
    const double h = state.dxi();
    const double ds = state.s() - spec.s_r;
    double phi = state.s() * integrate_squared(state.theta_l(), h) +
                 (state.L() - state.s()) * integrate_squared(state.theta_s(), h) + ds * ds + actuator.qc * actuator.qc;
    if (actuator.p) phi += *actuator.p * *actuator.p;
    return phi;
}

DecayFit fit_decay(std::span<const double> t, std::span<const double> phi) {
    if (t.size() != phi.size()) throw StefanError(ErrorCode::kInvalidInput, "time and Phi series differ in length");
    if (phi.size() < 10) throw StefanError(ErrorCode::kDegenerateSeries, "need at least 10 Phi samples");
    for (double v : phi) {
        if (!(v > 0.0) || !std::isfinite(v)) throw StefanError(ErrorCode::kDegenerateSeries, "Phi sample is not positive");
    }
    const auto n = static_cast<double>(phi.size());
    double mt = 0.0, my = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        mt += t[i];
        my += std::log(phi[i]);
    }
    mt /= n;
    my /= n;
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double dt = t[i] - mt;
        stt += dt * dt;
        sty += dt * (std::log(phi[i]) - my);
    }
    if (!(stt > 0.0)) throw StefanError(ErrorCode::kDegenerateSeries, "Phi samples share one time stamp");
    const double slope = sty / stt;
    const double intercept = my - slope * mt;
    DecayFit fit{.M = std::exp(intercept) / phi[0], .b = -slope, .envelope_ratio = 0.0};
    for (std::size_t i = 0; i < phi.size(); ++i) {
        fit.envelope_ratio = std::max(fit.envelope_ratio, std::exp(std::log(phi[i]) - intercept - slope * t[i]));
    }
    return fit;
}

HTriple analytic_h_oracle(double h1_0, double h2_0, double c1, double c2, double t) {
    if (c1 == c2) throw StefanError(ErrorCode::kConfluentRates, "closed form needs c1 != c2");
    const double h3_0 = c1 * h1_0 - h2_0;
    const double e1 = std::exp(-c1 * t);
    // (e^{-c1 t} - e^{-c2 t}) / (c2 - c1) without cancellation
    const double mix = t == 0.0 ? 0.0 : -e1 * std::expm1(-(c2 - c1) * t) / (c2 - c1);
    return {.h1 = h1_0 * e1 + h3_0 * mix, .h2 = h2_0 * e1 + c2 * h3_0 * mix, .h3 = h3_0 * std::exp(-c2 * t)};
}

Matrix<3> chain_matrix(double c1, double c2) {
    return {{{-c1, 0.0, 1.0}, {0.0, -c1, c2}, {0.0, 0.0, -c2}}};
}

Matrix<5> chain_matrix(double c1, double c2, double c3) {
    Matrix<5> A{};
    A[0][0] = -c1; A[0][2] = 1.0;              // h1' = -c1 h1 + h3
    A[1][1] = -c1; A[1][4] = 1.0;              // h2' = -c1 h2 + h5
    A[2][2] = -c2; A[2][3] = 1.0;              // h3' = -c2 h3 + h4
    A[3][3] = -c3;                             // h4' = -c3 h4
    A[4][4] = -c2; A[4][3] = c3;               // h5' = -c2 h5 + c3 h4
    return A;
}

// ---------------------------------------------------------------------------

void ClampStats::add(Clamp c) {
    ++steps;
    if (c == Clamp::kLower) ++lower;
    if (c == Clamp::kUpper) ++upper;
    if (c == Clamp::kInfeasibleResolved) ++infeasible;
}

void RunReport::finalize_decay() {
    std::vector<double> t, phi;
    for (const auto& [ti, pi] : phi_series) {
        t.push_back(ti);
        phi.push_back(pi);
    }
    try {
        decay = fit_decay(t, phi);
        phi_floor.reset();
    } catch (const StefanError&) {
        decay.reset();
        if (!phi.empty()) phi_floor = *std::min_element(phi.begin(), phi.end());
    }
}

nlohmann::json RunReport::to_json() const {
    using nlohmann::json;
    json j;
    j["v"] = 1;
    j["scenario"] = scenario;
    j["variant"] = variant;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    j["t_end"] = t_end;
    j["s_end"] = s_end;
    j["s_max"] = s_max;
    j["s_r"] = s_r;
    j["c1_logged"] = c1_logged;
    j["violation_count"] = violation_count;
    j["violations"] = json::array();
    for (const auto& v : violations) j["violations"].push_back({{"t", v.t}, {"kind", to_string(v.kind)}, {"magnitude", v.magnitude}});
    j["phi_series"] = json::array();
    for (const auto& [t, p] : phi_series) j["phi_series"].push_back({t, p});
    if (decay) {
        j["decay"] = {{"M", decay->M}, {"b", decay->b}, {"envelope_ratio", decay->envelope_ratio},
                      {"M_envelope", decay->M_envelope()}};
    } else {
        j["decay"] = nullptr;
    }
    if (phi_floor) j["phi_floor"] = *phi_floor;
    j["clamp_stats"] = {{"steps", clamp_stats.steps},
                        {"lower", clamp_stats.fraction(clamp_stats.lower)},
                        {"upper", clamp_stats.fraction(clamp_stats.upper)},
                        {"infeasible_resolved", clamp_stats.fraction(clamp_stats.infeasible)}};
    json checks = json::array();
    for (const auto& c : assumption_report.checks) {
        checks.push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}, {"detail", c.detail}});
    }
    json warnings = json::array();
    for (const auto& c : assumption_report.warnings) {
        warnings.push_back({{"name", c.name}, {"margin", c.margin}, {"detail", c.detail}});
    }
    j["assumption_report"] = {{"ok", assumption_report.ok()}, {"checks", checks}, {"warnings", warnings}};
    j["tolerances"] = {{"tol_T", tolerances.tol_T}, {"tol_s", tolerances.tol_s}, {"tol_q", tolerances.tol_q},
                       {"tol_cbf", tolerances.tol_cbf}};
    return j;
}

} // namespace stefan
