#include "stefan/core.hpp"

#include <cmath>
#include <string>

#include "stefan/kernels.hpp"

namespace stefan {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kDegenerateInterface: return "degenerate-interface";
    case ErrorCode::kPhaseDisappearance: return "phase-disappearance";
    case ErrorCode::kNumericalBlowup: return "numerical-blowup";
    case ErrorCode::kCflViolation: return "cfl-violation";
    case ErrorCode::kConfluentRates: return "confluent-rates";
    case ErrorCode::kDegenerateSeries: return "degenerate-series";
    case ErrorCode::kSetpointAssumption: return "setpoint-assumption";
    case ErrorCode::kConfigParse: return "config-parse";
    case ErrorCode::kAssumptionViolation: return "assumption-violation";
    }
    return "unknown";
}

MaterialProperties MaterialProperties::ti6al4v() {
    return {.k = 32.5, .rho = 3920.0, .cp = 830.0, .dH = 2.86e5, .Tm = 1650.0};
}

MaterialProperties MaterialProperties::unit() {
    return {.k = 1.0, .rho = 1.0, .cp = 1.0, .dH = 1.0, .Tm = 1.0};
}

void MaterialProperties::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw StefanError(ErrorCode::kInvalidParameter,
                              std::string("material property '") + name + "' must be positive and finite");
        }
    };
    check(k, "k");
    check(rho, "rho");
    check(cp, "cp");
    check(dH, "dH");
    check(Tm, "Tm");
}

DerivedConstants derive_constants(const MaterialProperties& mat) {
    mat.validate();
    return {.alpha = mat.k / (mat.rho * mat.cp), .beta = mat.k / (mat.rho * mat.dH), .gamma = mat.rho * mat.dH};
}

Grid::Grid(std::size_t n_cells) : n_(n_cells) {
    if (n_cells < kMinCells) {
        throw StefanError(ErrorCode::kInvalidParameter,
                          "grid needs at least " + std::to_string(kMinCells) + " cells, got " + std::to_string(n_cells));
    }
}

OnePhaseState::OnePhaseState(double t, double s, std::vector<double> theta)
    : t_(t), s_(s), theta_(std::move(theta)) {
    if (!(s_ > 0.0) || !std::isfinite(s_)) {
        throw StefanError(ErrorCode::kInvalidParameter, "interface position must be positive");
    }
    if (theta_.size() < Grid::kMinCells + 1) {
        throw StefanError(ErrorCode::kInvalidParameter, "temperature profile has too few nodes");
    }
    if (!kernels::all_finite(theta_)) {
        throw StefanError(ErrorCode::kNumericalBlowup, "temperature profile contains non-finite values");
    }
    theta_.back() = 0.0;
}

double integrate_profile(std::span<const double> values, double spacing) {
    if (values.size() < 2) throw StefanError(ErrorCode::kInvalidInput, "quadrature needs at least two samples");
    return kernels::trapezoid(values, spacing);
}

double integrate_squared(std::span<const double> values, double spacing) {
    if (values.size() < 2) throw StefanError(ErrorCode::kInvalidInput, "quadrature needs at least two samples");
    return kernels::trapezoid_squared(values, spacing);
}

} // namespace stefan
