#pragma once

#include <optional>

#include "stefan/core.hpp"
#include "stefan/two_phase.hpp"

namespace stefan {

/// Regulation target and optional ceilings on temperature and flux.
struct SetpointSpec {
    double s_r;                    ///< interface setpoint [m]
    std::optional<double> T_star{};  ///< temperature ceiling [C]
    std::optional<double> q_star{};  ///< heat-flux ceiling [W/m^2]

    void validate(double L, double Tm) const;

    /// Admissible flux bound: min{k (T* - Tm) / s_r, q*} over the configured ceilings.
    std::optional<double> flux_ceiling(const MaterialProperties& liquid) const;
};

struct CbfBundle {
    double h1;                     ///< energy deficit sigma
    double h2;                     ///< heat flux q_c
    double h3;                     ///< c1 h1 - h2
    double h_min;                  ///< smallest liquid excess temperature over the grid
    double c1;                     ///< gain used for h3 (and h5)
    std::optional<double> h2_star{}; ///< q_bar - q_c
    std::optional<double> h4{};      ///< p_nonov - p
    std::optional<double> h5{};      ///< p + c1 q_c
};

struct CbfParams {
    double c1;
    std::optional<double> q_bar{};
    std::optional<double> c2{}; ///< needed for h4 with a second-order actuator
};

/// sigma = -[(k/alpha) int_0^s theta dx + (k/beta)(s - s_r)].
double sigma_one_phase(const OnePhaseState& state, const MaterialProperties& mat, const SetpointSpec& spec);

/// Two-phase deficit, including the (negative) sensible heat of the solid.
double sigma_two_phase(const TwoPhaseState& state, const TwoPhaseMaterial& mat, const SetpointSpec& spec);

CbfBundle cbf_bundle(double sigma, double h_min, const ActuatorState& act, const CbfParams& params);
CbfBundle cbf_bundle(const OnePhaseState& state, const ActuatorState& act, const MaterialProperties& mat,
                     const SetpointSpec& spec, const CbfParams& params);
CbfBundle cbf_bundle(const TwoPhaseState& state, const ActuatorState& act, const TwoPhaseMaterial& mat,
                     const SetpointSpec& spec, const CbfParams& params);

} // namespace stefan
