#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "stefan/errors.hpp"

namespace stefan {

/// Physical parameters of one phase. SI units, temperatures in Celsius.
struct MaterialProperties {
    double k;   ///< thermal conductivity [W/(m C)]
    double rho; ///< density [kg/m^3]
    double cp;  ///< heat capacity [J/(kg C)]
    double dH;  ///< latent heat of fusion [J/kg]
    double Tm;  ///< melting temperature [C]

    /// Ti6Al4V alloy, the melt-pool material of the additive manufacturing case.
    static MaterialProperties ti6al4v();
    /// Nondimensional material: every property equal to one.
    static MaterialProperties unit();

    void validate() const;
};

struct DerivedConstants {
    double alpha; ///< thermal diffusivity k/(rho cp)
    double beta;  ///< Stefan coefficient k/(rho dH)
    double gamma; ///< volumetric latent heat rho dH
};

DerivedConstants derive_constants(const MaterialProperties& mat);

/// Uniform grid on the immobilized unit interval.
class Grid {
public:
    explicit Grid(std::size_t n_cells);

    std::size_t n_cells() const noexcept { return n_; }
    std::size_t n_nodes() const noexcept { return n_ + 1; }
    double dxi() const noexcept { return 1.0 / static_cast<double>(n_); }
    double node(std::size_t i) const noexcept { return static_cast<double>(i) * dxi(); }

    static constexpr std::size_t kMinCells = 8;

private:
    std::size_t n_;
};

/// Liquid phase of the one-phase problem on the front-fixed coordinate xi = x/s.
/// theta holds T - Tm; the last node sits on the interface and is pinned to zero.
class OnePhaseState {
public:
    OnePhaseState(double t, double s, std::vector<double> theta);

    /// Profile sampled from a function of physical position x in [0, s].
    template <class F>
    static OnePhaseState from_function(const Grid& grid, double s, F&& excess, double t = 0.0) {
        std::vector<double> theta(grid.n_nodes());
        for (std::size_t i = 0; i < theta.size(); ++i) {
            theta[i] = excess(grid.node(i) * s);
        }
        theta.back() = 0.0;
        return OnePhaseState(t, s, std::move(theta));
    }

    double t() const noexcept { return t_; }
    double s() const noexcept { return s_; }
    std::span<const double> theta() const noexcept { return theta_; }
    std::size_t n_cells() const noexcept { return theta_.size() - 1; }
    double dxi() const noexcept { return 1.0 / static_cast<double>(n_cells()); }

private:
    double t_;
    double s_;
    std::vector<double> theta_;
};

struct ActuatorState {
    double qc = 0.0;          ///< boundary heat flux [W/m^2]
    std::optional<double> p{};  ///< flux rate [W/(m^2 s)], second-order actuator only

    int order() const noexcept { return p ? 2 : 1; }
};

/// Composite trapezoid rule on uniformly spaced samples.
double integrate_profile(std::span<const double> values, double spacing);

/// Trapezoid rule applied to the squared samples.
double integrate_squared(std::span<const double> values, double spacing);

} // namespace stefan
