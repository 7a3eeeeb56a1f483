#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stefan/cbf.hpp"
#include "stefan/control.hpp"
#include "stefan/core.hpp"
#include "stefan/one_phase.hpp"
#include "stefan/two_phase.hpp"
#include "stefan/verification.hpp"

namespace stefan {

class ConfigError : public StefanError {
public:
    ConfigError(std::size_t line, const std::string& msg);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class AssumptionError : public StefanError {
public:
    explicit AssumptionError(ValidationReport report);
    const ValidationReport& report() const noexcept { return report_; }

private:
    ValidationReport report_;
};

enum class PlantKind { kOnePhase, kTwoPhase };

/// Time series with zero-order-hold lookup.
struct SampledSignal {
    std::vector<double> t;
    std::vector<double> v;

    double at(double time) const;
    static SampledSignal load_csv(const std::filesystem::path& path);
};

struct OperatorSignal {
    enum class Kind { kConstant, kSinusoid, kFile, kLive };
    Kind kind = Kind::kConstant;
    double value = 0.0;
    double amplitude = 0.0;
    double period = 1.0;
    double offset = 0.0;
    SampledSignal samples;

    /// Live signals evaluate to 0 here; the session supplies the held sample.
    double at(double t) const;
};

struct Disturbance {
    enum class Kind { kNone, kConstant, kRandom, kFile };
    Kind kind = Kind::kNone;
    double value = 0.0;
    double q_max = 0.0; ///< random draws lie in [0, q_max)
    double hold = 0.0;  ///< resample interval for random draws [s]
    SampledSignal samples;
    std::optional<double> bound{}; ///< declared q_f bar

    double declared_bound() const;
};

/// Random disturbance generator; draws are a pure function of (seed, interval index).
class DisturbanceSource {
public:
    DisturbanceSource(const Disturbance& spec, std::uint64_t seed);
    double at(double t);

private:
    Disturbance spec_;
    std::mt19937_64 rng_;
    long long interval_ = -1;
    double current_ = 0.0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    PlantKind plant = PlantKind::kOnePhase;
    MaterialProperties material = MaterialProperties::ti6al4v();
    MaterialProperties solid = MaterialProperties::ti6al4v();
    double s0 = 1e-5;
    double L = 1e-3;
    SetpointSpec setpoint{.s_r = 2e-4};
    double initial_peak = 1.0;        ///< affine liquid excess at x = 0 [C]
    double initial_solid_depth = 0.0; ///< affine solid deficit at x = L [C]
    std::optional<SampledSignal> initial_profile; ///< sampled (xi, theta) overriding the affine liquid profile
    ActuatorState actuator{.qc = 0.0};
    ControlVariant variant = ControlVariant::kNonov1;
    ControllerGains gains = NonovGains{.c1 = 1.0, .c2 = 1.0};
    std::optional<double> c1_log{};
    OperatorSignal operator_signal;
    Disturbance disturbance;
    TwoPhaseBounds bounds{.T_l_bar = 1.0, .T_s_bar = 1.0, .eta_l = 1.0, .eta_s = 1.0, .q_f_bar = 0.0};
    SolverConfig solver{.grid = Grid(200), .dt = 1e-5, .integrator = Integrator::kImplicitEuler};
    bool auto_dt = false;
    double horizon = 1.0;
    std::size_t decimate = 100;
    std::uint64_t seed = 1;
    std::optional<SafetyTolerances> tolerances;
    double timescale = 0.0075;
    double frame_rate = 30.0;

    TwoPhaseMaterial two_phase_material() const { return {.liquid = material, .solid = solid, .L = L}; }
    bool filtered() const { return std::holds_alternative<QpGains>(gains); }
    /// c1 reported for h3: configured, the gain itself, or the smaller root of x^2 - k1 x + k2.
    double logged_c1() const;
    std::optional<double> flux_ceiling() const;
    SafetyTolerances effective_tolerances() const;
};

/// Parses the flat `section.key = value` format. Relative file paths resolve against base_dir.
ScenarioConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ValidationReport validate_config(const ScenarioConfig& cfg);
/// parse_config followed by validate_config; throws AssumptionError when a check fails.
ScenarioConfig load_config(std::string_view text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config_file(const std::filesystem::path& path, bool validate = true);

struct TrajectoryRecord {
    double t;
    double s;
    double qc;
    std::optional<double> p{};
    double u_applied;
    std::optional<double> u_operator{};
    std::optional<double> u_lower{};
    std::optional<double> u_upper{};
    CbfBundle cbf;
    double phi;
    std::optional<Clamp> clamp{};
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const TrajectoryRecord& r);

using PlantState = std::variant<OnePhaseState, TwoPhaseState>;

/// Closed-loop simulation shared by batch runs and live sessions. The record
/// for the current state carries the decision that the next step applies.
class ClosedLoop {
public:
    explicit ClosedLoop(const ScenarioConfig& cfg);

    /// Recomputes the pending decision with a new operator input.
    void set_operator_input(double u_o);
    /// Advances one step with the pending decision. Returns false once the horizon is reached.
    bool step();

    const TrajectoryRecord& record() const noexcept { return record_; }
    const PlantState& state() const noexcept { return state_; }
    const ActuatorState& actuator() const noexcept { return actuator_; }
    const SafetyMonitor& monitor() const noexcept { return monitor_; }
    const ClampStats& clamp_stats() const noexcept { return clamps_; }
    const ScenarioConfig& config() const noexcept { return cfg_; }
    double t() const;
    double s() const;
    bool done() const;
    double s_max() const noexcept { return s_max_; }

    /// Node positions and excess temperatures of both phases, at most max_points samples.
    void profile(std::vector<double>& x, std::vector<double>& theta, std::size_t max_points = 128) const;

private:
    void refresh(double u_o);
    CbfBundle bundle() const;
    double sigma() const;

    ScenarioConfig cfg_;
    PlantState state_;
    ActuatorState actuator_;
    SafetyMonitor monitor_;
    ClampStats clamps_;
    DisturbanceSource disturbance_;
    CbfParams cbf_params_;
    double u_o_ = 0.0;
    double s_max_ = 0.0;
    TrajectoryRecord record_;
};

PlantState initial_state(const ScenarioConfig& cfg);

struct ScenarioResult {
    std::vector<TrajectoryRecord> rows;
    RunReport report;
};

/// Runs the closed loop to the horizon. Solver failures end the run early with
/// report.status == "numerical-failure"; the rows up to the failure are kept.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Report fields shared by batch runs and live sessions.
RunReport make_report(const ClosedLoop& loop, const ValidationReport& assumptions);

} // namespace stefan
