#pragma once

#include <stdexcept>
#include <string>

namespace stefan {

enum class ErrorCode {
    kInvalidParameter,
    kInvalidInput,
    kDegenerateInterface,
    kPhaseDisappearance,
    kNumericalBlowup,
    kCflViolation,
    kConfluentRates,
    kDegenerateSeries,
    kSetpointAssumption,
    kConfigParse,
    kAssumptionViolation,
};

const char* to_string(ErrorCode code);

class StefanError : public std::runtime_error {
public:
    StefanError(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Solver failure annotated with the simulation time at which it happened.
class SimulationError : public StefanError {
public:
    SimulationError(ErrorCode code, const std::string& msg, double time)
        : StefanError(code, msg), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

} // namespace stefan
