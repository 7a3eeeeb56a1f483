#include "stefan/service.hpp"

#include <algorithm>
#include <cmath>

namespace stefan::service {

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

} // namespace

nlohmann::json to_json(const StateFrame& f) {
    nlohmann::json j{{"v", kProtocolVersion}, {"type", "frame"},   {"t", f.t},       {"s", f.s},
                     {"s_r", f.s_r},          {"qc", f.qc},        {"p", opt(f.p)},  {"x", f.x},
                     {"theta", f.theta},      {"h1", f.h1},        {"h2", f.h2},     {"h3", f.h3},
                     {"h_min", f.h_min},      {"U_o", opt(f.u_operator)},            {"U_lower", opt(f.u_lower)},
                     {"U_upper", opt(f.u_upper)},                  {"U_applied", f.u_applied},
                     {"clamp", to_string(f.clamp)},                {"violations", f.violations},
                     {"paused", f.paused},    {"finished", f.finished},              {"timescale", f.timescale}};
    if (!f.fault.empty()) j["fault"] = f.fault;
    return j;
}

nlohmann::json error_message(const std::string& code, const std::string& msg) {
    return {{"v", kProtocolVersion}, {"type", "error"}, {"code", code}, {"msg", msg}};
}

Session::Session(ScenarioConfig cfg) : cfg_(std::move(cfg)), timescale_(cfg_.timescale) {
    cfg_.operator_signal.kind = OperatorSignal::Kind::kLive;
    assumptions_ = validate_config(cfg_);
    if (!assumptions_.ok()) throw AssumptionError(assumptions_);
    reset();
}

void Session::reset() {
    loop_ = std::make_unique<ClosedLoop>(cfg_);
    loop_->set_operator_input(0.0);
    phi_.assign(1, {loop_->record().t, loop_->record().phi});
    steps_ = 0;
    budget_ = 0.0;
    held_ = 0.0;
    applied_ = 0.0;
    last_sample_time_.reset();
    paused_ = true;
    fault_.clear();
}

IngestResult Session::ingest(double u_o, double wall_time) {
    if (!std::isfinite(u_o)) {
        ++rejected_;
        return {false, false};
    }
    const bool coalesced = last_sample_time_ && wall_time - *last_sample_time_ < kMinSampleInterval;
    if (coalesced) {
        ++coalesced_;
    } else {
        last_sample_time_ = wall_time;
    }
    held_ = u_o;
    return {true, coalesced};
}

void Session::set_timescale(double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw StefanError(ErrorCode::kInvalidInput, "timescale must be positive");
    timescale_ = r;
}

std::size_t Session::advance_sim(double sim_dt, const std::function<bool()>& keep_going) {
    if (paused_ || finished()) return 0;
    budget_ += sim_dt;
    std::size_t n = 0;
    const double dt = cfg_.solver.dt;
    try {
        while (!loop_->done() && budget_ >= dt * (1.0 - 1e-9)) {
            if (held_ != applied_) {
                loop_->set_operator_input(held_);
                applied_ = held_;
            }
            const double t0 = loop_->t();
            loop_->step();
            budget_ -= loop_->t() - t0;
            ++n;
            if (++steps_ % cfg_.decimate == 0 || loop_->done()) phi_.emplace_back(loop_->record().t, loop_->record().phi);
            if (keep_going && n % 256 == 0 && !keep_going()) {
                budget_ = 0.0;
                break;
            }
        }
    } catch (const StefanError& e) {
        fault_ = e.what();
    }
    if (loop_->done()) budget_ = 0.0;
    return n;
}

StateFrame Session::frame() const {
    const auto& r = loop_->record();
    StateFrame f{};
    f.t = r.t;
    f.s = r.s;
    f.s_r = cfg_.setpoint.s_r;
    f.qc = r.qc;
    f.p = r.p;
    loop_->profile(f.x, f.theta, 128);
    f.h1 = r.cbf.h1;
    f.h2 = r.cbf.h2;
    f.h3 = r.cbf.h3;
    f.h_min = r.cbf.h_min;
    f.u_operator = r.u_operator;
    f.u_lower = r.u_lower;
    f.u_upper = r.u_upper;
    f.u_applied = r.u_applied;
    f.clamp = r.clamp.value_or(Clamp::kNone);
    f.violations = loop_->monitor().count();
    f.paused = paused_;
    f.finished = finished();
    f.timescale = timescale_;
    f.fault = fault_;
    return f;
}

RunReport Session::report() const {
    RunReport r = make_report(*loop_, assumptions_);
    r.phi_series = phi_;
    r.finalize_decay();
    if (!fault_.empty()) {
        r.status = "numerical-failure";
        r.error = fault_;
    }
    return r;
}

} // namespace stefan::service
