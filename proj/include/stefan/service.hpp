#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "stefan/scenario.hpp"

namespace stefan::service {

inline constexpr int kProtocolVersion = 1;
inline constexpr double kMinSampleInterval = 1e-3; ///< ingest rate limit [s]

struct StateFrame {
    double t;
    double s;
    double s_r;
    double qc;
    std::optional<double> p;
    std::vector<double> x;
    std::vector<double> theta;
    double h1;
    double h2;
    double h3;
    double h_min;
    std::optional<double> u_operator;
    std::optional<double> u_lower;
    std::optional<double> u_upper;
    double u_applied;
    Clamp clamp;
    std::size_t violations;
    bool paused;
    bool finished;
    double timescale;
    std::string fault;
};

nlohmann::json to_json(const StateFrame& f);
nlohmann::json error_message(const std::string& code, const std::string& msg);

struct IngestResult {
    bool accepted;
    bool coalesced; ///< arrived within the rate limit of the previous sample
};

/// Deterministic live session: the simulation only moves in advance_sim, and
/// operator samples take effect from the next step.
class Session {
public:
    explicit Session(ScenarioConfig cfg);

    IngestResult ingest(double u_o, double wall_time);
    void pause() noexcept { paused_ = true; }
    void resume() noexcept { paused_ = false; }
    void reset();
    void set_timescale(double r);

    /// Adds sim_dt of simulated time to the budget and steps through it. When
    /// keep_going returns false the rest of the budget is dropped. Returns steps taken.
    std::size_t advance_sim(double sim_dt, const std::function<bool()>& keep_going = {});
    std::size_t advance_wall(double wall_dt, const std::function<bool()>& keep_going = {}) {
        return advance_sim(wall_dt * timescale_, keep_going);
    }

    StateFrame frame() const;
    RunReport report() const;

    bool paused() const noexcept { return paused_; }
    bool finished() const { return loop_->done() || !fault_.empty(); }
    bool faulted() const noexcept { return !fault_.empty(); }
    double timescale() const noexcept { return timescale_; }
    double held_input() const noexcept { return held_; }
    std::size_t coalesced() const noexcept { return coalesced_; }
    std::size_t rejected() const noexcept { return rejected_; }
    const ClosedLoop& loop() const noexcept { return *loop_; }
    const ScenarioConfig& config() const noexcept { return cfg_; }

private:
    ScenarioConfig cfg_;
    ValidationReport assumptions_;
    std::unique_ptr<ClosedLoop> loop_;
    std::vector<std::pair<double, double>> phi_;
    std::size_t steps_ = 0;
    double budget_ = 0.0;
    double held_ = 0.0;
    double applied_ = 0.0;
    std::optional<double> last_sample_time_;
    std::size_t coalesced_ = 0;
    std::size_t rejected_ = 0;
    double timescale_;
    bool paused_ = true;
    std::string fault_;
};

/// Newline-delimited JSON over TCP. One simulation thread owns the session;
/// the network thread only forwards commands to it and frames to clients.
class Server {
public:
    Server(ScenarioConfig cfg, std::uint16_t port, std::optional<double> timescale = std::nullopt);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void start();
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();
    std::uint16_t port() const noexcept { return port_; }

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_;
};

} // namespace stefan::service
