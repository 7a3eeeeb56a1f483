#include "doctest.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/asio.hpp>

#include "stefan/service.hpp"

using namespace stefan;
using namespace stefan::service;

namespace {

ScenarioConfig live_config() { return load_config_file(STEFAN_CONFIG_DIR "/live.cfg"); }

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

struct LineClient {
    boost::asio::io_context io;
    boost::asio::ip::tcp::socket sock{io};
    boost::asio::streambuf buf;

    explicit LineClient(std::uint16_t port) {
        sock.connect({boost::asio::ip::address_v4::loopback(), port});
    }
    void send(const std::string& line) { boost::asio::write(sock, boost::asio::buffer(line + "\n")); }
    nlohmann::json next() {
        const auto n = boost::asio::read_until(sock, buf, '\n');
        std::string line(boost::asio::buffers_begin(buf.data()), boost::asio::buffers_begin(buf.data()) + n);
        buf.consume(n);
        return nlohmann::json::parse(line);
    }
    nlohmann::json next_of(const std::string& type) {
        for (;;) {
            auto j = next();
            if (j["type"] == type) return j;
        }
    }
};

} // namespace

TEST_SUITE("service") {

TEST_CASE("session starts paused and holds zero input") {
    Session s(live_config());
    CHECK(s.paused());
    CHECK(s.held_input() == 0.0);
    CHECK(s.advance_sim(1e-3) == 0);
    CHECK(s.frame().t == 0.0);
    const auto f = s.frame();
    CHECK(f.u_operator.value() == 0.0);
    CHECK(f.u_applied == median3(*f.u_lower, 0.0, *f.u_upper));
    s.resume();
    CHECK(s.advance_sim(1e-3) > 0);
    CHECK(s.frame().t == doctest::Approx(1e-3));
}

TEST_CASE("ingest guards") {
    Session s(live_config());
    CHECK_FALSE(s.ingest(std::numeric_limits<double>::infinity(), 0.0).accepted);
    CHECK_FALSE(s.ingest(std::numeric_limits<double>::quiet_NaN(), 0.0).accepted);
    CHECK(s.rejected() == 2);
    CHECK(s.held_input() == 0.0);
    CHECK(s.ingest(5e6, 0.0).accepted);
    const auto r = s.ingest(6e6, 0.0004);
    CHECK(r.accepted);
    CHECK(r.coalesced);
    CHECK(s.held_input() == 6e6);
    CHECK_FALSE(s.ingest(7e6, 0.01).coalesced);
    CHECK_FALSE(s.ingest(-std::numeric_limits<double>::infinity(), 0.02).accepted);
    CHECK(s.held_input() == 7e6);
}

TEST_CASE("pause and resume do not change the trajectory") {
    auto drive = [](bool with_pauses) {
        Session s(live_config());
        s.resume();
        for (int k = 0; k < 40; ++k) {
            s.ingest(k % 3 == 0 ? 1e9 : -2e7 * k, 0.1 * k);
            if (with_pauses && k % 5 == 0) {
                s.pause();
                s.advance_sim(3e-4);
                s.resume();
            }
            s.advance_sim(2.5e-4);
        }
        return s.frame();
    };
    const auto a = drive(false), b = drive(true);
    CHECK(a.t == b.t);
    CHECK(a.s == b.s);
    CHECK(a.qc == b.qc);
    CHECK(a.u_applied == b.u_applied);
}

TEST_CASE("reset restores the initial frame") {
    Session s(live_config());
    const auto f0 = s.frame();
    s.resume();
    s.ingest(1e8, 0.0);
    s.advance_sim(0.01);
    CHECK(s.frame().s > f0.s);
    s.reset();
    const auto f1 = s.frame();
    CHECK(f1.t == 0.0);
    CHECK(f1.s == f0.s);
    CHECK(s.held_input() == 0.0);
}

TEST_CASE("frame JSON carries the protocol version and null for missing values") {
    Session s(live_config());
    const auto j = to_json(s.frame());
    CHECK(j["v"] == kProtocolVersion);
    CHECK(j["type"] == "frame");
    CHECK(j["p"].is_null());
    CHECK(j["clamp"] == "none");
    CHECK(j["x"].size() == j["theta"].size());
    CHECK(error_message("bad-message", "x")["v"] == kProtocolVersion);
}

TEST_CASE("sinusoid replayed at frame rate matches the batch clamp statistics") {
    auto batch_cfg = load_config_file(STEFAN_CONFIG_DIR "/qp_sine.cfg");
    batch_cfg.horizon = 0.2;
    const auto batch = run_scenario(batch_cfg);
    Session s(batch_cfg);
    s.resume();
    const double frame_dt = batch_cfg.timescale / batch_cfg.frame_rate;
    const auto& sig = batch_cfg.operator_signal;
    double wall = 0.0;
    while (!s.finished()) {
        s.ingest(sig.at(s.frame().t), wall);
        s.advance_sim(frame_dt);
        wall += 1.0 / batch_cfg.frame_rate;
    }
    const auto live = s.report();
    CHECK(live.violation_count == 0);
    const auto& a = batch.report.clamp_stats;
    const auto& b = live.clamp_stats;
    MESSAGE("lower " << a.fraction(a.lower) << " vs " << b.fraction(b.lower) << ", upper " << a.fraction(a.upper)
                     << " vs " << b.fraction(b.upper));
    // One frame is 1/80 of a period, so episode edges shift by at most that much.
    CHECK(std::abs(a.fraction(a.lower) - b.fraction(b.lower)) < 0.05);
    CHECK(std::abs(a.fraction(a.upper) - b.fraction(b.upper)) < 0.05);
    CHECK(live.s_end == doctest::Approx(batch.report.s_end).epsilon(1e-3));
}

TEST_CASE("TCP protocol round trip") {
    auto cfg = live_config();
    cfg.horizon = 0.02;
    Server server(cfg, 0, 1.0);
    server.start();
    REQUIRE(server.port() != 0);
    LineClient op(server.port());
    auto first = op.next_of("frame");
    CHECK(first["v"] == 1);
    CHECK(first["paused"] == true);
    LineClient watcher(server.port());
    watcher.next_of("frame");

    watcher.send(R"({"type":"pause"})");
    CHECK(watcher.next_of("error")["code"] == "read-only");
    op.send("not json");
    CHECK(op.next_of("error")["code"] == "bad-message");
    op.send(R"({"type":"input","u_o":"x"})");
    CHECK(op.next_of("error")["code"] == "bad-message");
    op.send(R"({"type":"input","u_o":1e999})");
    CHECK(op.next_of("error")["code"] == "bad-message");
    op.send(R"({"type":"set_timescale","r":-1})");
    CHECK(op.next_of("error")["code"] == "bad-message");

    op.send(R"({"type":"input","u_o":1e9,"ct":0})");
    op.send(R"({"type":"resume"})");
    auto report = watcher.next_of("report");
    CHECK(report["v"] == 1);
    CHECK(report["status"] == "ok");
    CHECK(report["violation_count"] == 0);
    auto last = op.next_of("frame");
    while (!last["finished"].get<bool>()) last = op.next_of("frame");
    CHECK(last["U_o"] == 1e9);
    CHECK(last["U_applied"].get<double>() ==
          median3(last["U_lower"].get<double>(), 1e9, last["U_upper"].get<double>()));
    server.stop();
}

TEST_CASE("control passes to the next client when the operator leaves") {
    auto cfg = live_config();
    Server server(cfg, 0, 1e-3);
    server.start();
    auto op = std::make_unique<LineClient>(server.port());
    op->next_of("frame");
    LineClient second(server.port());
    second.next_of("frame");
    op.reset();
    bool promoted = false;
    for (int k = 0; k < 50 && !promoted; ++k) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        second.send(R"({"type":"set_timescale","r":0.002})");
        for (;;) {
            auto j = second.next();
            if (j["type"] == "error") break;
            if (j["type"] == "frame" && j["timescale"] == 0.002) {
                promoted = true;
                break;
            }
        }
    }
    CHECK(promoted);
    server.stop();
}

}
