#include "doctest.h"

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "stefan/verification.hpp"

using namespace stefan;

TEST_SUITE("verification") {

TEST_CASE("monitor") {
    const MonitorLimits lim{.s_r = 2.0, .L = 3.0};
    const SafetyTolerances tol{};
    OnePhaseState eq(0.0, 2.0, std::vector<double>(17, 0.0));
    const ActuatorState zero{.qc = 0.0};
    auto b = cbf_bundle(eq, zero, MaterialProperties::unit(), {.s_r = 2.0}, {.c1 = 1.0});
    CHECK(monitor_step(eq, zero, b, lim, tol).empty());

    const ActuatorState neg{.qc = -1e-6};
    b = cbf_bundle(eq, neg, MaterialProperties::unit(), {.s_r = 2.0}, {.c1 = 1.0});
    auto v = monitor_step(eq, neg, b, lim, tol);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == ViolationKind::kNegativeFlux);
    CHECK(v[0].magnitude == doctest::Approx(1e-6));
    CHECK(monitor_step(eq, neg, b, lim, {.tol_q = 1e-5}).empty());

    SUBCASE("overshoot and ceilings") {
        std::vector<double> theta(17, 5.0);
        OnePhaseState hot(0.3, 2.5, theta);
        const ActuatorState q{.qc = 11.0};
        const auto bb = cbf_bundle(hot, q, MaterialProperties::unit(), {.s_r = 2.0}, {.c1 = 1.0});
        MonitorLimits l2 = lim;
        l2.q_bar = 10.0;
        l2.theta_ceiling = 4.0;
        std::set<ViolationKind> kinds;
        for (const auto& x : monitor_step(hot, q, bb, l2, tol)) {
            kinds.insert(x.kind);
            CHECK(x.t == 0.3);
        }
        CHECK(kinds == std::set<ViolationKind>{ViolationKind::kEnergyDeficit, ViolationKind::kInterfaceOvershoot,
                                               ViolationKind::kFluxCeiling, ViolationKind::kTemperatureCeiling});
    }
    SUBCASE("two-phase signs") {
        std::vector<double> tl(17, 0.0), ts(17, 0.0);
        ts[5] = 1e-3;
        tl[3] = -1e-3;
        TwoPhaseState st(0.0, 0.5, 1.0, tl, ts);
        TwoPhaseMaterial mat{.liquid = MaterialProperties::unit(), .solid = MaterialProperties::unit(), .L = 1.0};
        const auto bb = cbf_bundle(st, zero, mat, {.s_r = 0.6}, {.c1 = 1.0});
        std::set<ViolationKind> kinds;
        for (const auto& x : monitor_step(st, zero, bb, {.s_r = 0.6, .L = 1.0, .check_setpoint = false}, tol)) {
            kinds.insert(x.kind);
        }
        CHECK(kinds == std::set<ViolationKind>{ViolationKind::kLiquidBelowMelting, ViolationKind::kSolidAboveMelting});
    }
}

TEST_CASE("every theorem claim maps to one violation kind") {
    std::set<ViolationKind> covered;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& c : theorem_claims()) {
        CHECK(seen.insert({c.theorem, c.inequality}).second);
        covered.insert(c.kind);
    }
    CHECK(covered.size() == kViolationKindCount);
    std::set<std::string> names;
    for (std::size_t k = 0; k < kViolationKindCount; ++k) names.insert(to_string(static_cast<ViolationKind>(k)));
    CHECK(names == std::set<std::string>{"energy-deficit", "negative-flux", "liquid-below-melting",
                                         "interface-overshoot", "interface-out-of-domain", "flux-ceiling",
                                         "temperature-ceiling", "solid-above-melting"});
}

TEST_CASE("safety monitor fold") {
    SafetyMonitor m({.s_r = 2.0, .L = 3.0}, {}, 2);
    OnePhaseState eq(0.0, 2.0, std::vector<double>(17, 0.0));
    const ActuatorState neg{.qc = -1.0};
    const auto b = cbf_bundle(eq, neg, MaterialProperties::unit(), {.s_r = 2.0}, {.c1 = 1.0});
    for (int i = 0; i < 5; ++i) m.observe(eq, neg, b);
    CHECK(m.count() == 5);
    CHECK(m.stored().size() == 2);
    CHECK(m.count(ViolationKind::kNegativeFlux) == 5);
    CHECK_THROWS_AS(SafetyMonitor({.s_r = 1.0, .L = 2.0}, {.tol_T = -1.0}), StefanError);
}

TEST_CASE("phi norm") {
    OnePhaseState eq(0.0, 2.0, std::vector<double>(17, 0.0));
    CHECK(phi_norm(eq, {.qc = 0.0}, {.s_r = 2.0}) == 0.0);
    CHECK(phi_norm(eq, {.qc = 3.0}, {.s_r = 2.0}) == 9.0);
    CHECK(phi_norm(eq, {.qc = 3.0, .p = 2.0}, {.s_r = 2.0}) == 13.0);
    OnePhaseState off(0.0, 1.5, std::vector<double>(17, 0.0));
    CHECK(phi_norm(off, {.qc = 0.0}, {.s_r = 2.0}) == 0.25);
    TwoPhaseState two(0.0, 0.5, 1.0, std::vector<double>(17, 1.0), std::vector<double>(17, -2.0));
    // liquid: 0.5 * 1 (trapezoid with the pinned node), solid likewise with 4
    const double h = 1.0 / 16;
    const double liquid = 0.5 * (1.0 - h / 2);
    const double solid = 0.5 * 4.0 * (1.0 - h / 2);
    CHECK(phi_norm(two, {.qc = 1.0}, {.s_r = 0.5}) == doctest::Approx(liquid + solid + 1.0));
}

TEST_CASE("decay fit") {
    std::vector<double> t, phi;
    for (int i = 0; i < 50; ++i) {
        t.push_back(0.1 * i);
        phi.push_back(5.0 * std::exp(-2.0 * t.back()));
    }
    auto f = fit_decay(t, phi);
    CHECK(std::abs(f.M * phi[0] - 5.0) < 1e-9 * 5.0);
    CHECK(std::abs(f.b - 2.0) < 1e-9 * 2.0);
    CHECK(f.envelope_ratio == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<double> flat(50, 3.0);
    f = fit_decay(t, flat);
    CHECK(std::abs(f.b) < 1e-12);

    // noisy decay: the envelope constant bounds every sample
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (auto& p : phi) p *= u(rng);
    f = fit_decay(t, phi);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(phi[i] <= f.M_envelope() * phi[0] * std::exp(-f.b * t[i]) * (1 + 1e-12));
    }

    CHECK_THROWS_AS(fit_decay(std::span(t).first(9), std::span(phi).first(9)), StefanError);
    phi[7] = 0.0;
    try {
        fit_decay(t, phi);
        FAIL("expected throw");
    } catch (const StefanError& e) {
        CHECK(e.code() == ErrorCode::kDegenerateSeries);
    }
}

TEST_CASE("analytic CBF oracle") {
    auto h = analytic_h_oracle(1.0, 0.5, 1.0, 2.0, 1.0);
    CHECK(h.h3 == doctest::Approx(0.0676676416).epsilon(1e-9));
    CHECK(h.h1 == doctest::Approx(0.4841515201).epsilon(1e-9));
    CHECK(h.h2 == doctest::Approx(0.4164838785).epsilon(1e-9));

    h = analytic_h_oracle(1.3, 0.2, 0.7, 3.0, 0.0);
    CHECK(h.h1 == 1.3);
    CHECK(h.h2 == 0.2);
    CHECK(h.h3 == 0.7 * 1.3 - 0.2);

    h = analytic_h_oracle(2.0, 1.0, 0.5, 4.0, 3.0); // h3_0 = 0
    CHECK(h.h1 == doctest::Approx(2.0 * std::exp(-1.5)));
    CHECK(h.h2 == doctest::Approx(std::exp(-1.5)));
    CHECK(h.h3 == 0.0);

    CHECK_THROWS_AS(analytic_h_oracle(1.0, 0.5, 2.0, 2.0, 1.0), StefanError);
}

TEST_CASE("RK4 chain agrees with the closed form") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double c1 = 0.1 + 5 * u(rng), c2 = 0.1 + 5 * u(rng);
        const double h1 = 0.1 + u(rng), h2 = c1 * h1 * u(rng);
        const double T = 10.0;
        const auto x = rk4_linear(chain_matrix(c1, c2), {h1, h2, c1 * h1 - h2}, T, 20000);
        const auto e = analytic_h_oracle(h1, h2, c1, c2, T);
        CHECK(std::abs(x[0] - e.h1) <= 1e-8 * std::abs(e.h1));
        CHECK(std::abs(x[1] - e.h2) <= 1e-8 * std::abs(e.h2));
        CHECK(std::abs(x[2] - e.h3) <= 1e-8 * std::abs(e.h3));
    }
}

TEST_CASE("order-2 chain stays nonnegative") {
    std::vector<Vector<5>> path;
    rk4_linear(chain_matrix(1.0, 2.0, 3.0), {0.0, 0.0, 0.0, 1.0, 0.0}, 10.0, 5000, &path);
    for (const auto& x : path)
        for (double v : x) CHECK(v >= -1e-12);
}

TEST_CASE("run report json") {
    RunReport r;
    r.scenario = "demo";
    r.variant = "qp";
    for (int i = 0; i < 12; ++i) r.phi_series.push_back({0.1 * i, std::exp(-0.3 * i)});
    r.clamp_stats.add(Clamp::kLower);
    r.clamp_stats.add(Clamp::kNone);
    r.assumption_report.add("A2.initial_flux_nonnegative", 1.0, "qc(0) >= 0");
    r.violations.push_back({0.5, ViolationKind::kNegativeFlux, 1e-3});
    r.finalize_decay();
    REQUIRE(r.decay);
    CHECK(r.decay->b == doctest::Approx(3.0));
    const auto j = r.to_json();
    CHECK(j["v"] == 1);
    CHECK(j["decay"]["b"].get<double>() == doctest::Approx(3.0));
    CHECK(j["clamp_stats"]["lower"].get<double>() == 0.5);
    CHECK(j["violations"][0]["kind"] == "negative-flux");
    CHECK(j["assumption_report"]["ok"] == true);

    r.phi_series.resize(5);
    r.finalize_decay();
    CHECK_FALSE(r.decay);
    REQUIRE(r.phi_floor);
    CHECK(r.to_json()["decay"].is_null());
}

}
