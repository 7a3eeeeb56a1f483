#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "stefan/control.hpp"

using namespace stefan;

TEST_SUITE("control") {

TEST_CASE("non-overshooting law") {
    CHECK(nonovershooting(0.0, 0.0, {.c1 = 3.0, .c2 = 4.0}) == 0.0);
    CHECK(nonovershooting(2.0, 1.0, {.c1 = 1.0, .c2 = 2.0}) == 1.0);
    CHECK(nonovershooting(1.0, 2.0, {.c1 = 1.0, .c2 = 1.0}) == -3.0);
}

TEST_CASE("QP filter") {
    const QpGains g{.k1 = 2.0, .k2 = 3.0, .delta1 = 1.0, .delta2 = 4.0};
    auto d = qp_filter(5.0, 2.0, 1.0, g);
    CHECK(d.u_lower == 3.0);
    CHECK(d.u_upper == 12.0);
    CHECK(d.u_applied == 5.0);
    CHECK(d.clamp == Clamp::kNone);

    d = qp_filter(0.0, 2.0, 1.0, g);
    CHECK(d.u_applied == 3.0);
    CHECK(d.clamp == Clamp::kLower);
    d = qp_filter(20.0, 2.0, 1.0, g);
    CHECK(d.u_applied == 12.0);
    CHECK(d.clamp == Clamp::kUpper);
    CHECK(d.u_operator == 20.0);

    const QpGains tight{.k1 = 2.0, .k2 = 3.0};
    for (double u_o : {-1e9, 0.0, 7.0, 1e9}) {
        CHECK(qp_filter(u_o, 2.0, 1.0, tight).u_applied == -2.0 * 1.0 + 3.0 * 2.0);
    }
}

TEST_CASE("infeasible bounds resolve to the upper bound") {
    // sigma < 0 with delta2 > 0 pushes U^* below U_*
    const auto d = qp_filter(0.0, -1.0, 0.0, {.k1 = 1.0, .k2 = 1.0, .delta1 = 0.0, .delta2 = 1.0});
    CHECK(d.u_lower > d.u_upper);
    CHECK(d.u_applied == d.u_upper);
    CHECK(d.clamp == Clamp::kInfeasibleResolved);
}

TEST_CASE("upper-bound QP filter") {
    const QpGains g{.k1 = 2.0, .k2 = 3.0, .delta1 = 1.0, .delta2 = 4.0};
    SUBCASE("deficit branch active: same as the plain filter") {
        // (k2 + d2) sigma = 14 <= k1 q_bar = 200
        for (double u_o : {-50.0, 5.0, 50.0}) {
            const auto a = qp_filter_upper(u_o, 2.0, 1.0, g, 100.0);
            const auto b = qp_filter(u_o, 2.0, 1.0, g);
            CHECK(a.u_applied == b.u_applied);
            CHECK(a.u_upper == b.u_upper);
            CHECK(a.clamp == b.clamp);
        }
    }
    SUBCASE("ceiling branch active") {
        // (k2 + d2) sigma = 35 > k1 q_bar = 20 so U^* = -2 + 20 = 18, U_* = 12
        const auto d = qp_filter_upper(100.0, 5.0, 1.0, g, 10.0);
        CHECK(d.u_lower == 12.0);
        CHECK(d.u_upper == 18.0);
        CHECK(d.u_applied == 18.0);
        CHECK(d.clamp == Clamp::kUpper);
    }
    SUBCASE("flux at the ceiling cannot grow") {
        const double q_bar = 10.0;
        for (double sigma : {0.0, 1.0, 100.0, 1e6}) {
            const auto d = qp_filter_upper(1e9, sigma, q_bar, g, q_bar);
            CHECK(d.u_applied <= 0.0);
        }
    }
    SUBCASE("zero deficit forces cooling") {
        const auto d = qp_filter_upper(100.0, 0.0, 1.0, {.k1 = 2.0, .k2 = 1.0}, 10.0);
        CHECK(d.u_upper == -2.0);
        CHECK(d.u_applied == -2.0);
    }
}

TEST_CASE("flux ceiling needs the smaller of the two upper bounds") {
    // Reduced dynamics sigma' = -qc, qc' = U under a saturating heating command, with a
    // deficit large enough that the deficit bound alone would allow qc ~ 4 q_bar.
    const QpGains g{.k1 = 64.4, .k2 = 973.0, .delta1 = 129.0, .delta2 = 60.0};
    const double q_bar = 3e6, dt = 1e-5;
    auto run = [&](bool use_max) {
        double sigma = 1e6, qc = 1e6, q_peak = qc;
        for (int n = 0; n < 50000; ++n) {
            double U;
            if (use_max) {
                const double lower = -(g.k1 + g.delta1) * qc + g.k2 * sigma;
                const double upper = -g.k1 * qc + std::max((g.k2 + g.delta2) * sigma, g.k1 * q_bar);
                U = saturate(1e9, lower, upper).u_applied;
            } else {
                U = qp_filter_upper(1e9, sigma, qc, g, q_bar).u_applied;
            }
            sigma -= (qc + U * dt / 2) * dt;
            qc += U * dt;
            q_peak = std::max(q_peak, qc);
        }
        return q_peak;
    };
    CHECK(run(false) <= q_bar * (1 + 1e-12));
    CHECK(run(true) > 1.5 * q_bar);
}

TEST_CASE("median property and feasibility on the safe set") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        const QpGains g{.k1 = 0.1 + 10 * u(rng), .k2 = 0.1 + 10 * u(rng), .delta1 = 5 * u(rng), .delta2 = 5 * u(rng)};
        const double sigma = 1e3 * u(rng), qc = 1e3 * u(rng);
        const double u_o = 1e5 * (u(rng) - 0.5);
        const auto d = qp_filter(u_o, sigma, qc, g);
        REQUIRE(d.u_lower <= d.u_upper);
        std::vector<double> v{d.u_lower, u_o, d.u_upper};
        std::sort(v.begin(), v.end());
        CHECK(d.u_applied == v[1]);
        CHECK(d.clamp != Clamp::kInfeasibleResolved);
    }
}

TEST_CASE("second-order actuator law") {
    const NonovGains g{.c1 = 1.0, .c2 = 1.0, .c3 = 1.0};
    CHECK(nonovershooting_high(0.0, 0.0, 0.0, g) == 0.0);
    CHECK(nonovershooting_high(1.0, 1.0, 1.0, g) == -5.0);

    // On h4 = 0 the law keeps h4 stationary: d/dt (p_nonov - p) = 0 with sigma' = -qc, qc' = p.
    const NonovGains h{.c1 = 1.5, .c2 = 2.5, .c3 = 4.0};
    const double sigma = 3.0, qc = 0.7;
    const double p = h.c1 * h.c2 * sigma - (h.c1 + h.c2) * qc;
    const double U = nonovershooting_high(sigma, qc, p, h);
    const double dt = 1e-6;
    const double sigma1 = sigma - qc * dt, qc1 = qc + p * dt, p1 = p + U * dt;
    const double h4_1 = h.c1 * h.c2 * sigma1 - (h.c1 + h.c2) * qc1 - p1;
    CHECK(std::abs(h4_1) < 1e-10);
}

TEST_CASE("two-phase law") {
    CHECK(nonovershooting_two_phase(0.0, 0.0, {.c1 = 2.0, .c2 = 3.0}) == 0.0);
    CHECK(nonovershooting_two_phase(1.0, 1.0, {.c1 = 2.0, .c2 = 3.0}) == 1.0);
    const NonovGains g{.c1 = 0.3, .c2 = 7.0};
    CHECK(nonovershooting_two_phase(4.2, 1.1, g) == nonovershooting(4.2, 1.1, g));
}

TEST_CASE("gain validation") {
    const InitialCbfData init{.sigma0 = 8.0, .qc0 = 64.4};
    SUBCASE("QP gains") {
        auto r = validate_gains(init, QpGains{.k1 = 64.4, .k2 = 1.0}, ControlVariant::kQp);
        CHECK(r.ok());
        r = validate_gains(init, QpGains{.k1 = 8.0, .k2 = 1.0}, ControlVariant::kQp);
        CHECK_FALSE(r.ok());
        REQUIRE(r.find("gains.k1_initial_h3"));
        CHECK(r.find("gains.k1_initial_h3")->margin == doctest::Approx(-0.05));
    }
    SUBCASE("order 2") {
        const InitialCbfData hi{.sigma0 = 2.0, .qc0 = 1.0, .p0 = -3.0};
        auto r = validate_gains(hi, NonovGains{.c1 = 2.9, .c2 = 100.0, .c3 = 1.0}, ControlVariant::kNonov2);
        CHECK_FALSE(r.find("gains.c1_order2")->pass);
        r = validate_gains(hi, NonovGains{.c1 = 3.0, .c2 = 100.0, .c3 = 1.0}, ControlVariant::kNonov2);
        CHECK(r.find("gains.c1_order2")->pass);
        CHECK(r.find("gains.c1_order2")->margin == doctest::Approx(0.0));
        // c2 >= (p0 + c1 qc0)/(c1 sigma0 - qc0) = 0/5
        CHECK(r.ok());
    }
    SUBCASE("upper-bound ceiling on c2") {
        const InitialCbfData d{.sigma0 = 1.0, .qc0 = 1.0};
        // c2 <= c1 q_bar / (c1 sigma0 - qc0) = 2 * 4 / 1 = 8
        CHECK(validate_gains(d, NonovGains{.c1 = 2.0, .c2 = 8.0}, ControlVariant::kUpper, 4.0).ok());
        auto r = validate_gains(d, NonovGains{.c1 = 2.0, .c2 = 9.0}, ControlVariant::kUpper, 4.0);
        CHECK_FALSE(r.ok());
        CHECK(r.find("gains.c2_upper")->margin == doctest::Approx(-1.0));
    }
    SUBCASE("non-positive deficit") {
        CHECK_THROWS_AS(validate_gains({.sigma0 = 0.0, .qc0 = 1.0}, NonovGains{.c1 = 1.0, .c2 = 1.0},
                                       ControlVariant::kNonov1),
                        StefanError);
        try {
            validate_gains({.sigma0 = -1.0, .qc0 = 1.0}, NonovGains{.c1 = 1.0, .c2 = 1.0}, ControlVariant::kNonov1);
        } catch (const StefanError& e) {
            CHECK(e.code() == ErrorCode::kSetpointAssumption);
        }
    }
}

TEST_CASE("one-phase assumptions") {
    const auto mat = MaterialProperties::ti6al4v();
    Grid g(200);
    std::vector<double> theta(g.n_nodes());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = 1.0 - g.node(i);
    OnePhaseState st(0.0, 1e-5, theta);
    const ActuatorState act{.qc = 1714622.08};
    auto r = validate_scenario_assumptions(st, act, mat, 1e-3, {.s_r = 2e-4}, ControlVariant::kNonov1);
    CHECK(r.ok());
    const auto* a3 = r.find("A3.setpoint_reachable");
    REQUIRE(a3);
    CHECK(2e-4 - a3->margin == doctest::Approx(1.00145e-5).epsilon(1e-4));

    r = validate_scenario_assumptions(st, act, mat, 1e-3, {.s_r = 5e-6}, ControlVariant::kNonov1);
    CHECK_FALSE(r.find("A3.setpoint_reachable")->pass);

    r = validate_scenario_assumptions(st, ActuatorState{.qc = -1.0}, mat, 1e-3, {.s_r = 2e-4},
                                      ControlVariant::kNonov1);
    CHECK_FALSE(r.find("A2.initial_flux_nonnegative")->pass);

    SUBCASE("upper-bound assumptions") {
        // dT0 = s0/s_r (T* - Tm) = 0.05 (20) = 1 so the unit affine profile sits on the envelope
        const SetpointSpec spec{.s_r = 2e-4, .T_star = 1670.0, .q_star = 3e6};
        r = validate_scenario_assumptions(st, act, mat, 1e-3, spec, ControlVariant::kUpper);
        CHECK(r.ok());
        const SetpointSpec cold{.s_r = 2e-4, .T_star = 1660.0};
        r = validate_scenario_assumptions(st, act, mat, 1e-3, cold, ControlVariant::kUpper);
        CHECK_FALSE(r.find("A5.profile_below_affine_envelope")->pass);
        CHECK_FALSE(r.find("A4.initial_flux_below_ceiling")->pass);
    }
}

TEST_CASE("two-phase assumptions") {
    TwoPhaseMaterial mat{.liquid = MaterialProperties::unit(), .solid = MaterialProperties::unit(), .L = 1.0};
    const std::vector<double> zero(41, 0.0);
    TwoPhaseState st(0.0, 0.4, 1.0, zero, zero);
    const TwoPhaseBounds b{.T_l_bar = 0.01, .T_s_bar = 0.01, .eta_l = 10.0, .eta_s = 10.0, .q_f_bar = 0.04};
    auto r = validate_scenario_assumptions(st, 0.01, mat, {.s_r = 0.45}, {.c1 = 1.0, .c2 = 1.0}, b);
    for (const auto& c : r.checks) INFO(c.name << " " << c.margin << " " << c.detail);
    CHECK(r.ok());
    CHECK(r.find("A7.final_interface_inside")->margin == doctest::Approx(0.4));

    auto big = b;
    big.q_f_bar = 0.5;
    r = validate_scenario_assumptions(st, 0.01, mat, {.s_r = 0.45}, {.c1 = 1.0, .c2 = 1.0}, big);
    CHECK_FALSE(r.find("A9.disturbance_bound")->pass);

    r = validate_scenario_assumptions(st, 0.01, mat, {.s_r = 0.3}, {.c1 = 1.0, .c2 = 1.0}, b);
    CHECK_FALSE(r.find("A8.setpoint_beyond_s_inf")->pass);
}

}
