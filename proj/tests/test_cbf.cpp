#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "stefan/cbf.hpp"

using namespace stefan;

namespace {

std::vector<double> affine_profile(std::size_t n_cells, double peak) {
    Grid g(n_cells);
    std::vector<double> v(g.n_nodes());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = peak * (1.0 - g.node(i));
    return v;
}

} // namespace

TEST_SUITE("cbf") {

TEST_CASE("one-phase deficit") {
    const auto mat = MaterialProperties::ti6al4v();
    SUBCASE("equilibrium at the barrier") {
        OnePhaseState st(0.0, 2e-4, std::vector<double>(101, 0.0));
        CHECK(sigma_one_phase(st, mat, {.s_r = 2e-4}) == 0.0);
    }
    SUBCASE("additive manufacturing setup") {
        OnePhaseState st(0.0, 1e-5, affine_profile(200, 1.0));
        const double sigma = sigma_one_phase(st, mat, {.s_r = 2e-4});
        CHECK(sigma == doctest::Approx(212996.532).epsilon(1e-8));
        CHECK(sigma == doctest::Approx(2.130e5).epsilon(1e-3));
    }
    SUBCASE("past the setpoint") {
        OnePhaseState st(0.0, 3e-4, std::vector<double>(101, 0.0));
        CHECK(sigma_one_phase(st, mat, {.s_r = 2e-4}) < 0.0);
    }
}

TEST_CASE("two-phase deficit") {
    TwoPhaseMaterial mat{.liquid = MaterialProperties::unit(),
                         .solid = {.k = 0.7, .rho = 1.3, .cp = 0.6, .dH = 1.0, .Tm = 1.0},
                         .L = 1.0};
    const std::vector<double> zero(41, 0.0);
    CHECK(sigma_two_phase(TwoPhaseState(0.0, 0.6, 1.0, zero, zero), mat, {.s_r = 0.6}) == 0.0);
    CHECK(sigma_two_phase(TwoPhaseState(0.0, 0.3, 1.0, zero, zero), mat, {.s_r = 0.6}) ==
          doctest::Approx(mat.gamma() * 0.3));

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> tl(41), ts(41);
        for (std::size_t i = 0; i < 41; ++i) {
            tl[i] = 2.0 * u(rng);
            ts[i] = -2.0 * u(rng);
        }
        TwoPhaseState st(0.0, 0.2 + 0.5 * u(rng), 1.0, tl, ts);
        const double s_r = 0.95;
        CHECK(sigma_two_phase(st, mat, {.s_r = s_r}) ==
              doctest::Approx(mat.gamma() * (s_r - s_infinity(st, mat))).epsilon(1e-12));
    }
}

TEST_CASE("bundle") {
    auto b = cbf_bundle(2.0, 0.0, ActuatorState{.qc = 1.0}, {.c1 = 2.0});
    CHECK(b.h1 == 2.0);
    CHECK(b.h2 == 1.0);
    CHECK(b.h3 == 3.0);
    CHECK_FALSE(b.h2_star);
    CHECK_FALSE(b.h4);

    b = cbf_bundle(0.0, 0.0, ActuatorState{.qc = 0.0}, {.c1 = 5.0});
    CHECK(b.h1 == 0.0);
    CHECK(b.h2 == 0.0);
    CHECK(b.h3 == 0.0);

    b = cbf_bundle(2.0, 0.0, ActuatorState{.qc = 1.0}, {.c1 = 2.0, .q_bar = 5.0});
    REQUIRE(b.h2_star);
    CHECK(*b.h2_star == 4.0);

    b = cbf_bundle(2.0, 0.0, ActuatorState{.qc = 1.0, .p = -0.5}, {.c1 = 1.0, .c2 = 3.0});
    REQUIRE(b.h4);
    REQUIRE(b.h5);
    CHECK(*b.h4 == doctest::Approx(3.0 * 2.0 - 4.0 * 1.0 + 0.5));
    CHECK(*b.h5 == doctest::Approx(0.5));
}

TEST_CASE("h3 = c1 h1 - h2 for every evaluation") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double sigma = u(rng), qc = std::abs(u(rng)), c1 = std::abs(u(rng)) * 1e-4 + 1e-3;
        const auto b = cbf_bundle(sigma, 0.0, ActuatorState{.qc = qc}, {.c1 = c1});
        CHECK(b.h3 == c1 * b.h1 - b.h2);
    }
}

TEST_CASE("h_min scans the whole grid") {
    auto theta = affine_profile(50, 1.0);
    theta[17] = -0.25;
    OnePhaseState st(0.0, 1e-3, theta);
    const auto b = cbf_bundle(st, ActuatorState{.qc = 0.0}, MaterialProperties::unit(), {.s_r = 2e-3}, {.c1 = 1.0});
    CHECK(b.h_min == -0.25);
}

TEST_CASE("setpoint spec") {
    const auto mat = MaterialProperties::ti6al4v();
    CHECK_THROWS_AS(SetpointSpec{.s_r = 0.0}.validate(1e-3, mat.Tm), StefanError);
    CHECK_THROWS_AS(SetpointSpec{.s_r = 2e-3}.validate(1e-3, mat.Tm), StefanError);
    CHECK_THROWS_AS((SetpointSpec{.s_r = 2e-4, .T_star = 1600.0}.validate(1e-3, mat.Tm)), StefanError);
    CHECK_THROWS_AS((SetpointSpec{.s_r = 2e-4, .q_star = 0.0}.validate(1e-3, mat.Tm)), StefanError);
    CHECK_NOTHROW((SetpointSpec{.s_r = 2e-4, .T_star = 1670.0}.validate(1e-3, mat.Tm)));

    CHECK_FALSE(SetpointSpec{.s_r = 2e-4}.flux_ceiling(mat));
    const SetpointSpec both{.s_r = 2e-4, .T_star = 1670.0, .q_star = 3e6};
    CHECK(*both.flux_ceiling(mat) == doctest::Approx(3e6));
    const SetpointSpec temp_only{.s_r = 2e-4, .T_star = 1660.0};
    CHECK(*temp_only.flux_ceiling(mat) == doctest::Approx(32.5 * 10.0 / 2e-4));
}

}
