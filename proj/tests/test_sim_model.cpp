#include <doctest.h>

#include <cmath>

#include "dhap/model/hovorka.hpp"
#include "dhap/numerics/integrate.hpp"

using namespace dhap;
using Vec1 = Eigen::Matrix<double, 1, 1>;

TEST_SUITE_BEGIN("sim_model");

namespace {

sim::State integrate_const(const sim::Params& p, const sim::Inputs& u, sim::State x,
                           double duration, double h = 0.5) {
    auto f = [&](double t, const sim::State& s) { return sim::derivative(s, u, p, t); };
    return rk4_integrate(f, 0.0, x, h, static_cast<int>(std::round(duration / h)));
}

} // namespace

TEST_CASE("zero inputs and zero masses with TE at its fixed point is a full equilibrium") {
    // Endogenous production enters additively, so the all-zero equilibrium
    // exists exactly for a patient with EGP_0 = 0.
    sim::Params p = sim::nominal_params();
    p.EGP_0 = 0.0;
    sim::State x = sim::State::Zero();
    x[sim::idx::TE] = p.c_2;
    sim::Inputs u;
    sim::State dx = sim::derivative(x, u, p, 0.0);
    CHECK(dx.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant infusion drives the insulin chain to its analytic steady state") {
    sim::Params p = sim::nominal_params();
    p.tau_S = 55.0;
    sim::Inputs u;
    u.u_I = 1.0;
    sim::State x = sim::State::Zero();
    x[sim::idx::TE] = p.c_2;
    x = integrate_const(p, u, x, 4000.0);
    CHECK(x[sim::idx::S1] == doctest::Approx(55.0).epsilon(1e-6));
    CHECK(x[sim::idx::S2] == doctest::Approx(55.0).epsilon(1e-6));
    CHECK(x[sim::idx::I] == doctest::Approx(1.0 / (p.V_I * p.k_e)).epsilon(1e-6));
}

TEST_CASE("doubling the infusion doubles steady-state plasma insulin") {
    sim::Params p = sim::nominal_params();
    sim::State x0 = sim::State::Zero();
    x0[sim::idx::TE] = p.c_2;
    sim::Inputs u1, u2;
    u1.u_I = 1.0;
    u2.u_I = 2.0;
    const double i1 = integrate_const(p, u1, x0, 4000.0)[sim::idx::I];
    const double i2 = integrate_const(p, u2, x0, 4000.0)[sim::idx::I];
    CHECK(i2 == doctest::Approx(2.0 * i1).epsilon(1e-9));
}

TEST_CASE("meal and glucagon chains reach their analytic steady states") {
    sim::Params p = sim::nominal_params();
    sim::Inputs u;
    u.D = 2.0;
    u.u_G = 0.5;
    sim::State x = sim::State::Zero();
    x[sim::idx::TE] = p.c_2;
    x = integrate_const(p, u, x, 20.0 * std::max(p.tau_D, p.tau_Glu) + 500.0);
    CHECK(x[sim::idx::D1] == doctest::Approx(p.A_G * u.D * p.tau_D).epsilon(1e-6));
    CHECK(x[sim::idx::D2] == doctest::Approx(p.A_G * u.D * p.tau_D).epsilon(1e-6));
    CHECK(x[sim::idx::Q1G] == doctest::Approx(u.u_G * p.tau_Glu).epsilon(1e-6));
    CHECK(x[sim::idx::Q2G] == doctest::Approx(u.u_G * p.tau_Glu).epsilon(1e-6));
}

TEST_CASE("glucose flux corrections at their thresholds") {
    sim::Params p = sim::nominal_params();
    sim::State x = sim::State::Zero();

    SUBCASE("renal clearance vanishes at 9 from both branches") {
        x[sim::idx::Q1] = 9.0 * p.V_G;
        sim::Fluxes f = sim::glucose_fluxes(x, p);
        CHECK(f.FR == 0.0);
        CHECK(0.003 * (f.G - 9.0) * p.V_G == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("renal clearance above threshold") {
        p.V_G = 10.0;
        x[sim::idx::Q1] = 10.0 * p.V_G;
        sim::Fluxes f = sim::glucose_fluxes(x, p);
        CHECK(f.FR == doctest::Approx(0.03).epsilon(1e-12));
    }
    SUBCASE("EGP equals its zero-action value when x3 = 0") {
        sim::Fluxes f = sim::glucose_fluxes(x, p);
        CHECK(f.EGP == p.EGP_0);
    }
    SUBCASE("non-insulin-dependent flux is continuous at 4.5") {
        x[sim::idx::Q1] = 4.5 * p.V_G;
        sim::Fluxes f = sim::glucose_fluxes(x, p);
        const double low_branch = p.F_01 * f.G / 4.5;
        CHECK(std::abs(f.F01c - low_branch) < 1e-12 * p.F_01);
        CHECK(std::abs(f.F01c - p.F_01) < 1e-12 * p.F_01);
    }
}

TEST_CASE("exercise intensity response") {
    sim::Params p = sim::nominal_params();
    CHECK(sim::exercise_response(0.0, p) == 0.0);
    CHECK(sim::exercise_response(p.a * p.HR_0, p) == doctest::Approx(0.5).epsilon(1e-12));
    double prev = -1.0;
    for (double e1 = 0.0; e1 <= 200.0; e1 += 2.5) {
        const double v = sim::exercise_response(e1, p);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        prev = v;
    }
}

TEST_CASE("output is glucose in the interstitial compartment") {
    sim::State x = sim::State::Zero();
    x[sim::idx::GI] = 6.0;
    CHECK(sim::output(x) == 6.0);
}

TEST_CASE("interstitial glucose is a unity-gain first-order lag") {
    sim::Params p = sim::nominal_params();
    const double g_held = 8.0;
    auto lag = [&](double, const Vec1& gi) { return Vec1((g_held - gi[0]) / p.tau_IG); };

    SUBCASE("settles on the held value") {
        Vec1 gi(0.0);
        gi = rk4_integrate(lag, 0.0, gi, 0.25, static_cast<int>(20.0 * p.tau_IG / 0.25));
        CHECK(gi[0] == doctest::Approx(8.0).epsilon(1e-6));
    }
    SUBCASE("covers 1 - 1/e of a unit step after one time constant") {
        Vec1 gi(g_held - 1.0);  // unit step below the plasma value
        gi = rk4_integrate(lag, 0.0, gi, 0.01, static_cast<int>(p.tau_IG / 0.01));
        const double covered = gi[0] - (g_held - 1.0);
        CHECK(covered == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-6));
    }
}

TEST_CASE("derivative rejects non-finite parameters with the component name") {
    sim::Params p = sim::nominal_params();
    p.V_I = 0.0;  // makes dI infinite
    sim::State x = sim::State::Zero();
    x[sim::idx::TE] = p.c_2;
    x[sim::idx::S2] = 1.0;
    CHECK_THROWS_WITH_AS(sim::derivative(x, sim::Inputs{}, p, 0.0),
                         doctest::Contains("I"), ModelError);
}

TEST_CASE("equilibrium basal holds glucose at the target") {
    sim::Params p = sim::nominal_params();
    const double u_ba = sim::equilibrium_basal(p, 6.0);
    sim::State x = sim::equilibrium_state(p, u_ba);
    CHECK(x[sim::idx::Q1] / p.V_G == doctest::Approx(6.0).epsilon(1e-6));
    sim::Inputs u;
    u.u_I = u_ba;
    sim::State x_end = integrate_const(p, u, x, 1440.0);
    CHECK(x_end[sim::idx::Q1] / p.V_G == doctest::Approx(6.0).epsilon(1e-4));
}

TEST_SUITE_END();
