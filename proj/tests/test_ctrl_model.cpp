#include <doctest.h>

#include <cmath>
#include <cstring>

#include "dhap/model/mvp.hpp"
#include "dhap/numerics/integrate.hpp"

using namespace dhap;

TEST_SUITE_BEGIN("ctrl_model");

namespace {

ctrl::State integrate_const(const ctrl::Params& p, const ctrl::Inputs& u, ctrl::State x,
                            double duration, double h = 0.5) {
    auto f = [&](double, const ctrl::State& s) { return ctrl::drift(s, u, p); };
    return rk4_integrate(f, 0.0, x, h, static_cast<int>(std::round(duration / h)));
}

} // namespace

TEST_CASE("glucose drift balances where production meets effectiveness") {
    ctrl::Params p = ctrl::nominal_params();
    ctrl::State x = ctrl::State::Zero();
    x[ctrl::idx::G] = p.EGP / p.GEZI;
    x[ctrl::idx::LOG_SI] = -20.0;  // SI irrelevant with zero plasma insulin
    ctrl::State dx = ctrl::drift(x, ctrl::Inputs{}, p);
    CHECK(std::abs(dx[ctrl::idx::G]) < 1e-12);
}

TEST_CASE("constant basal drives both insulin compartments to u/CI") {
    ctrl::Params p = ctrl::nominal_params();
    ctrl::Inputs u;
    u.u_ba = 9.6;
    ctrl::State x = ctrl::State::Zero();
    x[ctrl::idx::G] = 6.0;
    x[ctrl::idx::GI] = 6.0;
    x[ctrl::idx::LOG_SI] = -6.3;
    x = integrate_const(p, u, x, 20.0 / p.k_1);
    CHECK(x[ctrl::idx::ISC] == doctest::Approx(u.u_ba / p.C_I).epsilon(1e-6));
    CHECK(x[ctrl::idx::IP] == doctest::Approx(u.u_ba / p.C_I).epsilon(1e-6));
}

TEST_CASE("meal appearance contributes k_m D2 / V_G to the glucose rate") {
    ctrl::Params p = ctrl::nominal_params();
    p.k_m = 0.02;
    p.EGP = 0.0;
    ctrl::State x = ctrl::State::Zero();
    x[ctrl::idx::D2] = p.V_G;
    x[ctrl::idx::LOG_SI] = -6.0;
    ctrl::State dx = ctrl::drift(x, ctrl::Inputs{}, p);
    CHECK(dx[ctrl::idx::G] == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("diffusion matrix carries the two noise channels") {
    ctrl::Params p = ctrl::nominal_params();

    SUBCASE("zero coefficients give a zero matrix") {
        p.sigma_G = 0.0;
        p.sigma_SI = 0.0;
        CHECK(ctrl::diffusion(p).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("glucose noise lands in the G row of the first column") {
        p.sigma_G = 0.5;
        ctrl::Diffusion sigma = ctrl::diffusion(p);
        CHECK(sigma(ctrl::idx::G, 0) == 0.5);
        sigma(ctrl::idx::G, 0) = 0.0;
        sigma(ctrl::idx::LOG_SI, 1) = 0.0;
        CHECK(sigma.cwiseAbs().maxCoeff() == 0.0);  // nothing else populated
    }
}

TEST_CASE("output selects interstitial glucose and ignores the sensitivity state") {
    ctrl::State x = ctrl::State::Zero();
    x[ctrl::idx::GI] = 5.5;
    CHECK(ctrl::output(x) == 5.5);
    ctrl::State y = x;
    y[ctrl::idx::LOG_SI] += 3.0;
    CHECK(ctrl::output(y) == ctrl::output(x));
    Eigen::Matrix<double, 1, ctrl::kStateDim> c = ctrl::output_jacobian();
    CHECK(c(0, ctrl::idx::GI) == 1.0);
    CHECK(c.cwiseAbs().sum() == 1.0);
}

TEST_CASE("deterministic trajectories are reproducible bit for bit") {
    ctrl::Params p = ctrl::nominal_params();
    p.sigma_G = 0.0;
    p.sigma_SI = 0.0;
    ctrl::Inputs u;
    u.u_ba = 8.0;
    u.D = 20.0;
    ctrl::State x0 = ctrl::equilibrium_state(p, 8.0, std::log(1.9e-3));
    ctrl::State a = integrate_const(p, u, x0, 360.0);
    ctrl::State b = integrate_const(p, u, x0, 360.0);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * ctrl::kStateDim) == 0);
}

TEST_CASE("the deterministic part of log SI never changes") {
    ctrl::Params p = ctrl::nominal_params();
    ctrl::State x = ctrl::State::Zero();
    x[ctrl::idx::G] = 8.0;
    x[ctrl::idx::IP] = 11.0;
    x[ctrl::idx::LOG_SI] = -5.0;
    ctrl::Inputs u;
    u.u_ba = 20.0;
    u.u_G = 3.0;
    CHECK(ctrl::drift(x, u, p)[ctrl::idx::LOG_SI] == 0.0);
}

TEST_CASE("insulin lowers and glucagon raises simulated glucose") {
    ctrl::Params p = ctrl::nominal_params();
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(p, 6.0, log_si);
    ctrl::State x0 = ctrl::equilibrium_state(p, u_eq, log_si);

    ctrl::Inputs base;
    base.u_ba = u_eq;
    const double g_base = integrate_const(p, base, x0, 360.0)[ctrl::idx::G];
    CHECK(g_base == doctest::Approx(6.0).epsilon(1e-6));

    ctrl::Inputs more_insulin = base;
    more_insulin.u_ba = 1.5 * u_eq;
    CHECK(integrate_const(p, more_insulin, x0, 360.0)[ctrl::idx::G] < g_base);

    ctrl::Inputs glucagon = base;
    glucagon.u_G = 2.0;
    CHECK(integrate_const(p, glucagon, x0, 360.0)[ctrl::idx::G] > g_base);
}

TEST_CASE("calibration pins the equilibrium at the requested glucose") {
    ctrl::Params p = ctrl::nominal_params();
    const double log_si = std::log(2.4e-3);
    ctrl::Params cal = ctrl::calibrated_for_basal(p, 5.0, 6.0, log_si);
    ctrl::State eq = ctrl::equilibrium_state(cal, 5.0, log_si);
    CHECK(eq[ctrl::idx::G] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_SUITE_END();
