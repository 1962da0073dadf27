#include "dhap/model/hovorka.hpp"

#include <cmath>
#include <string>

#include "dhap/errors.hpp"

namespace dhap::sim {

namespace {

constexpr double kTeFloor = 1e-3; // [min]; guards 1/TE before TE relaxes to its fixed point

const char* kStateNames[kStateDim] = {
    "S1", "S2", "I",  "x1", "x2", "x3", "D1", "D2",
    "Q1G", "Q2G", "E1", "TE", "E2", "Q1", "Q2", "GI",
};

} // namespace

const char* state_name(int i) {
    return (i >= 0 && i < kStateDim) ? kStateNames[i] : "?";
}

bool Params::valid() const {
    const double time_constants[] = {tau_S, tau_D, tau_Glu, tau_HR, tau_ex, tau_in, tau_IG};
    for (double tc : time_constants) {
        if (!(tc > 0.0)) return false;
    }
    if (!(V_G > 0.0 && V_I > 0.0)) return false;
    if (!(A_G > 0.0 && A_G <= 1.0)) return false;
    if (!(n >= 1.0)) return false;
    if (!(k_e > 0.0 && k_12 >= 0.0 && F_01 >= 0.0 && EGP_0 >= 0.0)) return false;
    if (!(k_a1 > 0.0 && k_a2 > 0.0 && k_a3 > 0.0)) return false;
    if (!(HR_0 > 0.0 && a > 0.0)) return false;
    return true;
}

Fluxes glucose_fluxes(const State& x, const Params& p) {
    Fluxes f;
    f.G = x[idx::Q1] / p.V_G;
    // Production cannot go negative however strong the insulin action.
    f.EGP = std::max(0.0, p.EGP_0 * (1.0 - x[idx::X3]));
    f.QG = p.K_Glu * p.V_G * x[idx::Q2G];
    const double e2_sq = x[idx::E2] * x[idx::E2];
    f.QE21 = p.alpha * e2_sq * x[idx::X1] * x[idx::Q1];
    f.QE22 = p.alpha * e2_sq * x[idx::X2] * x[idx::Q2];
    f.QE1 = p.beta * x[idx::E1] / p.HR_0;
    f.F01c = (f.G >= 4.5) ? p.F_01 : p.F_01 * f.G / 4.5;
    f.FR = (f.G >= 9.0) ? 0.003 * (f.G - 9.0) * p.V_G : 0.0;
    return f;
}

double exercise_response(double e1, const Params& p) {
    const double ratio = e1 / (p.a * p.HR_0);
    const double r_n = std::pow(ratio, p.n);
    return r_n / (1.0 + r_n);
}

State derivative(const State& x, const Inputs& u, const Params& p, double /*t*/) {
    const double hr = (u.HR > 0.0) ? u.HR : p.HR_0;
    const Fluxes f = glucose_fluxes(x, p);
    const double f_e1 = exercise_response(x[idx::E1], p);
    const double te = std::max(x[idx::TE], kTeFloor);

    State dx;
    dx[idx::S1] = u.u_I - x[idx::S1] / p.tau_S;
    dx[idx::S2] = (x[idx::S1] - x[idx::S2]) / p.tau_S;
    dx[idx::I] = x[idx::S2] / (p.tau_S * p.V_I) - p.k_e * x[idx::I];

    dx[idx::X1] = p.k_b1 * x[idx::I] - p.k_a1 * x[idx::X1];
    dx[idx::X2] = p.k_b2 * x[idx::I] - p.k_a2 * x[idx::X2];
    dx[idx::X3] = p.k_b3 * x[idx::I] - p.k_a3 * x[idx::X3];

    dx[idx::D1] = p.A_G * u.D - x[idx::D1] / p.tau_D;
    dx[idx::D2] = (x[idx::D1] - x[idx::D2]) / p.tau_D;

    dx[idx::Q1G] = u.u_G - x[idx::Q1G] / p.tau_Glu;
    dx[idx::Q2G] = (x[idx::Q1G] - x[idx::Q2G]) / p.tau_Glu;

    dx[idx::E1] = (hr - p.HR_0 - x[idx::E1]) / p.tau_HR;
    dx[idx::TE] = (p.c_1 * f_e1 + p.c_2 - x[idx::TE]) / p.tau_ex;
    dx[idx::E2] = -(f_e1 / p.tau_in + 1.0 / te) * x[idx::E2] + f_e1 * te / (p.c_1 + p.c_2);

    dx[idx::Q1] = x[idx::D2] / p.tau_D - f.F01c - f.FR - x[idx::X1] * x[idx::Q1] +
                  p.k_12 * x[idx::Q2] + f.EGP + f.QG - f.QE21;
    dx[idx::Q2] = x[idx::X1] * x[idx::Q1] - p.k_12 * x[idx::Q2] - x[idx::X2] * x[idx::Q2] +
                  f.QE21 - f.QE22 - f.QE1;

    dx[idx::GI] = (f.G - x[idx::GI]) / p.tau_IG;

    for (int i = 0; i < kStateDim; ++i) {
        if (!std::isfinite(dx[i])) {
            throw ModelError(std::string("sim derivative non-finite at ") + state_name(i));
        }
    }
    return dx;
}

double output(const State& x) {
    return x[idx::GI];
}

Params nominal_params(double body_weight_kg) {
    // Population values from the standard adult parameterization of this
    // model family; weight-specific quantities scale linearly with mass.
    Params p{};
    p.tau_S = 55.0;
    p.V_I = 0.12 * body_weight_kg;
    p.k_e = 0.138;
    p.k_a1 = 0.006;
    p.k_a2 = 0.06;
    p.k_a3 = 0.03;
    p.k_b1 = 51.2e-4 * p.k_a1;
    p.k_b2 = 8.2e-4 * p.k_a2;
    p.k_b3 = 520e-4 * p.k_a3;
    p.A_G = 0.8;
    p.tau_D = 40.0;
    p.tau_Glu = 12.0;
    p.K_Glu = 0.0025;
    p.HR_0 = 70.0;
    p.tau_HR = 5.0;
    p.c_1 = 500.0;
    p.c_2 = 100.0;
    p.tau_ex = 200.0;
    p.tau_in = 30.0;
    p.a = 0.5;
    p.n = 4.0;
    p.alpha = 5.6e-4;
    p.beta = 0.78;
    p.k_12 = 0.066;
    p.F_01 = 0.0097 * body_weight_kg;
    p.V_G = 0.16 * body_weight_kg;
    p.EGP_0 = 0.0161 * body_weight_kg;
    p.tau_IG = 10.0;
    return p;
}

State rest_state(const Params& p, double g0) {
    State x = State::Zero();
    x[idx::TE] = p.c_2;
    x[idx::Q1] = g0 * p.V_G;
    x[idx::GI] = g0;
    return x;
}

namespace {

// Net glucose balance dQ1/dt at the insulin steady state of rate u_ba and
// plasma glucose g, with meals, glucagon, and exercise at rest.
double glucose_balance(const Params& p, double u_ba, double g) {
    const double i_ss = u_ba / (p.V_I * p.k_e);
    const double x1 = p.k_b1 * i_ss / p.k_a1;
    const double x2 = p.k_b2 * i_ss / p.k_a2;
    const double x3 = p.k_b3 * i_ss / p.k_a3;
    const double q1 = g * p.V_G;
    const double q2 = (p.k_12 + x2) > 0.0 ? x1 * q1 / (p.k_12 + x2) : 0.0;
    const double f01c = (g >= 4.5) ? p.F_01 : p.F_01 * g / 4.5;
    const double fr = (g >= 9.0) ? 0.003 * (g - 9.0) * p.V_G : 0.0;
    return -f01c - fr - x1 * q1 + p.k_12 * q2 + std::max(0.0, p.EGP_0 * (1.0 - x3));
}

} // namespace

double equilibrium_basal(const Params& p, double target_g, double u_max) {
    // glucose_balance decreases monotonically in u_ba at fixed g.
    double lo = 0.0, hi = u_max;
    double f_lo = glucose_balance(p, lo, target_g);
    double f_hi = glucose_balance(p, hi, target_g);
    if (f_lo < 0.0) throw ModelError("equilibrium_basal: glucose falls even at zero insulin");
    if (f_hi > 0.0) throw ModelError("equilibrium_basal: no equilibrium below u_max");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double f_mid = glucose_balance(p, mid, target_g);
        if (f_mid > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

State equilibrium_state(const Params& p, double u_ba) {
    // Solve the steady glucose concentration for the given basal rate, then
    // assemble the remaining steady states analytically.
    double lo = 0.1, hi = 40.0;
    double f_lo = glucose_balance(p, u_ba, lo);
    if (f_lo < 0.0) throw ModelError("equilibrium_state: glucose balance negative at 0.1 mmol/L");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (glucose_balance(p, u_ba, mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double g = 0.5 * (lo + hi);

    State x = State::Zero();
    x[idx::S1] = u_ba * p.tau_S;
    x[idx::S2] = u_ba * p.tau_S;
    x[idx::I] = u_ba / (p.V_I * p.k_e);
    x[idx::X1] = p.k_b1 * x[idx::I] / p.k_a1;
    x[idx::X2] = p.k_b2 * x[idx::I] / p.k_a2;
    x[idx::X3] = p.k_b3 * x[idx::I] / p.k_a3;
    x[idx::TE] = p.c_2;
    x[idx::Q1] = g * p.V_G;
    x[idx::Q2] = x[idx::X1] * x[idx::Q1] / (p.k_12 + x[idx::X2]);
    x[idx::GI] = g;
    return x;
}

} // namespace dhap::sim
