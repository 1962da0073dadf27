#include "dhap/model/mvp.hpp"

#include <cmath>
#include <string>

#include "dhap/errors.hpp"

namespace dhap::ctrl {

namespace {

const char* kStateNames[kStateDim] = {
    "ISC", "IP", "IEFF", "G", "logSI", "D1", "D2", "Q1G", "Q2G", "GI",
};

} // namespace

bool Params::valid() const {
    if (!(k_1 > 0.0 && C_I > 0.0 && V_G > 0.0)) return false;
    if (!(tau_D > 0.0 && tau_Glu > 0.0 && tau_IG > 0.0)) return false;
    if (!(A_G > 0.0 && A_G <= 1.0)) return false;
    if (!(sigma_G >= 0.0 && sigma_SI >= 0.0)) return false;
    if (!(R > 0.0)) return false;
    return true;
}

State drift(const State& x, const Inputs& u, const Params& p) {
    const double s_i = std::exp(x[idx::LOG_SI]);
    const double ra = p.k_m * x[idx::D2] / p.V_G;

    State dx;
    dx[idx::ISC] = p.k_1 * ((u.u_ba + u.u_bo) / p.C_I - x[idx::ISC]);
    dx[idx::IP] = p.k_2() * (x[idx::ISC] - x[idx::IP]);
    dx[idx::IEFF] = p.p_2() * (s_i * x[idx::IP] - x[idx::IEFF]);
    dx[idx::G] = -(p.GEZI + x[idx::IEFF]) * x[idx::G] + p.EGP + ra + p.K_Glu * x[idx::Q2G];
    dx[idx::LOG_SI] = 0.0;
    dx[idx::D1] = p.A_G * u.D - x[idx::D1] / p.tau_D;
    dx[idx::D2] = (x[idx::D1] - x[idx::D2]) / p.tau_D;
    dx[idx::Q1G] = u.u_G - x[idx::Q1G] / p.tau_Glu;
    dx[idx::Q2G] = (x[idx::Q1G] - x[idx::Q2G]) / p.tau_Glu;
    dx[idx::GI] = (x[idx::G] - x[idx::GI]) / p.tau_IG;

    for (int i = 0; i < kStateDim; ++i) {
        if (!std::isfinite(dx[i])) {
            throw ModelError(std::string("ctrl drift non-finite at ") + kStateNames[i]);
        }
    }
    return dx;
}

Diffusion diffusion(const Params& p) {
    Diffusion sigma = Diffusion::Zero();
    sigma(idx::G, 0) = p.sigma_G;
    sigma(idx::LOG_SI, 1) = p.sigma_SI;
    return sigma;
}

double output(const State& x) {
    return x[idx::GI];
}

Eigen::Matrix<double, 1, kStateDim> output_jacobian() {
    Eigen::Matrix<double, 1, kStateDim> c = Eigen::Matrix<double, 1, kStateDim>::Zero();
    c(0, idx::GI) = 1.0;
    return c;
}

Params nominal_params() {
    Params p{};
    p.k_1 = 0.015;
    p.C_I = 1.2;
    p.GEZI = 0.0022;
    p.EGP = 0.08;
    p.K_Glu = 0.0025;
    p.k_m = 0.025;
    p.V_G = 11.2;
    p.A_G = 0.8;
    p.tau_D = 40.0;
    p.tau_Glu = 12.0;
    p.tau_IG = 10.0;
    p.sigma_G = 0.05;
    p.sigma_SI = 0.003;
    p.R = 0.0625;
    return p;
}

double equilibrium_basal(const Params& p, double g, double log_si) {
    // 0 = -(GEZI + SI * u/C_I) g + EGP  =>  u = C_I (EGP/g - GEZI) / SI
    const double s_i = std::exp(log_si);
    const double i_eff = p.EGP / g - p.GEZI;
    if (i_eff < 0.0) throw ModelError("equilibrium_basal: target above the zero-insulin equilibrium");
    return p.C_I * i_eff / s_i;
}

State equilibrium_state(const Params& p, double u_ba, double log_si) {
    State x = State::Zero();
    const double ip = u_ba / p.C_I;
    const double s_i = std::exp(log_si);
    x[idx::ISC] = ip;
    x[idx::IP] = ip;
    x[idx::IEFF] = s_i * ip;
    const double denom = p.GEZI + x[idx::IEFF];
    x[idx::G] = denom > 0.0 ? p.EGP / denom : 0.0;
    x[idx::LOG_SI] = log_si;
    x[idx::GI] = x[idx::G];
    return x;
}

Params calibrated_for_basal(Params base, double u_ba, double g, double log_si) {
    const double i_eff = std::exp(log_si) * u_ba / base.C_I;
    base.EGP = (base.GEZI + i_eff) * g;
    return base;
}

} // namespace dhap::ctrl
