#pragma once

#include <Eigen/Dense>

namespace dhap::ctrl {

inline constexpr int kStateDim = 10;
inline constexpr int kNoiseDim = 2;

/// Control-model state. Fixed ordering; the filter covariance indexes into it.
using State = Eigen::Matrix<double, kStateDim, 1>;
using Cov = Eigen::Matrix<double, kStateDim, kStateDim>;
using Diffusion = Eigen::Matrix<double, kStateDim, kNoiseDim>;

namespace idx {
inline constexpr int ISC = 0;     ///< subcutaneous insulin [mU/L]
inline constexpr int IP = 1;      ///< plasma insulin [mU/L]
inline constexpr int IEFF = 2;    ///< insulin effect [1/min]
inline constexpr int G = 3;       ///< blood glucose [mmol/L]
inline constexpr int LOG_SI = 4;  ///< log insulin sensitivity [log((L/mU)/min)]
inline constexpr int D1 = 5;      ///< meal mass, first compartment [mmol]
inline constexpr int D2 = 6;      ///< meal mass, second compartment [mmol]
inline constexpr int Q1G = 7;     ///< glucagon mass, first compartment [ug]
inline constexpr int Q2G = 8;     ///< glucagon mass, second compartment [ug]
inline constexpr int GI = 9;      ///< interstitial glucose [mmol/L]
} // namespace idx

struct Params {
    double k_1;      ///< inverse insulin absorption time constant [1/min]; k_2 and p_2 are tied to it
    double C_I;      ///< insulin clearance rate [L/min]
    double GEZI;     ///< glucose effectiveness at zero insulin [1/min]
    double EGP;      ///< endogenous glucose production [(mmol/L)/min]
    double K_Glu;    ///< glucagon gain [(mmol/L)/(ug min)]
    double k_m;      ///< meal rate-of-appearance constant [1/min]
    double V_G;      ///< glucose distribution volume [L]
    double A_G;      ///< carbohydrate bioavailability [-]
    double tau_D;    ///< meal absorption time constant [min]
    double tau_Glu;  ///< glucagon absorption time constant [min]
    double tau_IG;   ///< interstitial transfer time constant [min]
    double sigma_G;  ///< glucose diffusion coefficient [(mmol/L)/sqrt(min)]
    double sigma_SI; ///< log-sensitivity diffusion coefficient [1/sqrt(min)]
    double R;        ///< CGM measurement-noise variance [(mmol/L)^2]

    double k_2() const { return k_1; }
    double p_2() const { return k_1; }

    bool valid() const;
};

struct Inputs {
    double u_ba = 0.0;  ///< basal insulin [mU/min]
    double u_bo = 0.0;  ///< bolus insulin [mU/min]
    double u_G = 0.0;   ///< glucagon [ug/min]
    double D = 0.0;     ///< meal carbohydrate rate [mmol/min]
};

/// Drift of the stochastic control model. Throws ModelError on non-finite output.
State drift(const State& x, const Inputs& u, const Params& p);

/// Constant 10x2 diffusion matrix: sigma_G drives G, sigma_SI drives log SI.
Diffusion diffusion(const Params& p);

/// Model output: interstitial glucose.
double output(const State& x);

/// Output Jacobian, the unit row selecting GI.
Eigen::Matrix<double, 1, kStateDim> output_jacobian();

/// Fixed nominal parameter set used before identification.
Params nominal_params();

/// Basal rate placing the model equilibrium at glucose g, for sensitivity exp(log_si).
double equilibrium_basal(const Params& p, double g, double log_si);

/// Analytic equilibrium under constant basal u_ba, no meals or glucagon.
State equilibrium_state(const Params& p, double u_ba, double log_si);

/// Copy of `base` with EGP adjusted so the equilibrium under u_ba sits at g.
Params calibrated_for_basal(Params base, double u_ba, double g, double log_si);

} // namespace dhap::ctrl
