#pragma once

#include <Eigen/Dense>

namespace dhap::sim {

inline constexpr int kStateDim = 16;

/// Plant state vector. The ordering below is fixed; covariance matrices and
/// test vectors index into it directly.
using State = Eigen::Matrix<double, kStateDim, 1>;

namespace idx {
inline constexpr int S1 = 0;    ///< insulin absorption, first compartment [mU]
inline constexpr int S2 = 1;    ///< insulin absorption, second compartment [mU]
inline constexpr int I = 2;     ///< plasma insulin [mU/L]
inline constexpr int X1 = 3;    ///< insulin action on glucose distribution [1/min]
inline constexpr int X2 = 4;    ///< insulin action on glucose disposal [1/min]
inline constexpr int X3 = 5;    ///< insulin action on endogenous production [1/min]
inline constexpr int D1 = 6;    ///< meal absorption, first compartment [mmol]
inline constexpr int D2 = 7;    ///< meal absorption, second compartment [mmol]
inline constexpr int Q1G = 8;   ///< glucagon absorption, first compartment [ug]
inline constexpr int Q2G = 9;   ///< glucagon absorption, second compartment [ug]
inline constexpr int E1 = 10;   ///< short-term exercise effect [BPM]
inline constexpr int TE = 11;   ///< long-term exercise characteristic time [min]
inline constexpr int E2 = 12;   ///< long-term exercise effect [min]
inline constexpr int Q1 = 13;   ///< accessible glucose mass [mmol]
inline constexpr int Q2 = 14;   ///< non-accessible glucose mass [mmol]
inline constexpr int GI = 15;   ///< interstitial glucose [mmol/L]
} // namespace idx

struct Params {
    // insulin subsystem
    double tau_S;   ///< insulin absorption time constant [min]
    double V_I;     ///< insulin distribution volume [L]
    double k_e;     ///< insulin elimination rate [1/min]
    // insulin action subsystem
    double k_b1, k_b2, k_b3;  ///< activation rates [(L/mU)/min^2]
    double k_a1, k_a2, k_a3;  ///< deactivation rates [1/min]
    // meal subsystem
    double A_G;     ///< carbohydrate bioavailability [-]
    double tau_D;   ///< meal absorption time constant [min]
    // glucagon subsystem
    double tau_Glu; ///< glucagon absorption time constant [min]
    double K_Glu;   ///< glucagon gain [(mmol/L)/(ug min)]
    // exercise subsystem
    double HR_0;    ///< resting heart rate [BPM]
    double tau_HR;  ///< heart-rate response time constant [min]
    double c_1, c_2;    ///< long-term characteristic-time span [min]
    double tau_ex;  ///< characteristic-time response constant [min]
    double tau_in;  ///< long-term effect washout constant [min]
    double a;       ///< half-activation point of the intensity response [-]
    double n;       ///< Hill exponent of the intensity response [-]
    double alpha;   ///< exercise-induced insulin action [1/min^2]
    double beta;    ///< exercise-induced insulin-independent uptake [mmol/min]
    // glucose subsystem
    double k_12;    ///< intercompartment transfer rate [1/min]
    double F_01;    ///< nominal non-insulin-dependent flux [mmol/min]
    double V_G;     ///< glucose distribution volume [L]
    double EGP_0;   ///< endogenous glucose production at zero insulin action [mmol/min]
    // CGM subsystem
    double tau_IG;  ///< interstitial transfer time constant [min]

    bool valid() const;
};

struct Inputs {
    double u_I = 0.0;  ///< insulin infusion, basal + bolus [mU/min]
    double u_G = 0.0;  ///< glucagon infusion [ug/min]
    double D = 0.0;    ///< meal carbohydrate rate [mmol/min]
    double HR = 0.0;   ///< heart rate [BPM]; 0 means "at rest" (resolved to HR_0)
};

/// Auxiliary fluxes of the glucose subsystem.
struct Fluxes {
    double EGP;   ///< endogenous production [mmol/min]
    double QG;    ///< glucagon-driven appearance [mmol/min]
    double QE21;  ///< exercise-enhanced distribution flux [mmol/min]
    double QE22;  ///< exercise-enhanced disposal flux [mmol/min]
    double QE1;   ///< exercise insulin-independent uptake [mmol/min]
    double F01c;  ///< corrected non-insulin-dependent flux [mmol/min]
    double FR;    ///< renal clearance [mmol/min]
    double G;     ///< plasma glucose concentration [mmol/L]
};

Fluxes glucose_fluxes(const State& x, const Params& p);

/// Saturating intensity response of the short-term exercise effect, in [0, 1).
double exercise_response(double e1, const Params& p);

/// Full 16-dimensional time derivative.
/// Throws ModelError naming the first non-finite component.
State derivative(const State& x, const Inputs& u, const Params& p, double t);

/// Measured output: interstitial glucose [mmol/L].
double output(const State& x);

/// State component name for diagnostics, by index.
const char* state_name(int i);

/// Literature-based default adult parameter set, scaled by body weight.
Params nominal_params(double body_weight_kg = 70.0);

/// Resting state: all masses zero, TE at its fixed point, plasma and
/// interstitial glucose at g0.
State rest_state(const Params& p, double g0);

/// Basal insulin rate whose zero-meal equilibrium sits at glucose target_g.
/// Throws ModelError if no equilibrium exists in (0, u_max].
double equilibrium_basal(const Params& p, double target_g, double u_max = 100.0);

/// Full steady state under constant basal u_ba and no meals/exercise.
State equilibrium_state(const Params& p, double u_ba);

} // namespace dhap::sim
