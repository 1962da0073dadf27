#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dhap/model/mvp.hpp"

namespace dhap::mpc {

enum class Mode { Insulin, Glucagon };

/// One open-loop problem: 6-h horizon of 5-min intervals, asymmetric output
/// penalty, and per-interval input bounds supplied by the dosing layer.
struct OcpSpec {
    Mode mode = Mode::Insulin;
    int n_intervals = 72;
    double Ts = 5.0;            ///< control interval [min]
    int substeps = 2;           ///< RK4 substeps per interval

    double z_set = 6.0;         ///< glucose setpoint [mmol/L]
    double z_min = 4.5;         ///< hypoglycemia threshold [mmol/L]
    double z_max = 10.0;        ///< hyperglycemia threshold [mmol/L]
    double w_set = 1.0;
    double w_min = 1e6;
    double w_max = 50.0;        ///< 0 in glucagon mode

    Eigen::MatrixXd u_lb;       ///< m x N lower bounds
    Eigen::MatrixXd u_ub;       ///< m x N upper bounds
    Eigen::VectorXd u_ba_nominal;  ///< N nominal basal rates [mU/min] (insulin mode)
    Eigen::VectorXd d_forecast;    ///< N meal-disturbance forecast [mmol/min]

    int input_dim() const { return mode == Mode::Insulin ? 2 : 1; }
    double horizon() const { return n_intervals * Ts; }

    /// Fills bounds/forecast with horizon-constant values.
    void set_uniform_bounds(const Eigen::VectorXd& lb, const Eigen::VectorXd& ub);
    void resize_horizon();
};

/// Spec with the paper's weights for the requested mode.
OcpSpec default_spec(Mode mode);

/// Asymmetric output penalty: setpoint deviation plus one-sided quadratic
/// barriers below z_min and above z_max.
double penalty_z(double z, const OcpSpec& spec);
/// d penalty_z / dz (one-sided derivative from the active piece).
double penalty_z_deriv(double z, const OcpSpec& spec);
/// Curvature of the active quadratic piece; Gauss-Newton weight.
double penalty_z_curvature(double z, const OcpSpec& spec);

/// Per-interval input penalty: basal-deviation quadratic plus bolus 1-norm in
/// insulin mode, squared glucagon in glucagon mode.
double penalty_u(const Eigen::VectorXd& u_k, int k, const OcpSpec& spec);

/// Result of integrating one shooting interval.
struct IntervalResult {
    ctrl::State x_end;
    Eigen::VectorXd z;   ///< output at each RK4 substep start (left rectangle rule)
    double cost_z = 0.0; ///< integral of penalty_z over the interval
};

/// Multiple-shooting transcription of the OCP over the control model with
/// process noise disregarded. Shooting nodes are x_1..x_N (x_0 is the fixed
/// initial state); defects couple consecutive nodes through the RK4 flow map.
class ShootingNlp {
public:
    ShootingNlp(OcpSpec spec, const ctrl::State& x0, const ctrl::Params& params);

    const OcpSpec& spec() const { return spec_; }
    const ctrl::State& x0() const { return x0_; }
    const ctrl::Params& params() const { return params_; }

    int n_intervals() const { return spec_.n_intervals; }
    int input_dim() const { return spec_.input_dim(); }
    int n_vars() const { return n_intervals() * (input_dim() + ctrl::kStateDim); }
    int n_defects() const { return n_intervals() * ctrl::kStateDim; }

    /// Zero-order-hold model inputs over interval k for decision variables u_k.
    ctrl::Inputs make_inputs(int k, const Eigen::VectorXd& u_k) const;

    /// RK4 flow and running cost over interval k from state x_k.
    IntervalResult integrate_interval(int k, const ctrl::State& x_k,
                                      const Eigen::VectorXd& u_k) const;

    /// Shooting node x_k for node index k in 0..N (k = 0 returns x0).
    ctrl::State node(const Eigen::MatrixXd& X, int k) const;

    /// Full objective: integrated output penalty plus per-interval input penalty.
    double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const;

    /// Defect residuals, 10 x N: Phi(x_k, u_k) - x_{k+1}.
    Eigen::MatrixXd defects(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const;

    /// Defect elimination: forward simulation producing nodes x_1..x_N.
    Eigen::MatrixXd eliminate(const Eigen::MatrixXd& U) const;

    /// Forward simulation returning the eliminated nodes and the objective in
    /// one sweep.
    double rollout(const Eigen::MatrixXd& U, Eigen::MatrixXd& X_out) const;

private:
    OcpSpec spec_;
    ctrl::State x0_;
    ctrl::Params params_;
};

} // namespace dhap::mpc
