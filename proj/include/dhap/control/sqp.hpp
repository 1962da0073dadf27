#pragma once

#include <iosfwd>

#include <Eigen/Dense>

#include "dhap/control/ocp.hpp"

namespace dhap::mpc {

/// LineSearchStalled means no step of certain decrease existed at the
/// linearization's numerical resolution; the returned iterate is still
/// feasible and bound-respecting.
enum class SolveStatus { Converged, MaxIterations, LineSearchStalled };

struct OcpSolution {
    Eigen::MatrixXd U;      ///< m x N input trajectory
    Eigen::MatrixXd X;      ///< 10 x N shooting nodes x_1..x_N
    double objective = 0.0;
    double kkt_residual = 0.0;
    double max_defect = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::MaxIterations;
};

struct SqpOptions {
    int max_iter = 50;
    double kkt_tol = 1e-6;     ///< projected-gradient stationarity tolerance
    double defect_tol = 1e-8;  ///< shooting defect tolerance
    double fd_scale = 1e-5;    ///< relative step for interval-map derivatives
    double reg = 1e-8;         ///< Levenberg regularization of the condensed Hessian
    std::ostream* trace = nullptr;  ///< per-iteration CSV trace (iter,kkt,defect,objective,alpha)
};

/// Central-difference linearization of one shooting interval: flow-map
/// Jacobians plus substep-output sensitivities.
struct IntervalLin {
    Eigen::Matrix<double, ctrl::kStateDim, ctrl::kStateDim> A;
    Eigen::MatrixXd B;     ///< kStateDim x m
    Eigen::MatrixXd Sz_x;  ///< substeps x kStateDim, d z_j / d x_k
    Eigen::MatrixXd Sz_u;  ///< substeps x m
    Eigen::VectorXd z;     ///< substep outputs
    ctrl::State x_end;
    double cost_z = 0.0;
};

IntervalLin linearize_interval(const ShootingNlp& nlp, int k, const ctrl::State& x_k,
                               const Eigen::VectorXd& u_k, double fd_scale = 1e-5);

/// SQP on the multiple-shooting NLP. Each iteration linearizes the interval
/// flow maps, condenses the state increments out of the Gauss-Newton QP, and
/// solves the remaining box-constrained QP with a primal active-set method.
/// Iterates stay defect-feasible (nodes are re-eliminated every step).
/// Throws SolverError on QP failure or a non-finite objective.
OcpSolution sqp_solve(const ShootingNlp& nlp, const Eigen::MatrixXd& warm_start_u,
                      const SqpOptions& opts = {});

/// Receding-horizon warm start: drop the first interval, duplicate the last.
Eigen::MatrixXd shift_warm_start(const Eigen::MatrixXd& u_prev);

/// Cold start: nominal basal (insulin mode) or zero (glucagon mode).
Eigen::MatrixXd cold_start(const OcpSpec& spec);

} // namespace dhap::mpc
