#pragma once

#include <Eigen/Dense>

namespace dhap {

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd multipliers;  ///< bound multipliers, sign convention: g + H x = mu
    int iterations = 0;
    bool converged = false;
};

/// Primal active-set solver for  min 1/2 x'Hx + g'x  s.t.  lb <= x <= ub,
/// with H symmetric positive definite. x0 is clamped into the box.
QpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                      const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                      const Eigen::VectorXd& x0, int max_iter = 0, double tol = 1e-11);

} // namespace dhap
