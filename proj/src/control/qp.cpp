#include "dhap/control/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "dhap/errors.hpp"

namespace dhap {

namespace {

enum BoundState : int { kFree = 0, kAtLower = -1, kAtUpper = 1 };

} // namespace

QpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                      const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                      const Eigen::VectorXd& x0, int max_iter, double tol) {
    const int n = static_cast<int>(g.size());
    if (max_iter <= 0) max_iter = 5 * n + 20;

    QpResult res;
    res.x = x0.cwiseMax(lb).cwiseMin(ub);
    std::vector<int> state(n, kFree);
    for (int i = 0; i < n; ++i) {
        if (res.x[i] <= lb[i]) state[i] = kAtLower;
        if (res.x[i] >= ub[i]) state[i] = kAtUpper;
        if (lb[i] >= ub[i] - 1e-15) state[i] = kAtLower;  // pinned variable
    }

    Eigen::VectorXd grad = H * res.x + g;
    const double scale = 1.0 + g.cwiseAbs().maxCoeff();

    for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
        // Equality-constrained step on the free set.
        std::vector<int> free_idx;
        free_idx.reserve(n);
        for (int i = 0; i < n; ++i) {
            if (state[i] == kFree) free_idx.push_back(i);
        }

        Eigen::VectorXd dx = Eigen::VectorXd::Zero(n);
        if (!free_idx.empty()) {
            const int nf = static_cast<int>(free_idx.size());
            Eigen::MatrixXd hff(nf, nf);
            Eigen::VectorXd gf(nf);
            for (int a = 0; a < nf; ++a) {
                gf[a] = grad[free_idx[a]];
                for (int b = 0; b < nf; ++b) hff(a, b) = H(free_idx[a], free_idx[b]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt(hff);
            if (llt.info() != Eigen::Success) {
                throw SolverError("solve_box_qp: Hessian block not positive definite");
            }
            Eigen::VectorXd df = llt.solve(-gf);
            for (int a = 0; a < nf; ++a) dx[free_idx[a]] = df[a];
        }

        if (dx.cwiseAbs().maxCoeff() > tol * scale) {
            // Ratio test against the bounds of the free variables.
            double alpha = 1.0;
            int blocking = -1;
            int blocking_side = 0;
            for (int i : free_idx) {
                if (dx[i] > 0.0) {
                    double room = (ub[i] - res.x[i]) / dx[i];
                    if (room < alpha) { alpha = room; blocking = i; blocking_side = kAtUpper; }
                } else if (dx[i] < 0.0) {
                    double room = (lb[i] - res.x[i]) / dx[i];
                    if (room < alpha) { alpha = room; blocking = i; blocking_side = kAtLower; }
                }
            }
            res.x += alpha * dx;
            grad = H * res.x + g;
            if (blocking >= 0) {
                state[blocking] = blocking_side;
                res.x[blocking] = (blocking_side == kAtUpper) ? ub[blocking] : lb[blocking];
                continue;
            }
            // Full step taken; fall through to the multiplier check.
        }

        // At the working-set minimizer: check multiplier signs.
        int release = -1;
        double worst = -tol * scale;
        for (int i = 0; i < n; ++i) {
            if (state[i] == kAtLower && lb[i] < ub[i] - 1e-15) {
                // mu = grad must be >= 0 at an active lower bound
                if (grad[i] < worst) { worst = grad[i]; release = i; }
            } else if (state[i] == kAtUpper) {
                if (-grad[i] < worst) { worst = -grad[i]; release = i; }
            }
        }
        if (release < 0) {
            res.converged = true;
            break;
        }
        state[release] = kFree;
    }

    res.multipliers = grad;
    return res;
}

} // namespace dhap
