#include "dhap/control/sqp.hpp"

#include <cmath>
#include <ostream>
#include <vector>

#include "dhap/control/qp.hpp"
#include "dhap/errors.hpp"

namespace dhap::mpc {

namespace {

constexpr int kNx = ctrl::kStateDim;

} // namespace

IntervalLin linearize_interval(const ShootingNlp& nlp, int k, const ctrl::State& x_k,
                               const Eigen::VectorXd& u_k, double fd_scale) {
    const int m = nlp.input_dim();
    const int s = nlp.spec().substeps;
    IntervalLin lin;
    lin.B.resize(kNx, m);
    lin.Sz_x.resize(s, kNx);
    lin.Sz_u.resize(s, m);

    const IntervalResult nominal = nlp.integrate_interval(k, x_k, u_k);
    lin.z = nominal.z;
    lin.x_end = nominal.x_end;
    lin.cost_z = nominal.cost_z;

    ctrl::State xp = x_k;
    for (int i = 0; i < kNx; ++i) {
        const double h = fd_scale * std::max(1.0, std::abs(x_k[i]));
        xp[i] = x_k[i] + h;
        const IntervalResult rp = nlp.integrate_interval(k, xp, u_k);
        xp[i] = x_k[i] - h;
        const IntervalResult rm = nlp.integrate_interval(k, xp, u_k);
        xp[i] = x_k[i];
        lin.A.col(i) = (rp.x_end - rm.x_end) / (2.0 * h);
        lin.Sz_x.col(i) = (rp.z - rm.z) / (2.0 * h);
    }
    Eigen::VectorXd up = u_k;
    for (int i = 0; i < m; ++i) {
        const double h = fd_scale * std::max(1.0, std::abs(u_k[i]));
        up[i] = u_k[i] + h;
        const IntervalResult rp = nlp.integrate_interval(k, x_k, up);
        up[i] = u_k[i] - h;
        const IntervalResult rm = nlp.integrate_interval(k, x_k, up);
        up[i] = u_k[i];
        lin.B.col(i) = (rp.x_end - rm.x_end) / (2.0 * h);
        lin.Sz_u.col(i) = (rp.z - rm.z) / (2.0 * h);
    }
    return lin;
}

Eigen::MatrixXd shift_warm_start(const Eigen::MatrixXd& u_prev) {
    Eigen::MatrixXd u = u_prev;
    const int n = static_cast<int>(u.cols());
    if (n > 1) {
        u.leftCols(n - 1) = u_prev.rightCols(n - 1);
        u.col(n - 1) = u_prev.col(n - 1);
    }
    return u;
}

Eigen::MatrixXd cold_start(const OcpSpec& spec) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(spec.input_dim(), spec.n_intervals);
    if (spec.mode == Mode::Insulin) u.row(0) = spec.u_ba_nominal.transpose();
    return u;
}

// Condensed SQP on feasible iterates: the shooting nodes are re-eliminated
// after every accepted step, so defects stay zero and the line search acts on
// the true reduced objective. The QP sees the Gauss-Newton model of the
// piecewise-quadratic output penalty inside an adaptive trust box.
OcpSolution sqp_solve(const ShootingNlp& nlp, const Eigen::MatrixXd& warm_start_u,
                      const SqpOptions& opts) {
    const int n_int = nlp.n_intervals();
    const int m = nlp.input_dim();
    const int nu = n_int * m;
    const int sub = nlp.spec().substeps;
    const double h_sub = nlp.spec().Ts / sub;
    const OcpSpec& spec = nlp.spec();

    // Stack bounds interval-major, matching the column-major layout of U.
    Eigen::VectorXd lb(nu), ub(nu);
    for (int k = 0; k < n_int; ++k) {
        lb.segment(k * m, m) = spec.u_lb.col(k);
        ub.segment(k * m, m) = spec.u_ub.col(k);
    }

    Eigen::MatrixXd U = warm_start_u;
    if (U.rows() != m || U.cols() != n_int) U = cold_start(spec);
    for (int k = 0; k < n_int; ++k) {
        U.col(k) = U.col(k).cwiseMax(spec.u_lb.col(k)).cwiseMin(spec.u_ub.col(k));
    }
    Eigen::MatrixXd X;
    double objective = nlp.rollout(U, X);
    if (!std::isfinite(objective)) throw SolverError("sqp_solve: non-finite objective");

    OcpSolution sol;
    sol.status = SolveStatus::MaxIterations;
    sol.max_defect = 0.0;

    std::vector<IntervalLin> lin(n_int);
    double trust = 1.0;
    const Eigen::VectorXd box_span = (ub - lb).cwiseMax(1.0);

    for (int it = 1; it <= opts.max_iter; ++it) {
        sol.iterations = it;

        // --- Linearize every interval along the feasible trajectory.
        for (int k = 0; k < n_int; ++k) {
            lin[k] = linearize_interval(nlp, k, nlp.node(X, k), U.col(k), opts.fd_scale);
        }

        // --- Condense: Gauss-Newton QP in the stacked input increment.
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nu, nu);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(nu);
        Eigen::MatrixXd Sx = Eigen::MatrixXd::Zero(kNx, nu);  // d x_k / d U

        for (int k = 0; k < n_int; ++k) {
            const int active = (k + 1) * m;
            for (int j = 0; j < sub; ++j) {
                const double z = lin[k].z[j];
                const double l1 = h_sub * penalty_z_deriv(z, spec);
                const double w = h_sub * penalty_z_curvature(z, spec);
                Eigen::RowVectorXd row = lin[k].Sz_x.row(j) * Sx.leftCols(active);
                row.segment(k * m, m) += lin[k].Sz_u.row(j);
                g.head(active) += l1 * row.transpose();
                H.topLeftCorner(active, active)
                    .selfadjointView<Eigen::Lower>()
                    .rankUpdate(row.transpose(), w);
            }
            if (spec.mode == Mode::Insulin) {
                g[k * m] += 2.0 * (U(0, k) - spec.u_ba_nominal[k]);
                H(k * m, k * m) += 2.0;
                g[k * m + 1] += 1.0;  // 1-norm of the nonnegative bolus
            } else {
                g[k * m] += 2.0 * U(0, k);
                H(k * m, k * m) += 2.0;
            }
            if (k + 1 < n_int) {
                Sx.leftCols(active) = lin[k].A * Sx.leftCols(active);
                Sx.block(0, k * m, kNx, m) += lin[k].B;
            }
        }
        {
            const Eigen::MatrixXd h_full = H.selfadjointView<Eigen::Lower>();
            H = h_full;
        }

        // --- Stationarity on the true bounds.
        Eigen::Map<const Eigen::VectorXd> u_vec(U.data(), nu);
        const Eigen::VectorXd projected = (u_vec - g).cwiseMax(lb).cwiseMin(ub);
        const double kkt = (u_vec - projected).cwiseAbs().maxCoeff();
        sol.kkt_residual = kkt;
        if (kkt < opts.kkt_tol) {
            sol.status = SolveStatus::Converged;
            break;
        }
        if (it == opts.max_iter) break;

        // --- Box QP for the input increment, inside the trust box.
        const double diag_scale = H.diagonal().cwiseAbs().maxCoeff();
        H.diagonal().array() += opts.reg * (1.0 + diag_scale);
        const Eigen::VectorXd step_lo = (lb - u_vec).cwiseMax(-trust * box_span);
        const Eigen::VectorXd step_hi = (ub - u_vec).cwiseMin(trust * box_span);
        QpResult qp = solve_box_qp(H, g, step_lo, step_hi, Eigen::VectorXd::Zero(nu));
        if (!qp.converged || !qp.x.allFinite()) {
            throw SolverError("sqp_solve: QP subproblem failed");
        }
        const Eigen::MatrixXd dU = Eigen::Map<Eigen::MatrixXd>(qp.x.data(), m, n_int);
        const double descent = g.dot(qp.x);

        // --- Backtracking on the reduced objective.
        double alpha = 1.0;
        bool accepted = false;
        Eigen::MatrixXd x_trial;
        for (int ls = 0; ls < 30; ++ls) {
            const Eigen::MatrixXd u_trial = U + alpha * dU;
            double f_trial;
            try {
                f_trial = nlp.rollout(u_trial, x_trial);
            } catch (const Error&) {
                alpha *= 0.5;
                continue;
            }
            if (std::isfinite(f_trial) && f_trial <= objective + 1e-4 * alpha * descent) {
                U = u_trial;
                X = x_trial;
                objective = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (opts.trace) {
            *opts.trace << it << ',' << kkt << ',' << objective << ',' << alpha << ','
                        << qp.x.cwiseAbs().maxCoeff() << ',' << qp.iterations << ',' << trust
                        << '\n';
        }
        if (!accepted) {
            // No direction of numerically certain decrease: the iterate is at
            // the resolution limit of the linearization. It is feasible and
            // within bounds, so it is returned as the solution.
            sol.status = SolveStatus::LineSearchStalled;
            break;
        }
        if (alpha >= 1.0) {
            trust = std::min(1.0, trust * 2.0);
        } else {
            trust = std::max(1e-5, trust * std::max(alpha, 0.25));
        }
    }

    sol.U = U;
    sol.X = X;
    sol.objective = objective;
    if (!std::isfinite(sol.objective)) throw SolverError("sqp_solve: non-finite objective");
    return sol;
}

} // namespace dhap::mpc
