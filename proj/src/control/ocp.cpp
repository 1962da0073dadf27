#include "dhap/control/ocp.hpp"

#include <cmath>

#include "dhap/errors.hpp"
#include "dhap/numerics/integrate.hpp"

namespace dhap::mpc {

void OcpSpec::resize_horizon() {
    const int m = input_dim();
    if (u_lb.rows() != m || u_lb.cols() != n_intervals) u_lb = Eigen::MatrixXd::Zero(m, n_intervals);
    if (u_ub.rows() != m || u_ub.cols() != n_intervals) {
        u_ub = Eigen::MatrixXd::Constant(m, n_intervals, 1e6);
    }
    if (u_ba_nominal.size() != n_intervals) u_ba_nominal = Eigen::VectorXd::Zero(n_intervals);
    if (d_forecast.size() != n_intervals) d_forecast = Eigen::VectorXd::Zero(n_intervals);
}

void OcpSpec::set_uniform_bounds(const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) {
    u_lb = lb.replicate(1, n_intervals);
    u_ub = ub.replicate(1, n_intervals);
}

OcpSpec default_spec(Mode mode) {
    OcpSpec spec;
    spec.mode = mode;
    spec.w_max = (mode == Mode::Glucagon) ? 0.0 : 50.0;
    spec.resize_horizon();
    return spec;
}

double penalty_z(double z, const OcpSpec& s) {
    const double dev = z - s.z_set;
    const double below = std::min(0.0, z - s.z_min);
    const double above = std::max(0.0, z - s.z_max);
    return 0.5 * (s.w_set * dev * dev + s.w_min * below * below + s.w_max * above * above);
}

double penalty_z_deriv(double z, const OcpSpec& s) {
    double d = s.w_set * (z - s.z_set);
    if (z < s.z_min) d += s.w_min * (z - s.z_min);
    if (z > s.z_max) d += s.w_max * (z - s.z_max);
    return d;
}

double penalty_z_curvature(double z, const OcpSpec& s) {
    double w = s.w_set;
    if (z < s.z_min) w += s.w_min;
    if (z > s.z_max) w += s.w_max;
    return w;
}

double penalty_u(const Eigen::VectorXd& u_k, int k, const OcpSpec& s) {
    if (s.mode == Mode::Insulin) {
        const double dev = u_k[0] - s.u_ba_nominal[k];
        return dev * dev + std::abs(u_k[1]);
    }
    return u_k[0] * u_k[0];
}

ShootingNlp::ShootingNlp(OcpSpec spec, const ctrl::State& x0, const ctrl::Params& params)
    : spec_(std::move(spec)), x0_(x0), params_(params) {
    spec_.resize_horizon();
}

ctrl::Inputs ShootingNlp::make_inputs(int k, const Eigen::VectorXd& u_k) const {
    ctrl::Inputs u;
    if (spec_.mode == Mode::Insulin) {
        u.u_ba = u_k[0];
        u.u_bo = u_k[1];
    } else {
        u.u_G = u_k[0];
    }
    u.D = spec_.d_forecast[k];
    return u;
}

IntervalResult ShootingNlp::integrate_interval(int k, const ctrl::State& x_k,
                                               const Eigen::VectorXd& u_k) const {
    const int steps = spec_.substeps;
    const double h = spec_.Ts / steps;
    const ctrl::Inputs u = make_inputs(k, u_k);
    auto f = [&](double, const ctrl::State& x) { return ctrl::drift(x, u, params_); };

    IntervalResult r;
    r.z.resize(steps);
    ctrl::State x = x_k;
    double t = k * spec_.Ts;
    for (int j = 0; j < steps; ++j) {
        r.z[j] = ctrl::output(x);
        r.cost_z += h * penalty_z(r.z[j], spec_);
        x = rk4_step(f, t, x, h);
        t += h;
    }
    r.x_end = x;
    return r;
}

ctrl::State ShootingNlp::node(const Eigen::MatrixXd& X, int k) const {
    return k == 0 ? x0_ : ctrl::State(X.col(k - 1));
}

double ShootingNlp::objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const {
    double total = 0.0;
    for (int k = 0; k < n_intervals(); ++k) {
        IntervalResult r = integrate_interval(k, node(X, k), U.col(k));
        total += r.cost_z + penalty_u(U.col(k), k, spec_);
    }
    return total;
}

Eigen::MatrixXd ShootingNlp::defects(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const {
    Eigen::MatrixXd d(ctrl::kStateDim, n_intervals());
    for (int k = 0; k < n_intervals(); ++k) {
        IntervalResult r = integrate_interval(k, node(X, k), U.col(k));
        d.col(k) = r.x_end - node(X, k + 1);
    }
    return d;
}

Eigen::MatrixXd ShootingNlp::eliminate(const Eigen::MatrixXd& U) const {
    Eigen::MatrixXd X(ctrl::kStateDim, n_intervals());
    ctrl::State x = x0_;
    for (int k = 0; k < n_intervals(); ++k) {
        x = integrate_interval(k, x, U.col(k)).x_end;
        X.col(k) = x;
    }
    return X;
}

double ShootingNlp::rollout(const Eigen::MatrixXd& U, Eigen::MatrixXd& X_out) const {
    X_out.resize(ctrl::kStateDim, n_intervals());
    ctrl::State x = x0_;
    double total = 0.0;
    for (int k = 0; k < n_intervals(); ++k) {
        IntervalResult r = integrate_interval(k, x, U.col(k));
        total += r.cost_z + penalty_u(U.col(k), k, spec_);
        x = r.x_end;
        X_out.col(k) = x;
    }
    return total;
}

} // namespace dhap::mpc
