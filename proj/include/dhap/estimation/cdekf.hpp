#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dhap/errors.hpp"
#include "dhap/model/mvp.hpp"
#include "dhap/numerics/fd_jacobian.hpp"
#include "dhap/numerics/integrate.hpp"

namespace dhap {

struct FilterBelief {
    ctrl::State mean = ctrl::State::Zero();
    ctrl::Cov cov = ctrl::Cov::Zero();
    double t = 0.0;
};

struct InnovationRecord {
    double t = 0.0;
    double e = 0.0;      ///< innovation y - y_hat [mmol/L]
    double Re = 0.0;     ///< innovation variance [(mmol/L)^2]
    double y_hat = 0.0;  ///< one-step prediction [mmol/L]
};

struct FilterOptions {
    double h = 2.5;              ///< RK4 substep for joint mean/covariance propagation [min]
    double cov_trace_cap = 1e7;  ///< divergence guard on trace(P)
    double p0_glucose = 1.0;     ///< prior std dev on G and GI [mmol/L]
    double p0_other = 0.1;       ///< prior std dev on insulin/meal/glucagon states
    double p0_log_si = 0.2;      ///< prior std dev on log SI
};

/// Joint mean/covariance prediction over dt by RK4 on
///   m' = f(t, m),  P' = A P + P A' + sigma sigma',
/// with A the central-difference Jacobian of f along the mean trajectory.
/// Generic over the state dimension so low-dimensional cases validate the
/// same code path used by the control model.
template <int N, int M, class F>
void cd_predict(F&& f, const Eigen::Matrix<double, N, M>& sigma, double t0, double dt,
                double h_max, Eigen::Matrix<double, N, 1>& mean,
                Eigen::Matrix<double, N, N>& cov, double cov_trace_cap = 1e7) {
    using Vec = Eigen::Matrix<double, N, 1>;
    using Mat = Eigen::Matrix<double, N, N>;
    using Joint = Eigen::Matrix<double, N + N * N, 1>;

    const Mat q = sigma * sigma.transpose();
    auto joint_rate = [&](double t, const Joint& z) -> Joint {
        Vec m = z.template head<N>();
        Eigen::Map<const Mat> p(z.data() + N);
        Mat a = fd_jacobian(f, t, m);
        Joint dz;
        dz.template head<N>() = f(t, m);
        Eigen::Map<Mat> dp(dz.data() + N);
        // P stays symmetric along the flow, so P A' = (A P)'.
        const Mat ap = a * p;
        dp = ap + ap.transpose() + q;
        return dz;
    };

    Joint z;
    z.template head<N>() = mean;
    Eigen::Map<Mat>(z.data() + N) = cov;

    const int steps = std::max(1, static_cast<int>(std::ceil(dt / h_max - 1e-12)));
    const double h = dt / steps;
    z = rk4_integrate(joint_rate, t0, z, h, steps);

    mean = z.template head<N>();
    cov = Eigen::Map<Mat>(z.data() + N);
    cov = 0.5 * (cov + cov.transpose()).eval();
    if (!(cov.trace() < cov_trace_cap)) {
        throw FilterError("cd_predict: covariance trace exceeded divergence cap");
    }
}

/// Scalar-measurement EKF update in Joseph form. Returns (innovation, Re).
template <int N>
std::pair<double, double> cd_update(const Eigen::Matrix<double, 1, N>& c, double r, double y,
                                    Eigen::Matrix<double, N, 1>& mean,
                                    Eigen::Matrix<double, N, N>& cov) {
    using Mat = Eigen::Matrix<double, N, N>;
    const double y_hat = (c * mean)(0, 0);
    const double re = (c * cov * c.transpose())(0, 0) + r;
    if (!(re > 0.0) || !std::isfinite(re)) {
        throw FilterError("cd_update: innovation variance not positive");
    }
    const double e = y - y_hat;
    const Eigen::Matrix<double, N, 1> k = cov * c.transpose() / re;
    mean += k * e;
    const Mat ikc = Mat::Identity() - k * c;
    cov = ikc * cov * ikc.transpose() + k * r * k.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {e, re};
}

/// Closed-loop guards applied around the basic filter steps.
struct FilterHooks {
    std::optional<double> sigma_si_override;            ///< replaces params.sigma_SI during predict
    bool zero_log_si_cov = false;                       ///< clears the log SI row/column before predict
    std::optional<std::pair<double, double>> log_si_clip;  ///< clamp band for the log SI mean
};

/// Default diagonal prior covariance around an initial mean.
FilterBelief default_prior(const ctrl::State& x0, double t0 = 0.0, const FilterOptions& opts = {});

/// Propagate the belief over dt under zero-order-hold inputs.
FilterBelief predict(const FilterBelief& belief, const ctrl::Inputs& u, const ctrl::Params& p,
                     double dt, const FilterOptions& opts = {});

/// Measurement update with a CGM sample y.
std::pair<FilterBelief, InnovationRecord> update(const FilterBelief& belief, double y,
                                                 const ctrl::Params& p);

/// Zero the log SI variance and its cross covariances (meal-announcement guard).
void zero_log_si_cov(FilterBelief& belief);

/// Clamp the log SI mean into [lo, hi].
void clip_log_si(FilterBelief& belief, double lo, double hi);

struct FilterPassResult {
    std::vector<InnovationRecord> innovations;
    FilterBelief final_belief;
};

/// Alternating update/predict over an aligned measurement and input record.
/// y has N+1 samples on a fixed grid of spacing dt; u has N per-interval inputs.
/// Optional per-sample hooks apply the closed-loop guards.
FilterPassResult filter_pass(const std::vector<double>& y, const std::vector<ctrl::Inputs>& u,
                             const ctrl::Params& p, const FilterBelief& prior, double dt,
                             const FilterOptions& opts = {},
                             const std::vector<FilterHooks>* hooks = nullptr);

} // namespace dhap
