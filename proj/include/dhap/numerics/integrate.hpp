#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "dhap/errors.hpp"

namespace dhap {

enum class IntegratorMethod { ExplicitRk4, ExplicitEuler };

/// Fixed-step integrator selection for one control interval.
struct IntegratorSpec {
    IntegratorMethod method = IntegratorMethod::ExplicitRk4;
    double h = 2.5;              ///< step [min]
    int steps_per_interval = 2;  ///< steps x h must tile the interval exactly

    bool consistent_with(double interval_length) const {
        return h > 0.0 && steps_per_interval >= 1 &&
               std::abs(steps_per_interval * h - interval_length) < 1e-9;
    }
};

namespace detail {

template <class Vec>
inline bool all_finite(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

inline bool all_finite(double v) {
    return std::isfinite(v);
}

} // namespace detail

/// One classical explicit 4-stage Runge-Kutta step for dx/dt = f(t, x).
/// Throws IntegrationError naming the stage if a stage value is non-finite.
template <class F, class Vec>
Vec rk4_step(F&& f, double t, const Vec& x, double h) {
    const Vec k1 = f(t, x);
    if (!detail::all_finite(k1)) throw IntegrationError("rk4_step: non-finite stage 1");
    const Vec k2 = f(t + 0.5 * h, Vec(x + (0.5 * h) * k1));
    if (!detail::all_finite(k2)) throw IntegrationError("rk4_step: non-finite stage 2");
    const Vec k3 = f(t + 0.5 * h, Vec(x + (0.5 * h) * k2));
    if (!detail::all_finite(k3)) throw IntegrationError("rk4_step: non-finite stage 3");
    const Vec k4 = f(t + h, Vec(x + h * k3));
    if (!detail::all_finite(k4)) throw IntegrationError("rk4_step: non-finite stage 4");
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// n fixed RK4 steps starting at (t0, x0).
template <class F, class Vec>
Vec rk4_integrate(F&& f, double t0, Vec x, double h, int steps) {
    double t = t0;
    for (int i = 0; i < steps; ++i) {
        x = rk4_step(f, t, x, h);
        t = t0 + (i + 1) * h;
    }
    return x;
}

/// One Euler-Maruyama step x + f(t,x) h + sigma dw.
/// dw must be drawn as N(0, h I) by the caller; the step itself is deterministic.
template <class Drift, class Vec, class Mat, class Dw>
Vec em_step(Drift&& f, const Mat& sigma, double t, const Vec& x, double h, const Dw& dw) {
    return x + h * f(t, x) + sigma * dw;
}

} // namespace dhap
