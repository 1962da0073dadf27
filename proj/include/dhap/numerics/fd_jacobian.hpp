#pragma once

#include <cmath>
#include <type_traits>

#include <Eigen/Dense>

namespace dhap {

inline constexpr double kFdScaleDefault = 1e-6;

/// Central-difference Jacobian of f(t, x) with per-coordinate step
/// scale * max(1, |x_i|).
template <class F, class Vec>
auto fd_jacobian(F&& f, double t, const Vec& x, double scale = kFdScaleDefault) {
    using Out = std::decay_t<decltype(f(t, x))>;
    constexpr int kRows = Out::RowsAtCompileTime;
    constexpr int kCols = Vec::RowsAtCompileTime;
    using Jac = Eigen::Matrix<double, kRows, kCols>;

    const Out f0 = f(t, x);
    Jac jac(f0.rows(), x.rows());
    Vec xp = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double h = scale * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        const Out fp = f(t, xp);
        xp[i] = x[i] - h;
        const Out fm = f(t, xp);
        xp[i] = x[i];
        jac.col(i) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

} // namespace dhap
