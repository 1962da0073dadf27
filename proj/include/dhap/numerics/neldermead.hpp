#pragma once

#include <functional>

#include <Eigen/Dense>

namespace dhap {

struct NelderMeadOptions {
    int max_iter = 2000;        // function evaluations, not counting the initial simplex
    double f_tol = 1e-8;        // absolute spread of simplex values
    double x_tol = 1e-8;        // simplex diameter relative to max(1, |x|)
    double init_step = 0.1;     // relative edge length of the initial simplex
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Downhill simplex minimizer with the adaptive coefficients of Gao & Han.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opts = {});

} // namespace dhap
