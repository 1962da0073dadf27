#include "dhap/numerics/neldermead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace dhap {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opts) {
    const int n = static_cast<int>(x0.size());

    // Adaptive coefficients (Gao & Han 2012); reduce expansion pressure in
    // higher dimensions.
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / n;
    const double gamma = 0.75 - 0.5 / n;
    const double delta = 1.0 - 1.0 / n;

    std::vector<Eigen::VectorXd> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (int i = 0; i < n; ++i) {
        double step = opts.init_step * std::max(1.0, std::abs(x0[i]));
        xs[i + 1][i] += step;
    }
    int evals = 0;
    for (int i = 0; i <= n; ++i) {
        fs[i] = f(xs[i]);
        ++evals;
    }

    std::vector<int> order(n + 1);
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    };

    NelderMeadResult result;
    while (evals < opts.max_iter) {
        sort_simplex();
        const int best = order[0];
        const int worst = order[n];
        const int second_worst = order[n - 1];

        // Convergence: value spread and simplex diameter.
        double fspread = fs[worst] - fs[best];
        double diam = 0.0;
        for (int i = 1; i <= n; ++i) {
            diam = std::max(diam, (xs[order[i]] - xs[best]).cwiseAbs().maxCoeff());
        }
        double xscale = std::max(1.0, xs[best].cwiseAbs().maxCoeff());
        if (fspread < opts.f_tol && diam < opts.x_tol * xscale) {
            result.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= n; ++i) {
            if (i != worst) centroid += xs[i];
        }
        centroid /= n;

        Eigen::VectorXd xr = centroid + alpha * (centroid - xs[worst]);
        double fr = f(xr);
        ++evals;

        if (fr < fs[best]) {
            Eigen::VectorXd xe = centroid + beta * (xr - centroid);
            double fe = f(xe);
            ++evals;
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[second_worst]) {
            xs[worst] = xr;
            fs[worst] = fr;
        } else {
            bool outside = fr < fs[worst];
            Eigen::VectorXd xc =
                centroid + (outside ? gamma : -gamma) * (xr - centroid);
            double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, fs[worst])) {
                xs[worst] = xc;
                fs[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    xs[i] = xs[best] + delta * (xs[i] - xs[best]);
                    fs[i] = f(xs[i]);
                    ++evals;
                }
            }
        }
    }

    sort_simplex();
    result.x = xs[order[0]];
    result.f = fs[order[0]];
    result.evaluations = evals;
    return result;
}

} // namespace dhap
