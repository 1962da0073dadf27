#include <doctest.h>

#include <cmath>
#include <vector>

#include "dhap/estimation/cdekf.hpp"
#include "dhap/numerics/integrate.hpp"
#include "dhap/trial/closed_loop.hpp"

using namespace dhap;
using Vec1 = Eigen::Matrix<double, 1, 1>;
using Mat1 = Eigen::Matrix<double, 1, 1>;

TEST_SUITE_BEGIN("cdekf");

namespace {

// Ljung-Box statistic on standardized innovations with `lags` lags.
double ljung_box(const std::vector<InnovationRecord>& recs, int lags) {
    std::vector<double> e;
    e.reserve(recs.size());
    for (const auto& r : recs) e.push_back(r.e / std::sqrt(r.Re));
    const int n = static_cast<int>(e.size());
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= n;
    double denom = 0.0;
    for (double v : e) denom += (v - mean) * (v - mean);
    double q = 0.0;
    for (int l = 1; l <= lags; ++l) {
        double num = 0.0;
        for (int k = l; k < n; ++k) num += (e[k] - mean) * (e[k - l] - mean);
        const double rho = num / denom;
        q += rho * rho / (n - l);
    }
    return n * (n + 2.0) * q;
}

ctrl::Params whiteness_params() {
    ctrl::Params p = ctrl::nominal_params();
    p.sigma_G = 0.05;
    p.sigma_SI = 0.005;
    p.R = 0.0625;
    return p;
}

std::vector<ctrl::Inputs> constant_inputs(int n, double u_ba) {
    std::vector<ctrl::Inputs> u(n);
    for (auto& uk : u) uk.u_ba = u_ba;
    return u;
}

} // namespace

TEST_CASE("prediction is a no-op under zero drift and zero diffusion") {
    auto f = [](double, const Eigen::Vector2d&) { return Eigen::Vector2d::Zero().eval(); };
    Eigen::Vector2d mean(1.0, -2.0);
    Eigen::Matrix2d cov;
    cov << 2.0, 0.3, 0.3, 1.0;
    Eigen::Matrix2d cov0 = cov;
    Eigen::Matrix<double, 2, 1> sigma = Eigen::Matrix<double, 2, 1>::Zero();
    cd_predict<2, 1>(f, sigma, 0.0, 5.0, 2.5, mean, cov);
    CHECK(mean == Eigen::Vector2d(1.0, -2.0));
    CHECK((cov - cov0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar linear covariance matches the analytic Lyapunov solution") {
    const double a = 0.12, sigma = 0.4, p0 = 0.8, m0 = 1.7, dt = 5.0;
    auto f = [&](double, const Vec1& x) { return Vec1(-a * x[0]); };
    Vec1 mean(m0);
    Mat1 cov(p0);
    Mat1 sig(sigma);
    cd_predict<1, 1>(f, sig, 0.0, dt, 0.1, mean, cov);
    const double mean_exact = m0 * std::exp(-a * dt);
    const double cov_exact =
        std::exp(-2.0 * a * dt) * p0 + sigma * sigma * (1.0 - std::exp(-2.0 * a * dt)) / (2.0 * a);
    CHECK(mean[0] == doctest::Approx(mean_exact).epsilon(1e-6));
    CHECK(cov(0, 0) == doctest::Approx(cov_exact).epsilon(1e-6));
}

TEST_CASE("mean propagation equals plain rk4 of the drift when diffusion is zero") {
    ctrl::Params p = ctrl::nominal_params();
    p.sigma_G = 0.0;
    p.sigma_SI = 0.0;
    ctrl::Inputs u;
    u.u_ba = 10.0;
    u.D = 30.0;
    ctrl::State x0 = ctrl::equilibrium_state(p, 10.0, std::log(1.9e-3));
    FilterBelief belief = default_prior(x0);
    FilterOptions opts;
    FilterBelief out = predict(belief, u, p, 5.0, opts);
    auto f = [&](double, const ctrl::State& s) { return ctrl::drift(s, u, p); };
    ctrl::State direct = rk4_integrate(f, 0.0, x0, opts.h, 2);
    CHECK((out.mean - direct).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("covariance divergence raises a filter error") {
    auto f = [](double, const Vec1& x) { return Vec1(2.0 * x[0]); };  // unstable
    Vec1 mean(1.0);
    Mat1 cov(1.0);
    Mat1 sig(1.0);
    CHECK_THROWS_AS((cd_predict<1, 1>(f, sig, 0.0, 50.0, 0.5, mean, cov, 1e3)), FilterError);
}

TEST_CASE("scalar update matches the hand-computed Kalman step") {
    Eigen::Matrix<double, 1, 1> c(1.0);
    Vec1 mean(0.0);
    Mat1 cov(1.0);
    auto [e, re] = cd_update<1>(c, 1.0, 2.0, mean, cov);
    CHECK(e == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(re == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(mean[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cov(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("an uninformative measurement leaves the mean in place") {
    ctrl::Params p = ctrl::nominal_params();
    p.R = 1e12;
    ctrl::State x0 = ctrl::equilibrium_state(p, 8.0, std::log(1.9e-3));
    FilterBelief belief = default_prior(x0);
    auto [updated, rec] = update(belief, 15.0, p);
    CHECK((updated.mean - belief.mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a perfect prior ignores the measurement") {
    ctrl::Params p = ctrl::nominal_params();
    ctrl::State x0 = ctrl::equilibrium_state(p, 8.0, std::log(1.9e-3));
    FilterBelief belief;
    belief.mean = x0;
    belief.cov.setZero();
    auto [updated, rec] = update(belief, 12.0, p);
    CHECK(updated.mean == x0);
    CHECK(rec.Re == doctest::Approx(p.R).epsilon(1e-15));
}

TEST_CASE("innovations vanish on equilibrium data from an equilibrium prior") {
    ctrl::Params p = whiteness_params();
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(p, 6.0, log_si);
    ctrl::State x0 = ctrl::equilibrium_state(p, u_eq, log_si);
    const int n = 48;
    std::vector<double> y(n + 1, ctrl::output(x0));
    FilterPassResult pass = filter_pass(y, constant_inputs(n, u_eq), p, default_prior(x0), 5.0);
    for (const auto& rec : pass.innovations) CHECK(std::abs(rec.e) < 1e-9);
}

TEST_CASE("innovations on matched-model data are white") {
    ctrl::Params p = whiteness_params();
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(p, 6.0, log_si);
    ctrl::State x0 = ctrl::equilibrium_state(p, u_eq, log_si);
    const int n = 288;
    const int reps = 40;
    const double chi2_99_10 = 23.209251;  // 99% quantile, 10 degrees of freedom
    int passed = 0;
    for (int rep = 0; rep < reps; ++rep) {
        IdDataset data =
            trial::simulate_ctrl_dataset(p, x0, constant_inputs(n, u_eq), 5.0, 1000 + rep);
        FilterPassResult pass = filter_pass(data.y, data.u, p, default_prior(x0), 5.0);
        if (ljung_box(pass.innovations, 10) < chi2_99_10) ++passed;
    }
    CHECK(passed >= static_cast<int>(0.95 * reps));
}

TEST_CASE("a shifted initial glucose produces a positive, lag-damped innovation") {
    ctrl::Params p = whiteness_params();
    p.sigma_G = 0.0;
    p.sigma_SI = 0.0;
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(p, 6.0, log_si);
    ctrl::State x_filter = ctrl::equilibrium_state(p, u_eq, log_si);
    ctrl::State x_truth = x_filter;
    x_truth[ctrl::idx::G] += 1.0;
    const int n = 4;
    IdDataset data = trial::simulate_ctrl_dataset(p, x_truth, constant_inputs(n, u_eq), 5.0, 5,
                                                  0.5, /*measurement_noise=*/false);
    FilterPassResult pass = filter_pass(data.y, data.u, p, default_prior(x_filter), 5.0);
    CHECK(pass.innovations[0].e == doctest::Approx(0.0).epsilon(1e-12));  // GI agrees at t0
    CHECK(pass.innovations[1].e > 0.0);
    CHECK(pass.innovations[1].e < 1.0);
}

TEST_CASE("covariance stays symmetric and positive semidefinite along a pass") {
    ctrl::Params p = whiteness_params();
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(p, 6.0, log_si);
    ctrl::State x0 = ctrl::equilibrium_state(p, u_eq, log_si);
    const int n = 96;
    std::vector<ctrl::Inputs> u = constant_inputs(n, u_eq);
    u[20].D = 40.0;  // meal excitation
    u[20].u_bo = 400.0;
    IdDataset data = trial::simulate_ctrl_dataset(p, x0, u, 5.0, 99);
    FilterBelief belief = default_prior(x0);
    for (int k = 0; k <= n; ++k) {
        auto [updated, rec] = update(belief, data.y[k], p);
        belief = updated;
        CHECK((belief.cov - belief.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<ctrl::Cov> eig(belief.cov);
        CHECK(eig.eigenvalues()(0) >= -1e-8 * belief.cov.trace());
        if (k < n) belief = predict(belief, u[k], p, 5.0);
    }
}

TEST_CASE("filter tracks noise-free matched data to a tight envelope") {
    ctrl::Params p = whiteness_params();
    p.sigma_G = 0.0;
    p.sigma_SI = 0.0;
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(p, 6.0, log_si);
    ctrl::State x_truth = ctrl::equilibrium_state(p, u_eq, log_si);
    const int n = 288;  // 24 h
    std::vector<ctrl::Inputs> u = constant_inputs(n, u_eq);
    u[10].D = 50.0;
    IdDataset data =
        trial::simulate_ctrl_dataset(p, x_truth, u, 5.0, 1, 0.5, /*measurement_noise=*/false);
    ctrl::State x_filter = x_truth;
    x_filter[ctrl::idx::G] += 1.5;  // initial transient
    // Diffusion in the filter model lets the gain stay open.
    ctrl::Params p_filter = p;
    p_filter.sigma_G = 0.05;
    FilterPassResult pass = filter_pass(data.y, data.u, p_filter, default_prior(x_filter), 5.0);
    double tail_max = 0.0;
    for (std::size_t k = pass.innovations.size() - 72; k < pass.innovations.size(); ++k) {
        tail_max = std::max(tail_max, std::abs(pass.innovations[k].e));
    }
    CHECK(tail_max < 0.05);
}

TEST_CASE("filter_pass applies the sensitivity hooks") {
    ctrl::Params p = whiteness_params();
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(p, 6.0, log_si);
    ctrl::State x0 = ctrl::equilibrium_state(p, u_eq, log_si);
    const int n = 12;
    std::vector<double> y(n + 1, ctrl::output(x0) + 0.5);
    std::vector<FilterHooks> hooks(n + 1);
    for (auto& h : hooks) {
        h.log_si_clip = std::make_pair(log_si - 0.001, log_si + 0.001);
        h.zero_log_si_cov = true;
    }
    FilterPassResult pass =
        filter_pass(y, constant_inputs(n, u_eq), p, default_prior(x0), 5.0, {}, &hooks);
    CHECK(std::abs(pass.final_belief.mean[ctrl::idx::LOG_SI] - log_si) <= 0.001 + 1e-12);
    CHECK(pass.final_belief.cov(ctrl::idx::LOG_SI, ctrl::idx::LOG_SI) < 0.01);
}

TEST_SUITE_END();
