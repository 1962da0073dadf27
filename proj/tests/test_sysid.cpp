#include <doctest.h>

#include <cmath>

#include "dhap/estimation/mle.hpp"
#include "dhap/numerics/integrate.hpp"
#include "dhap/trial/closed_loop.hpp"

using namespace dhap;

TEST_SUITE_BEGIN("sysid");

namespace {

constexpr double kHalfLog2Pi = 0.5 * 1.8378770664093453;

// Toy setup with an exactly representable equilibrium: GEZI = 0.5, EGP = 3
// puts the glucose drift at exactly zero for G = 6. With a zero prior
// covariance and zero diffusion the innovation variance is exactly R.
struct ToyCase {
    ctrl::Params fixed;
    IdentifiedSubset theta;
    FilterOptions opts;

    ToyCase() {
        fixed = ctrl::nominal_params();
        fixed.GEZI = 0.5;
        fixed.R = 1.0;
        theta.k_m = 0.025;
        theta.tau_D = 40.0;
        theta.V_G = 11.2;
        theta.EGP = 3.0;
        theta.sigma_G = 1e-30;
        theta.sigma_SI = 1e-30;
        theta.G0 = 6.0;
        theta.GI0 = 6.0;
        theta.log_SI0 = -6.0;
        opts.p0_glucose = 0.0;
        opts.p0_other = 0.0;
        opts.p0_log_si = 0.0;
    }

    IdDataset dataset(std::vector<double> y) const {
        IdDataset d;
        for (std::size_t k = 0; k < y.size(); ++k) d.t.push_back(5.0 * k);
        d.y = std::move(y);
        d.u.resize(d.y.size() - 1);
        return d;
    }
};

IdDataset synthetic_24h(const ctrl::Params& truth, const ctrl::State& x0, double u_eq,
                        std::uint64_t seed) {
    const int n = 288;
    std::vector<ctrl::Inputs> u(n);
    for (auto& uk : u) uk.u_ba = u_eq;
    // Three announced meals with boluses provide the excitation.
    const struct { int k; double grams; } meals[] = {{24, 60.0}, {96, 40.0}, {156, 70.0}};
    for (auto m : meals) {
        u[m.k].D = m.grams * (1000.0 / 180.0) / 5.0;
        u[m.k].u_bo = m.grams / 20.0 / 5.0 * 1000.0;  // 20 g/U
    }
    return trial::simulate_ctrl_dataset(truth, x0, u, 5.0, seed);
}

} // namespace

TEST_CASE("nll of a single perfect sample is half log two pi") {
    ToyCase toy;
    IdDataset d = toy.dataset({6.0});
    const double v = nll(toy.theta, d, toy.fixed, toy.opts);
    CHECK(v == doctest::Approx(kHalfLog2Pi).epsilon(1e-12));
}

TEST_CASE("nll of two samples at equilibrium adds the residual quadratic") {
    ToyCase toy;
    const double delta = 0.5;
    IdDataset d = toy.dataset({6.0, 6.0 + delta});
    const double v = nll(toy.theta, d, toy.fixed, toy.opts);
    CHECK(v == doctest::Approx(2.0 * kHalfLog2Pi + 0.5 * delta * delta).epsilon(1e-12));
}

TEST_CASE("doubling the innovation variance adds half log 2 per sample") {
    ToyCase toy;
    IdDataset d = toy.dataset({6.0, 6.0});
    const double v1 = nll(toy.theta, d, toy.fixed, toy.opts);
    ctrl::Params doubled = toy.fixed;
    doubled.R = 2.0;
    const double v2 = nll(toy.theta, d, doubled, toy.opts);
    CHECK(v2 - v1 == doctest::Approx(2.0 * 0.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("nll is deterministic and ignores dataset metadata") {
    ToyCase toy;
    IdDataset d = toy.dataset({6.0, 6.4, 5.9});
    d.patient_id = "alpha";
    const double v1 = nll(toy.theta, d, toy.fixed, toy.opts);
    d.patient_id = "beta";
    const double v2 = nll(toy.theta, d, toy.fixed, toy.opts);
    CHECK(v1 == v2);
}

TEST_CASE("nll returns the retreat sentinel when the filter diverges") {
    ToyCase toy;
    IdDataset d = toy.dataset({6.0, 6.0});
    IdentifiedSubset bad = toy.theta;
    bad.EGP = 1e9;  // wildly wrong production rate blows up the trajectory
    bad.sigma_G = 1e9;
    FilterOptions opts = toy.opts;
    opts.cov_trace_cap = 1e3;
    const double v = nll(bad, d, toy.fixed, opts);
    CHECK(v == kNllDivergedSentinel);
}

TEST_CASE("a stationary start terminates at the generating parameters") {
    ctrl::Params truth = ctrl::nominal_params();
    truth.sigma_G = 1e-4;
    truth.sigma_SI = 1e-4;
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(truth, 6.0, log_si);
    ctrl::State x0 = ctrl::equilibrium_state(truth, u_eq, log_si);
    const int n = 144;
    std::vector<ctrl::Inputs> u(n);
    for (auto& uk : u) uk.u_ba = u_eq;
    u[20].D = 50.0 * (1000.0 / 180.0) / 5.0;
    IdDataset data = trial::simulate_ctrl_dataset(truth, x0, u, 5.0, 42, 0.5,
                                                  /*measurement_noise=*/false);

    IdentifiedSubset theta_star;
    theta_star.k_m = truth.k_m;
    theta_star.tau_D = truth.tau_D;
    theta_star.V_G = truth.V_G;
    theta_star.EGP = truth.EGP;
    theta_star.sigma_G = truth.sigma_G;
    theta_star.sigma_SI = truth.sigma_SI;
    theta_star.G0 = x0[ctrl::idx::G];
    theta_star.GI0 = x0[ctrl::idx::GI];
    theta_star.log_SI0 = log_si;

    ctrl::Params fixed = ctrl::nominal_params();
    const double v_star = nll(theta_star, data, fixed);
    EstimateOptions opts;
    opts.restarts = 0;
    opts.max_iter_start = 6000;
    EstimationResult result = estimate(data, fixed, theta_star, opts);
    CHECK(result.nll <= v_star + 1e-6);
    CHECK(result.converged);
}

TEST_CASE("estimates recover the generating kinetics on synthetic data") {
    ctrl::Params truth = ctrl::nominal_params();
    truth.sigma_G = 0.02;
    truth.sigma_SI = 1e-3;
    const double log_si = std::log(1.9e-3);
    const double u_eq = ctrl::equilibrium_basal(truth, 6.0, log_si);
    ctrl::State x0 = ctrl::equilibrium_state(truth, u_eq, log_si);
    ctrl::Params fixed = ctrl::nominal_params();

    int ok = 0;
    EstimationResult last;
    for (std::uint64_t rep = 0; rep < 2; ++rep) {
        IdDataset data = synthetic_24h(truth, x0, u_eq, 300 + rep);
        EstimateOptions opts;
        opts.restarts = 1;
        opts.seed = rep;
        EstimationResult r = estimate(data, fixed, default_init(data, fixed), opts);
        last = r;
        const bool good = std::abs(r.theta.k_m / truth.k_m - 1.0) < 0.2 &&
                          std::abs(r.theta.tau_D / truth.tau_D - 1.0) < 0.2 &&
                          std::abs(r.theta.V_G / truth.V_G - 1.0) < 0.2 &&
                          std::abs(r.theta.EGP / truth.EGP - 1.0) < 0.2;
        if (good) ++ok;
        CHECK(r.theta.k_m > 0.0);
        CHECK(r.theta.tau_D > 0.0);
        CHECK(r.theta.V_G > 0.0);
        CHECK(r.theta.EGP > 0.0);
        CHECK(r.theta.sigma_G > 0.0);
        CHECK(r.theta.sigma_SI > 0.0);
    }
    CHECK(ok == 2);

    // Deterministic replay of the estimated model stays near the record.
    IdDataset held_out = synthetic_24h(truth, x0, u_eq, 300);
    ctrl::Params sim_params = last.params;
    ctrl::State x = last.x0;
    double sse = 0.0;
    for (std::size_t k = 0; k < held_out.u.size(); ++k) {
        const double e = held_out.y[k] - ctrl::output(x);
        sse += e * e;
        auto f = [&](double, const ctrl::State& s) {
            return ctrl::drift(s, held_out.u[k], sim_params);
        };
        x = rk4_integrate(f, held_out.t[k], x, 2.5, 2);
    }
    CHECK(std::sqrt(sse / held_out.u.size()) < 1.5);
}

TEST_CASE("dataset validation rejects gaps and short records") {
    IdDataset d;
    for (int k = 0; k < 200; ++k) {
        d.t.push_back(5.0 * k);
        d.y.push_back(6.0);
    }
    d.u.resize(199);
    CHECK_NOTHROW(d.validate());
    IdDataset gap = d;
    gap.t[100] += 1.0;
    CHECK_THROWS_AS(gap.validate(), ConfigError);
    IdDataset short_rec;
    short_rec.t = {0.0, 5.0};
    short_rec.y = {6.0, 6.0};
    short_rec.u.resize(1);
    CHECK_THROWS_AS(short_rec.validate(), ConfigError);
}

TEST_SUITE_END();
