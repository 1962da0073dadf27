#include "dhap/estimation/mle.hpp"

#include <cmath>
#include <limits>

#include "dhap/errors.hpp"
#include "dhap/numerics/neldermead.hpp"
#include "dhap/numerics/random.hpp"

namespace dhap {

namespace {

constexpr int kThetaDim = 9;
constexpr double kLog2Pi = 1.8378770664093453;

// Pack theta into the unconstrained search space: log for positive
// quantities, raw for log SI(0).
Eigen::VectorXd pack(const IdentifiedSubset& s) {
    Eigen::VectorXd z(kThetaDim);
    z << std::log(s.k_m), std::log(s.tau_D), std::log(s.V_G), std::log(s.EGP),
        std::log(s.sigma_G), std::log(s.sigma_SI), std::log(s.G0), std::log(s.GI0), s.log_SI0;
    return z;
}

IdentifiedSubset unpack(const Eigen::VectorXd& z) {
    IdentifiedSubset s;
    s.k_m = std::exp(z[0]);
    s.tau_D = std::exp(z[1]);
    s.V_G = std::exp(z[2]);
    s.EGP = std::exp(z[3]);
    s.sigma_G = std::exp(z[4]);
    s.sigma_SI = std::exp(z[5]);
    s.G0 = std::exp(z[6]);
    s.GI0 = std::exp(z[7]);
    s.log_SI0 = z[8];
    return s;
}

} // namespace

void IdDataset::validate(std::size_t min_samples) const {
    if (y.size() != t.size() || u.size() + 1 != y.size()) {
        throw ConfigError("IdDataset: misaligned record lengths");
    }
    if (y.size() < min_samples) {
        throw ConfigError("IdDataset: record too short for identification");
    }
    const double step = dt();
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (std::abs(t[k] - t[k - 1] - step) > 1e-9) {
            throw ConfigError("IdDataset: sample grid has gaps");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw ConfigError("IdDataset: non-finite CGM sample");
    }
}

ctrl::Params apply_subset(ctrl::Params fixed, const IdentifiedSubset& theta) {
    fixed.k_m = theta.k_m;
    fixed.tau_D = theta.tau_D;
    fixed.V_G = theta.V_G;
    fixed.EGP = theta.EGP;
    fixed.sigma_G = theta.sigma_G;
    fixed.sigma_SI = theta.sigma_SI;
    return fixed;
}

ctrl::State assemble_x0(const IdentifiedSubset& theta, const ctrl::Params& p, double u_ba0) {
    ctrl::State x0 = ctrl::State::Zero();
    const double ip = u_ba0 / p.C_I;
    x0[ctrl::idx::ISC] = ip;
    x0[ctrl::idx::IP] = ip;
    x0[ctrl::idx::IEFF] = std::exp(theta.log_SI0) * ip;
    x0[ctrl::idx::G] = theta.G0;
    x0[ctrl::idx::LOG_SI] = theta.log_SI0;
    x0[ctrl::idx::GI] = theta.GI0;
    return x0;
}

double nll(const IdentifiedSubset& theta, const IdDataset& data, const ctrl::Params& fixed,
           const FilterOptions& opts) {
    const ctrl::Params p = apply_subset(fixed, theta);
    if (!p.valid()) return kNllDivergedSentinel;
    const double u_ba0 = data.u.empty() ? 0.0 : data.u.front().u_ba;
    const FilterBelief prior = default_prior(assemble_x0(theta, p, u_ba0), data.t.front(), opts);
    FilterPassResult pass;
    try {
        pass = filter_pass(data.y, data.u, p, prior, data.dt(), opts);
    } catch (const FilterError&) {
        return kNllDivergedSentinel;
    }
    const double n_samples = static_cast<double>(pass.innovations.size());
    double acc = 0.0;
    for (const InnovationRecord& rec : pass.innovations) {
        acc += std::log(rec.Re) + rec.e * rec.e / rec.Re;
    }
    const double value = 0.5 * n_samples * kLog2Pi + 0.5 * acc;
    return std::isfinite(value) ? value : kNllDivergedSentinel;
}

IdentifiedSubset default_init(const IdDataset& data, const ctrl::Params& fixed) {
    IdentifiedSubset s;
    s.k_m = fixed.k_m;
    s.tau_D = fixed.tau_D;
    s.V_G = fixed.V_G;
    s.sigma_G = std::max(fixed.sigma_G, 1e-3);
    s.sigma_SI = std::max(fixed.sigma_SI, 1e-3);
    s.G0 = std::max(data.y.front(), 1.0);
    s.GI0 = s.G0;
    s.log_SI0 = std::log(1.9e-3);
    // EGP consistent with the recorded initial basal holding glucose at y0.
    const double u_ba0 = data.u.empty() ? 0.0 : data.u.front().u_ba;
    const double i_eff = std::exp(s.log_SI0) * u_ba0 / fixed.C_I;
    s.EGP = std::max((fixed.GEZI + i_eff) * s.G0, 1e-3);
    return s;
}

EstimationResult estimate(const IdDataset& data, const ctrl::Params& fixed,
                          const IdentifiedSubset& init, const EstimateOptions& opts) {
    data.validate();

    auto objective = [&](const Eigen::VectorXd& z) { return nll(unpack(z), data, fixed, opts.filter); };

    const Eigen::VectorXd z_init = pack(init);
    int evals = 0;
    bool any_converged = false;
    Eigen::VectorXd z_best;
    double f_best = std::numeric_limits<double>::infinity();

    GaussianStream perturb(derive_seed(opts.seed, 0x1d5ull));
    for (int start = 0; start <= opts.restarts; ++start) {
        Eigen::VectorXd z0 = start == 0 ? z_init : z_best;
        if (start > 0) {
            for (int i = 0; i < z0.size(); ++i) {
                z0[i] += opts.restart_spread * perturb.next();
            }
        }
        NelderMeadOptions nm;
        nm.max_iter = start == 0 ? opts.max_iter_start : opts.max_iter_restart;
        nm.f_tol = 1e-7;
        nm.x_tol = 1e-5;
        nm.init_step = start == 0 ? 0.15 : 0.05;
        NelderMeadResult r = nelder_mead(objective, z0, nm);
        evals += r.evaluations;
        // Restarts replace the incumbent only on a meaningful improvement;
        // roundoff-level ties would otherwise wander along flat likelihood
        // directions (k_m and V_G enter the model only through their ratio).
        const double margin = start == 0 ? 0.0 : 1e-4;
        if (r.f < f_best - margin) {
            f_best = r.f;
            z_best = r.x;
            any_converged = any_converged || r.converged;
        }
    }

    if (!std::isfinite(f_best) || f_best >= kNllDivergedSentinel) {
        throw EstimationError("estimate: every start diverged for patient " + data.patient_id);
    }

    EstimationResult result;
    result.theta = unpack(z_best);
    result.params = apply_subset(fixed, result.theta);
    result.x0 = assemble_x0(result.theta, result.params,
                            data.u.empty() ? 0.0 : data.u.front().u_ba);
    result.nll = f_best;
    result.evaluations = evals;
    result.converged = any_converged;
    result.patient_id = data.patient_id;
    result.data_span_min = data.t.back() - data.t.front();
    return result;
}

} // namespace dhap
