#include "dhap/trial/cohort.hpp"

#include <cmath>

#include "dhap/errors.hpp"

namespace dhap::trial {

sim::Params perturb_params(const sim::Params& nominal, GaussianStream& stream, double dispersion) {
    sim::Params p = nominal;
    auto lognormal = [&](double v) { return v * std::exp(dispersion * stream.next()); };
    p.tau_S = lognormal(p.tau_S);
    p.V_I = lognormal(p.V_I);
    p.k_e = lognormal(p.k_e);
    p.k_b1 = lognormal(p.k_b1);
    p.k_b2 = lognormal(p.k_b2);
    p.k_b3 = lognormal(p.k_b3);
    p.k_a1 = lognormal(p.k_a1);
    p.k_a2 = lognormal(p.k_a2);
    p.k_a3 = lognormal(p.k_a3);
    p.A_G = std::min(1.0, lognormal(p.A_G));
    p.tau_D = lognormal(p.tau_D);
    p.tau_Glu = lognormal(p.tau_Glu);
    p.K_Glu = lognormal(p.K_Glu);
    p.HR_0 = lognormal(p.HR_0);
    p.tau_HR = lognormal(p.tau_HR);
    p.c_1 = lognormal(p.c_1);
    p.c_2 = lognormal(p.c_2);
    p.tau_ex = lognormal(p.tau_ex);
    p.tau_in = lognormal(p.tau_in);
    p.a = lognormal(p.a);
    p.n = std::max(1.0, lognormal(p.n));
    p.alpha = lognormal(p.alpha);
    p.beta = lognormal(p.beta);
    p.k_12 = lognormal(p.k_12);
    p.F_01 = lognormal(p.F_01);
    p.V_G = lognormal(p.V_G);
    p.EGP_0 = lognormal(p.EGP_0);
    p.tau_IG = lognormal(p.tau_IG);
    return p;
}

std::vector<VirtualPatient> generate_cohort(int n, std::uint64_t seed, const CohortOptions& opts) {
    if (n < 1) throw ConfigError("generate_cohort: need at least one patient");
    const sim::Params nominal = sim::nominal_params(opts.body_weight_kg);
    std::vector<VirtualPatient> cohort;
    cohort.reserve(n);
    for (int id = 0; id < n; ++id) {
        GaussianStream stream(derive_seed(seed, 0xc0110ull, static_cast<std::uint64_t>(id)));
        VirtualPatient patient;
        patient.id = id;
        patient.noise_seed = derive_seed(seed, 0xc96ull, static_cast<std::uint64_t>(id));
        bool accepted = false;
        for (int attempt = 0; attempt < opts.max_resample && !accepted; ++attempt) {
            sim::Params p = perturb_params(nominal, stream, opts.dispersion);
            if (!p.valid()) continue;
            try {
                patient.u_ba_nominal = sim::equilibrium_basal(p, opts.target_glucose);
            } catch (const ModelError&) {
                continue;
            }
            patient.params = p;
            accepted = true;
        }
        if (!accepted) {
            throw ModelError("generate_cohort: could not find a feasible patient");
        }
        // Carb-ratio rule on the estimated total daily dose; basal is taken to
        // supply half of it.
        const double basal_U_day = patient.u_ba_nominal * 1440.0 / 1000.0;
        const double tdd_U = std::max(2.0 * basal_U_day, 1.0);
        patient.ICR = opts.icr_rule_constant / tdd_U;
        patient.ISF = 2.0;
        cohort.push_back(patient);
    }
    return cohort;
}

CgmNoise::CgmNoise(std::uint64_t seed, double stationary_sd, double ar_coeff)
    : stream_(seed), sd_(stationary_sd), phi_(ar_coeff) {
    // Start the AR(1) state in its stationary distribution.
    state_ = sd_ * stream_.next();
}

double CgmNoise::sample(double gi) {
    const double innovation_sd = sd_ * std::sqrt(std::max(0.0, 1.0 - phi_ * phi_));
    state_ = phi_ * state_ + innovation_sd * stream_.next();
    return std::max(0.1, gi + state_);
}

} // namespace dhap::trial
