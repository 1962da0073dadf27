#pragma once

#include <cstdint>
#include <vector>

#include "dhap/model/hovorka.hpp"
#include "dhap/numerics/random.hpp"

namespace dhap::trial {

struct VirtualPatient {
    int id = 0;
    sim::Params params{};
    double u_ba_nominal = 0.0;   ///< basal holding the zero-meal equilibrium at 6 mmol/L [mU/min]
    double ISF = 2.0;            ///< insulin sensitivity factor [(mmol/L)/U]
    double ICR = 0.0;            ///< insulin-to-carb ratio [g/U]
    std::uint64_t noise_seed = 0;
};

struct CohortOptions {
    double dispersion = 0.2;     ///< log-normal sigma applied to each positive parameter
    double target_glucose = 6.0; ///< equilibrium target for the nominal basal [mmol/L]
    double body_weight_kg = 70.0;
    double icr_rule_constant = 330.0;  ///< ICR = constant / total daily dose [g CHO per U]
    int max_resample = 50;
};

/// Seeded cohort around the nominal adult parameter set. Each patient's
/// positive parameters are perturbed log-normally, the nominal basal is
/// solved so the zero-meal equilibrium sits at the target, and ICR follows
/// the carb-ratio rule applied to an estimated total daily dose (basal
/// assumed to cover half of it). Patients without a feasible equilibrium are
/// resampled.
std::vector<VirtualPatient> generate_cohort(int n, std::uint64_t seed,
                                            const CohortOptions& opts = {});

/// Perturb one parameter set (dispersion 0 returns the input unchanged).
sim::Params perturb_params(const sim::Params& nominal, GaussianStream& stream, double dispersion);

/// First-order autoregressive CGM error: y = GI + noise, floored at 0.1 mmol/L.
class CgmNoise {
public:
    CgmNoise(std::uint64_t seed, double stationary_sd = 0.25, double ar_coeff = 0.7);

    double sample(double gi);
    double stationary_sd() const { return sd_; }

private:
    GaussianStream stream_;
    double sd_;
    double phi_;
    double state_ = 0.0;
};

} // namespace dhap::trial
