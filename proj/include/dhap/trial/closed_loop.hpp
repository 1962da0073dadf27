#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dhap/control/dosing.hpp"
#include "dhap/control/sqp.hpp"
#include "dhap/estimation/mle.hpp"
#include "dhap/trial/cohort.hpp"
#include "dhap/trial/protocol.hpp"

namespace dhap::trial {

struct LoopConfig {
    double Ts = 5.0;  ///< control interval [min]
    /// Plant ground truth: Euler-Maruyama steps.
    IntegratorSpec plant{IntegratorMethod::ExplicitEuler, 0.5, 10};
    /// Controller prediction: RK4 substeps per interval.
    IntegratorSpec prediction{IntegratorMethod::ExplicitRk4, 2.5, 2};
    bool plant_process_noise = false;
    double plant_sigma_G = 0.0;   ///< optional plant glucose diffusion [(mmol/L)/sqrt(min)]
    double cgm_sd = 0.25;         ///< stationary CGM noise SD [mmol/L]
    double cgm_ar = 0.7;          ///< CGM noise AR(1) coefficient
    dosing::Config dosing;
    FilterOptions filter;
    mpc::SqpOptions sqp;
    std::uint64_t master_seed = 1;
};

struct IntervalLog {
    double t = 0.0;
    double g_true = 0.0;     ///< plant plasma glucose at the sample time [mmol/L]
    double cgm = 0.0;
    double u_ba = 0.0, u_bo = 0.0, u_G = 0.0;  ///< delivered rates
    int mode = 0;            ///< 0 insulin, 1 glucagon
    double g_est = 0.0;      ///< filtered glucose estimate
    double log_si = 0.0;
    double u_ba_max = 0.0, u_bo_max = 0.0, u_G_max = 0.0;
    bool fallback_used = false;
    bool exercising = false;
    double meal_grams = 0.0; ///< announced this interval
};

struct TrialRecord {
    int patient_id = 0;
    bool valid = true;
    std::vector<IntervalLog> log;
    std::array<double, 5> tir{};  ///< % time in <3, [3,3.9), [3.9,10), [10,13.9), >=13.9
    double basal_U_day = 0.0;
    double bolus_U_day = 0.0;
    double glucagon_ug_day = 0.0;
};

/// Percentage of samples in the five glycemic bands (closed on the left).
std::array<double, 5> tir_bands(const std::vector<double>& glucose);

/// TIR percentages and daily dose totals from the interval log.
void compute_stats(TrialRecord& record);

/// One virtual trial day: the plant advances under Euler-Maruyama, and every
/// 5 min the loop samples the CGM, filters, applies the safety heuristics,
/// solves the OCP (open-loop fallback on solver failure), quantizes, and
/// administers the first input.
TrialRecord run_closed_loop(const VirtualPatient& patient, const ctrl::Params& ctrl_params,
                            double log_si0, const Protocol& protocol, const LoopConfig& config);

/// Identification-experiment generator: basal-rate steady start, the meal
/// schedule 75/50/75/15 g with ICR-sized boluses, 36 h of 5-min CGM samples
/// from the plant with AR(1) sensor noise.
IdDataset generate_id_dataset(const VirtualPatient& patient, std::uint64_t seed,
                              double duration_min = 2160.0, double ts = 5.0,
                              double plant_h = 0.5);

/// Synthetic dataset from the control model itself (Euler-Maruyama with the
/// model diffusion plus measurement noise); the self-consistency oracle.
IdDataset simulate_ctrl_dataset(const ctrl::Params& p, const ctrl::State& x0,
                                const std::vector<ctrl::Inputs>& u, double ts,
                                std::uint64_t seed, double h = 0.5,
                                bool measurement_noise = true);

} // namespace dhap::trial
