#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dhap/estimation/cdekf.hpp"
#include "dhap/model/mvp.hpp"

namespace dhap {

/// CGM + dosing record on a fixed 5-min grid; the identification input.
struct IdDataset {
    std::vector<double> t;          ///< sample times [min], N+1 entries, uniform spacing
    std::vector<double> y;          ///< CGM samples [mmol/L], N+1 entries
    std::vector<ctrl::Inputs> u;    ///< per-interval inputs, N entries
    std::string patient_id;

    double dt() const { return t.size() > 1 ? t[1] - t[0] : 5.0; }
    void validate(std::size_t min_samples = 144) const;
};

/// Free parameters of the identification: kinetic subset, diffusion
/// coefficients, and the estimated components of the initial state.
struct IdentifiedSubset {
    double k_m, tau_D, V_G, EGP;
    double sigma_G, sigma_SI;
    double G0, GI0, log_SI0;
};

struct EstimationResult {
    ctrl::Params params;       ///< fixed parameters overlaid with the estimate
    ctrl::State x0;            ///< assembled initial state estimate
    IdentifiedSubset theta;
    double nll = 0.0;
    int evaluations = 0;
    bool converged = false;
    std::string patient_id;
    double data_span_min = 0.0;
};

/// Control-model parameter set with theta overlaid on the fixed values.
ctrl::Params apply_subset(ctrl::Params fixed, const IdentifiedSubset& theta);

/// Initial state consistent with theta: insulin chain at the basal steady
/// state of the first recorded basal rate, meal and glucagon chains empty.
ctrl::State assemble_x0(const IdentifiedSubset& theta, const ctrl::Params& p, double u_ba0);

/// Negative log-likelihood of the innovation sequence (exact, ny = 1).
/// Returns the documented sentinel when the filter diverges so a minimizer
/// can retreat.
double nll(const IdentifiedSubset& theta, const IdDataset& data, const ctrl::Params& fixed,
           const FilterOptions& opts = {});

inline constexpr double kNllDivergedSentinel = 1e12;

struct EstimateOptions {
    int restarts = 5;              ///< perturbed restarts after the initial start
    double restart_spread = 0.3;   ///< log-space perturbation magnitude
    int max_iter_start = 2000;     ///< evaluation cap for the initial start
    int max_iter_restart = 2000;   ///< evaluation cap per restart
    std::uint64_t seed = 0;        ///< restart perturbation stream
    FilterOptions filter;
};

/// Maximum-likelihood estimation of theta by simplex search over
/// log-transformed parameters with perturbed restarts.
EstimationResult estimate(const IdDataset& data, const ctrl::Params& fixed,
                          const IdentifiedSubset& init, const EstimateOptions& opts = {});

/// Default initial guess built from nominal values and the first CGM sample.
IdentifiedSubset default_init(const IdDataset& data, const ctrl::Params& fixed);

} // namespace dhap
