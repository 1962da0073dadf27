#pragma once

#include <deque>
#include <optional>

#include "dhap/control/ocp.hpp"
#include "dhap/estimation/cdekf.hpp"

namespace dhap::dosing {

using mpc::Mode;

/// Safety-layer constants. Defaults are the clinical values; everything is
/// config-overridable.
struct Config {
    double Ts = 5.0;                    ///< control interval [min]
    double glucagon_switch = 4.5;       ///< switch to glucagon below this [mmol/L]
    double insulin_switch = 5.0;        ///< switch back to insulin above this [mmol/L]
    double exercise_threshold = 7.0;    ///< glucagon threshold and setpoint during exercise [mmol/L]
    double setpoint = 6.0;              ///< nominal glucose setpoint [mmol/L]
    double meal_insulin_window = 60.0;  ///< insulin-only window after a meal [min]
    double bolus_allowance = 1.15;      ///< meal-bolus allowance factor gamma [-]
    double epsilon = 1e-3;              ///< bound floor [mU/min and ug/min]
    double glucagon_cap_ug = 300.0;     ///< rolling 2-h glucagon cap [ug]
    double exercise_bolus_ug = 100.0;   ///< glucagon dose at exercise start [ug]
    double fallback_glucagon_ug = 15.0; ///< open-loop glucagon dose [ug]
    double fallback_basal_threshold = 8.0;  ///< open-loop basal cutoff [mmol/L]
    int bolus_window = 11;              ///< bolus history span [intervals]
    int glucagon_window = 23;           ///< glucagon history span [intervals]
    double basal_resolution_U_h = 0.01;
    double bolus_resolution_U = 0.1;
    double glucagon_resolution_ug_h = 0.01;
};

/// One interval of pump actuation. Rates are held over the interval.
struct PumpCommand {
    double u_ba = 0.0;  ///< basal insulin [mU/min]
    double u_bo = 0.0;  ///< bolus insulin [mU/min]
    double u_G = 0.0;   ///< glucagon [ug/min]
    bool quantized = false;
};

/// Upper bounds for one solve, rates over the interval.
struct Bounds {
    double u_ba_max = 0.0;
    double u_bo_max = 0.0;
    double u_G_max = 0.0;
};

/// Mutable per-patient heuristic state: mode, dose-history rings, meal and
/// exercise bookkeeping, and the correction-bolus carryover.
class DosingState {
public:
    DosingState(Config cfg, double log_si_ref);

    const Config& config() const { return cfg_; }
    Mode mode() const { return mode_; }
    bool exercising() const { return exercising_; }
    double log_si_ref() const { return log_si_ref_; }

    /// Meal announcement at time t: resets the bolus history and forces the
    /// correction bolus recompute.
    void announce_meal(double t, double grams);

    /// State-dependent hormone switching with post-meal insulin forcing.
    Mode switch_mode(double g, double t);

    /// Maximum bolus rate [mU/min]: correction + meal allowance - history.
    double bolus_bound(double g, double isf_mmolL_per_U, double icr_g_per_U, double t);

    /// Maximum glucagon rate [ug/min] from the rolling 2-h cap.
    double glucagon_bound() const;

    /// Basal bounds are (0, 2 u_ba_nominal).
    static double basal_bound(double u_ba_nominal);

    /// Exercise start/stop. On start below the exercise threshold, returns the
    /// immediate glucagon bolus [ug], already limited by the rolling cap.
    std::optional<double> set_exercise(bool active, double g);

    /// Record what the pump actually delivered this interval (post-quantization).
    void record_delivery(const PumpCommand& cmd);

    /// Filter guards for the coming interval: sensitivity diffusion freeze
    /// after meals, covariance zeroing at announcements, and the clip band.
    FilterHooks filter_hooks(double t, double sigma_si_identified, bool meal_announced_now) const;

    /// Open-loop command used when the OCP solve fails.
    PumpCommand fallback(double g, double u_ba_nominal) const;

    /// Setpoint for the OCP under the current exercise state.
    double setpoint() const;

    bool within_meal_window(double t) const;
    double delivered_glucagon_ug() const;
    double bolus_history_rate() const;

private:
    Config cfg_;
    Mode mode_ = Mode::Insulin;
    bool exercising_ = false;
    double log_si_ref_;
    std::deque<double> bolus_hist_;     // rates [mU/min], newest at back
    std::deque<double> glucagon_hist_;  // rates [ug/min]
    double last_meal_t_ = -1e18;
    double last_meal_grams_ = 0.0;
    double ubo_corr_ = 0.0;             // carryover [mU/min]
};

/// Round to pump resolutions: nearest with ties away from zero, except that a
/// value rounding above its bound drops to the next grid point below it.
PumpCommand quantize(const PumpCommand& cmd, const Config& cfg, const Bounds& bounds);

/// Grid rounding helper used by quantize.
double round_to_resolution(double value, double resolution, double upper_bound);

} // namespace dhap::dosing
