#include "dhap/control/dosing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dhap::dosing {

DosingState::DosingState(Config cfg, double log_si_ref)
    : cfg_(std::move(cfg)), log_si_ref_(log_si_ref) {
    bolus_hist_.assign(cfg_.bolus_window, 0.0);
    glucagon_hist_.assign(cfg_.glucagon_window, 0.0);
}

void DosingState::announce_meal(double t, double grams) {
    last_meal_t_ = t;
    last_meal_grams_ = grams;
    // The history resets so the full meal allowance is available.
    std::fill(bolus_hist_.begin(), bolus_hist_.end(), 0.0);
}

bool DosingState::within_meal_window(double t) const {
    return t - last_meal_t_ < cfg_.meal_insulin_window;
}

Mode DosingState::switch_mode(double g, double t) {
    if (within_meal_window(t)) {
        mode_ = Mode::Insulin;
        return mode_;
    }
    const double low = exercising_ ? cfg_.exercise_threshold : cfg_.glucagon_switch;
    const double high = exercising_ ? cfg_.exercise_threshold : cfg_.insulin_switch;
    if (g < low) {
        mode_ = Mode::Glucagon;
    } else if (g > high) {
        mode_ = Mode::Insulin;
    }
    return mode_;
}

double DosingState::bolus_bound(double g, double isf_mmolL_per_U, double icr_g_per_U, double t) {
    const bool in_window = within_meal_window(t);
    const bool announced_now = (t == last_meal_t_);
    if (announced_now || !in_window) {
        // mU/min: ((G - 10) mmol/L) / (ISF (mmol/L)/U) gives U, spread over Ts.
        ubo_corr_ = std::max(0.0, (g - 10.0) / (isf_mmolL_per_U * cfg_.Ts) * 1000.0);
    }
    double ubo_meal = 0.0;
    if (in_window) {
        ubo_meal = std::max(0.0, cfg_.bolus_allowance * last_meal_grams_ /
                                     (icr_g_per_U * cfg_.Ts) * 1000.0);
    }
    const double hist = bolus_history_rate();
    return std::max(cfg_.epsilon, ubo_corr_ + ubo_meal - hist);
}

double DosingState::bolus_history_rate() const {
    return std::accumulate(bolus_hist_.begin(), bolus_hist_.end(), 0.0);
}

double DosingState::delivered_glucagon_ug() const {
    double rate_sum = std::accumulate(glucagon_hist_.begin(), glucagon_hist_.end(), 0.0);
    return rate_sum * cfg_.Ts;
}

double DosingState::glucagon_bound() const {
    const double remaining_ug = cfg_.glucagon_cap_ug - delivered_glucagon_ug();
    return std::max(cfg_.epsilon, remaining_ug / cfg_.Ts);
}

double DosingState::basal_bound(double u_ba_nominal) {
    return 2.0 * u_ba_nominal;
}

std::optional<double> DosingState::set_exercise(bool active, double g) {
    const bool starting = active && !exercising_;
    exercising_ = active;
    if (starting && g < cfg_.exercise_threshold) {
        return std::min(cfg_.exercise_bolus_ug, glucagon_bound() * cfg_.Ts);
    }
    return std::nullopt;
}

void DosingState::record_delivery(const PumpCommand& cmd) {
    bolus_hist_.pop_front();
    bolus_hist_.push_back(cmd.u_bo);
    glucagon_hist_.pop_front();
    glucagon_hist_.push_back(cmd.u_G);
}

FilterHooks DosingState::filter_hooks(double t, double sigma_si_identified,
                                      bool meal_announced_now) const {
    FilterHooks hooks;
    hooks.sigma_si_override = within_meal_window(t) ? 0.0 : sigma_si_identified;
    hooks.zero_log_si_cov = meal_announced_now;
    hooks.log_si_clip = std::make_pair(log_si_ref_ - 1.0, log_si_ref_ + 1.0);
    return hooks;
}

PumpCommand DosingState::fallback(double g, double u_ba_nominal) const {
    PumpCommand cmd;
    cmd.u_ba = (g <= cfg_.fallback_basal_threshold) ? 0.0 : u_ba_nominal;
    cmd.u_bo = 0.0;
    if (g < cfg_.glucagon_switch) {
        const double dose_ug = std::min(cfg_.fallback_glucagon_ug, glucagon_bound() * cfg_.Ts);
        cmd.u_G = dose_ug / cfg_.Ts;
    }
    return cmd;
}

double DosingState::setpoint() const {
    return exercising_ ? cfg_.exercise_threshold : cfg_.setpoint;
}

double round_to_resolution(double value, double resolution, double upper_bound) {
    if (resolution <= 0.0) return std::min(value, upper_bound);
    // Nearest multiple, ties away from zero (values are nonnegative here).
    double q = std::floor(value / resolution + 0.5) * resolution;
    if (q > upper_bound) q = std::floor(upper_bound / resolution) * resolution;
    return std::max(0.0, q);
}

PumpCommand quantize(const PumpCommand& cmd, const Config& cfg, const Bounds& bounds) {
    PumpCommand q;
    // Basal: resolution 0.01 U/h -> mU/min.
    const double basal_res = cfg.basal_resolution_U_h * 1000.0 / 60.0;
    q.u_ba = round_to_resolution(cmd.u_ba, basal_res, bounds.u_ba_max);
    // Bolus: resolution 0.1 U per interval -> mU/min over Ts.
    const double bolus_res = cfg.bolus_resolution_U * 1000.0 / cfg.Ts;
    q.u_bo = round_to_resolution(cmd.u_bo, bolus_res, bounds.u_bo_max);
    // Glucagon: resolution 0.01 ug/h -> ug/min.
    const double glucagon_res = cfg.glucagon_resolution_ug_h / 60.0;
    q.u_G = round_to_resolution(cmd.u_G, glucagon_res, bounds.u_G_max);
    q.quantized = true;
    return q;
}

} // namespace dhap::dosing
