#include "dhap/trial/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "dhap/errors.hpp"

namespace dhap::trial {

namespace {
constexpr double kMmolPerGram = 1000.0 / 180.0;  // glucose molar mass 180 g/mol
}

double meal_pulse_rate(double grams, double ts) {
    return grams * kMmolPerGram / ts;
}

void Protocol::validate(double ts) const {
    double prev = -1.0;
    for (const MealEvent& m : meals) {
        if (m.t < prev) throw ConfigError("protocol: meals out of order");
        prev = m.t;
        if (std::abs(std::remainder(m.t, ts)) > 1e-9) {
            throw ConfigError("protocol: meal time off the control grid");
        }
        if (m.grams < 0.0) throw ConfigError("protocol: negative meal size");
    }
    for (const ExerciseEvent& e : exercise) {
        if (e.t_end <= e.t_start) throw ConfigError("protocol: empty exercise window");
    }
}

const MealEvent* Protocol::meal_at(double t, double ts) const {
    for (const MealEvent& m : meals) {
        if (t <= m.t && m.t < t + ts * 0.5) return &m;
    }
    return nullptr;
}

bool Protocol::exercise_active(double t) const {
    return std::any_of(exercise.begin(), exercise.end(), [&](const ExerciseEvent& e) {
        return e.t_start <= t && t < e.t_end;
    });
}

bool Protocol::exercise_starts_at(double t, double ts) const {
    return std::any_of(exercise.begin(), exercise.end(), [&](const ExerciseEvent& e) {
        return t <= e.t_start && e.t_start < t + ts * 0.5;
    });
}

double Protocol::heart_rate(double t, double hr_rest) const {
    for (const ExerciseEvent& e : exercise) {
        if (e.t_start <= t && t < e.t_end) return hr_rest + e.hr_delta;
    }
    return hr_rest;
}

Protocol default_protocol() {
    Protocol p;
    p.duration = 26.0 * 60.0;
    p.meals = {
        {1.0 * 60.0, 75.0, true},   // dinner, 18:00
        {14.0 * 60.0, 50.0, true},  // breakfast, 07:00
        {19.0 * 60.0, 75.0, true},  // lunch, 12:00
        {22.0 * 60.0, 15.0, true},  // snack, 15:00
    };
    p.exercise = {{24.0 * 60.0, 24.75 * 60.0, 50.0}};  // 17:00-17:45, moderate
    return p;
}

} // namespace dhap::trial
