#pragma once

#include <vector>

namespace dhap::trial {

struct MealEvent {
    double t = 0.0;       ///< minutes from trial start
    double grams = 0.0;   ///< carbohydrate content [g]
    bool announced = true;
};

struct ExerciseEvent {
    double t_start = 0.0;
    double t_end = 0.0;
    double hr_delta = 50.0;  ///< heart-rate elevation above resting [BPM]
};

/// Timed event list driving one closed-loop run.
struct Protocol {
    double duration = 1560.0;  ///< [min]
    std::vector<MealEvent> meals;
    std::vector<ExerciseEvent> exercise;

    void validate(double ts) const;
    const MealEvent* meal_at(double t, double ts) const;
    bool exercise_active(double t) const;
    bool exercise_starts_at(double t, double ts) const;
    double heart_rate(double t, double hr_rest) const;
};

/// The evaluation-day protocol: dinner 75 g at hour 1, breakfast 50 g at
/// hour 14, lunch 75 g at hour 19, snack 15 g at hour 22, moderate exercise
/// during hours 24-24.75, for a 26-h trial starting at 17:00.
Protocol default_protocol();

/// Meal grams to a one-interval carbohydrate-rate pulse [mmol/min].
double meal_pulse_rate(double grams, double ts);

} // namespace dhap::trial
