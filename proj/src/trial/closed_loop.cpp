#include "dhap/trial/closed_loop.hpp"

#include <cmath>

#include "dhap/errors.hpp"
#include "dhap/numerics/integrate.hpp"

namespace dhap::trial {

std::array<double, 5> tir_bands(const std::vector<double>& glucose) {
    std::array<double, 5> counts{};
    for (double g : glucose) {
        int band;
        if (g < 3.0) {
            band = 0;
        } else if (g < 3.9) {
            band = 1;
        } else if (g < 10.0) {
            band = 2;
        } else if (g < 13.9) {
            band = 3;
        } else {
            band = 4;
        }
        counts[band] += 1.0;
    }
    std::array<double, 5> pct{};
    if (!glucose.empty()) {
        for (int i = 0; i < 5; ++i) pct[i] = 100.0 * counts[i] / glucose.size();
    }
    return pct;
}

void compute_stats(TrialRecord& record) {
    std::vector<double> glucose;
    glucose.reserve(record.log.size());
    double basal_mU = 0.0, bolus_mU = 0.0, glucagon_ug = 0.0;
    double ts = record.log.size() > 1 ? record.log[1].t - record.log[0].t : 5.0;
    for (const IntervalLog& row : record.log) {
        glucose.push_back(row.g_true);
        basal_mU += row.u_ba * ts;
        bolus_mU += row.u_bo * ts;
        glucagon_ug += row.u_G * ts;
    }
    record.tir = tir_bands(glucose);
    const double days = record.log.size() * ts / 1440.0;
    if (days > 0.0) {
        record.basal_U_day = basal_mU / 1000.0 / days;
        record.bolus_U_day = bolus_mU / 1000.0 / days;
        record.glucagon_ug_day = glucagon_ug / days;
    }
}

namespace {

// Builds the per-solve OCP from the heuristic state and current bounds.
mpc::OcpSpec build_spec(mpc::Mode mode, const dosing::DosingState& heuristics,
                        const dosing::Bounds& bounds, double u_ba_nominal, double d_pulse,
                        int substeps) {
    mpc::OcpSpec spec = mpc::default_spec(mode);
    spec.substeps = substeps;
    spec.z_set = heuristics.setpoint();
    spec.resize_horizon();
    Eigen::VectorXd lb(spec.input_dim()), ub(spec.input_dim());
    if (mode == mpc::Mode::Insulin) {
        lb << 0.0, 0.0;
        ub << bounds.u_ba_max, bounds.u_bo_max;
        spec.u_ba_nominal.setConstant(u_ba_nominal);
    } else {
        lb << 0.0;
        ub << bounds.u_G_max;
    }
    spec.set_uniform_bounds(lb, ub);
    spec.d_forecast.setZero();
    if (d_pulse > 0.0) spec.d_forecast[0] = d_pulse;
    return spec;
}

} // namespace

TrialRecord run_closed_loop(const VirtualPatient& patient, const ctrl::Params& ctrl_params,
                            double log_si0, const Protocol& protocol, const LoopConfig& config) {
    protocol.validate(config.Ts);

    TrialRecord record;
    record.patient_id = patient.id;
    const int n_intervals = static_cast<int>(std::round(protocol.duration / config.Ts));
    record.log.reserve(n_intervals);

    // Plant starts on its basal equilibrium.
    sim::State plant = sim::equilibrium_state(patient.params, patient.u_ba_nominal);
    CgmNoise cgm(patient.noise_seed, config.cgm_sd, config.cgm_ar);
    GaussianStream plant_stream(
        derive_seed(config.master_seed, 0x9a41ull, static_cast<std::uint64_t>(patient.id)));

    dosing::Config dosing_cfg = config.dosing;
    dosing_cfg.Ts = config.Ts;
    dosing::DosingState heuristics(dosing_cfg, log_si0);

    FilterBelief belief;
    bool belief_ready = false;

    Eigen::MatrixXd warm_insulin, warm_glucagon;
    const double sigma_si_identified = ctrl_params.sigma_SI;

    for (int k = 0; k < n_intervals; ++k) {
        const double t = k * config.Ts;
        IntervalLog row;
        row.t = t;
        row.g_true = plant[sim::idx::Q1] / patient.params.V_G;
        row.cgm = cgm.sample(sim::output(plant));

        if (!belief_ready) {
            IdentifiedSubset init;
            init.k_m = ctrl_params.k_m;
            init.tau_D = ctrl_params.tau_D;
            init.V_G = ctrl_params.V_G;
            init.EGP = ctrl_params.EGP;
            init.sigma_G = ctrl_params.sigma_G;
            init.sigma_SI = ctrl_params.sigma_SI;
            init.G0 = row.cgm;
            init.GI0 = row.cgm;
            init.log_SI0 = log_si0;
            belief = default_prior(assemble_x0(init, ctrl_params, patient.u_ba_nominal), t,
                                   config.filter);
            belief_ready = true;
        }

        // Meal and exercise events at this interval boundary.
        const MealEvent* meal = protocol.meal_at(t, config.Ts);
        const bool announced_now = meal != nullptr && meal->announced;
        if (announced_now) {
            heuristics.announce_meal(t, meal->grams);
            row.meal_grams = meal->grams;
        }
        const bool exercise_now = protocol.exercise_active(t);

        FilterHooks hooks = heuristics.filter_hooks(t, sigma_si_identified, announced_now);

        // Measurement update, then the sensitivity guards.
        try {
            auto [updated, rec] = update(belief, row.cgm, ctrl_params);
            belief = updated;
        } catch (const FilterError&) {
            record.valid = false;
            break;
        }
        if (hooks.log_si_clip) {
            clip_log_si(belief, hooks.log_si_clip->first, hooks.log_si_clip->second);
        }
        if (hooks.zero_log_si_cov) zero_log_si_cov(belief);

        row.g_est = belief.mean[ctrl::idx::G];
        row.log_si = belief.mean[ctrl::idx::LOG_SI];

        // The safety layer keys on the conservative lower of the filtered
        // plasma estimate and the raw sensor reading: a mismatched meal model
        // can hold the estimate high while the sensor already reads low.
        const double g_guard = std::min(row.g_est, row.cgm);

        const std::optional<double> exercise_bolus_ug =
            heuristics.set_exercise(exercise_now, g_guard);
        mpc::Mode mode = heuristics.switch_mode(g_guard, t);
        row.exercising = heuristics.exercising();

        dosing::Bounds bounds;
        bounds.u_ba_max = dosing::DosingState::basal_bound(patient.u_ba_nominal);
        bounds.u_bo_max = heuristics.bolus_bound(g_guard, patient.ISF, patient.ICR, t);
        bounds.u_G_max = heuristics.glucagon_bound();
        row.u_ba_max = bounds.u_ba_max;
        row.u_bo_max = bounds.u_bo_max;
        row.u_G_max = bounds.u_G_max;

        dosing::PumpCommand cmd;
        if (exercise_bolus_ug) {
            mode = mpc::Mode::Glucagon;
            cmd.u_G = *exercise_bolus_ug / config.Ts;
        } else {
            const double d_pulse =
                announced_now ? meal_pulse_rate(meal->grams, config.Ts) : 0.0;
            mpc::OcpSpec spec = build_spec(mode, heuristics, bounds, patient.u_ba_nominal,
                                           d_pulse, config.prediction.steps_per_interval);
            mpc::ShootingNlp nlp(spec, belief.mean, ctrl_params);
            Eigen::MatrixXd& warm = (mode == mpc::Mode::Insulin) ? warm_insulin : warm_glucagon;
            Eigen::MatrixXd start = (warm.rows() == spec.input_dim() && warm.cols() == spec.n_intervals)
                                        ? mpc::shift_warm_start(warm)
                                        : mpc::cold_start(spec);
            try {
                mpc::OcpSolution sol = mpc::sqp_solve(nlp, start, config.sqp);
                warm = sol.U;
                if (mode == mpc::Mode::Insulin) {
                    cmd.u_ba = sol.U(0, 0);
                    cmd.u_bo = sol.U(1, 0);
                } else {
                    cmd.u_G = sol.U(0, 0);
                }
            } catch (const Error&) {
                cmd = heuristics.fallback(g_guard, patient.u_ba_nominal);
                row.fallback_used = true;
            }
        }

        // Hormone exclusivity, then pump resolution.
        if (mode == mpc::Mode::Glucagon) {
            cmd.u_ba = 0.0;
            cmd.u_bo = 0.0;
        } else {
            cmd.u_G = 0.0;
        }
        const dosing::PumpCommand delivered = dosing::quantize(cmd, dosing_cfg, bounds);
        heuristics.record_delivery(delivered);
        row.u_ba = delivered.u_ba;
        row.u_bo = delivered.u_bo;
        row.u_G = delivered.u_G;
        row.mode = (mode == mpc::Mode::Glucagon) ? 1 : 0;
        record.log.push_back(row);

        // Filter time update under the delivered inputs.
        ctrl::Inputs u_ctrl;
        u_ctrl.u_ba = delivered.u_ba;
        u_ctrl.u_bo = delivered.u_bo;
        u_ctrl.u_G = delivered.u_G;
        u_ctrl.D = announced_now ? meal_pulse_rate(meal->grams, config.Ts) : 0.0;
        ctrl::Params pred_params = ctrl_params;
        if (hooks.sigma_si_override) pred_params.sigma_SI = *hooks.sigma_si_override;
        try {
            belief = predict(belief, u_ctrl, pred_params, config.Ts, config.filter);
        } catch (const FilterError&) {
            record.valid = false;
            break;
        }

        // Plant advance under the held inputs.
        sim::Inputs u_plant;
        u_plant.u_I = delivered.u_ba + delivered.u_bo;
        u_plant.u_G = delivered.u_G;
        u_plant.D = meal ? meal_pulse_rate(meal->grams, config.Ts) : 0.0;
        auto f_plant = [&](double tt, const sim::State& x) {
            sim::Inputs u = u_plant;
            u.HR = protocol.heart_rate(tt, patient.params.HR_0);
            return sim::derivative(x, u, patient.params, tt);
        };
        const int steps = config.plant.steps_per_interval;
        const double h = config.Ts / steps;
        Eigen::Matrix<double, sim::kStateDim, 1> sigma_col =
            Eigen::Matrix<double, sim::kStateDim, 1>::Zero();
        if (config.plant_process_noise) {
            sigma_col[sim::idx::Q1] = config.plant_sigma_G * patient.params.V_G;
        }
        try {
            for (int s = 0; s < steps; ++s) {
                Eigen::Matrix<double, 1, 1> dw;
                dw[0] = config.plant_process_noise ? std::sqrt(h) * plant_stream.next() : 0.0;
                plant = em_step(f_plant, sigma_col, t + s * h, plant, h, dw);
            }
        } catch (const Error&) {
            record.valid = false;
            break;
        }
        if (!plant.allFinite()) {
            record.valid = false;
            break;
        }
    }

    compute_stats(record);
    return record;
}

namespace {

// One open-loop experiment: meal schedule with boluses at a fraction of the
// ICR dose and two gentle basal steps in the quiet tail.
IdDataset run_id_experiment(const VirtualPatient& patient, std::uint64_t seed,
                            double duration_min, double ts, double plant_h,
                            double bolus_fraction) {
    const int n = static_cast<int>(std::round(duration_min / ts));
    IdDataset data;
    data.patient_id = "patient-" + std::to_string(patient.id);
    data.t.reserve(n + 1);
    data.y.reserve(n + 1);
    data.u.reserve(n);

    struct SchedMeal {
        double t;
        double grams;
    };
    const SchedMeal meals[] = {{120.0, 75.0}, {420.0, 50.0}, {720.0, 75.0}, {900.0, 15.0}};

    sim::State plant = sim::equilibrium_state(patient.params, patient.u_ba_nominal);
    CgmNoise cgm(derive_seed(seed, 0x1dda7aull, static_cast<std::uint64_t>(patient.id)));

    for (int k = 0; k <= n; ++k) {
        const double t = k * ts;
        data.t.push_back(t);
        data.y.push_back(cgm.sample(sim::output(plant)));
        if (k == n) break;

        ctrl::Inputs u;
        u.u_ba = patient.u_ba_nominal;
        // Basal steps help separate endogenous production from sensitivity.
        if (t >= 1260.0 && t < 1440.0) u.u_ba *= 1.2;
        if (t >= 1680.0 && t < 1860.0) u.u_ba *= 0.8;
        for (const SchedMeal& m : meals) {
            if (t <= m.t && m.t < t + ts * 0.5) {
                u.D = meal_pulse_rate(m.grams, ts);
                u.u_bo = bolus_fraction * m.grams / patient.ICR / ts * 1000.0;
            }
        }
        data.u.push_back(u);

        sim::Inputs u_plant;
        u_plant.u_I = u.u_ba + u.u_bo;
        u_plant.D = u.D;
        auto f_plant = [&](double tt, const sim::State& x) {
            return sim::derivative(x, u_plant, patient.params, tt);
        };
        const int steps = std::max(1, static_cast<int>(std::round(ts / plant_h)));
        plant = rk4_integrate(f_plant, t, plant, ts / steps, steps);
    }
    return data;
}

} // namespace

IdDataset generate_id_dataset(const VirtualPatient& patient, std::uint64_t seed,
                              double duration_min, double ts, double plant_h) {
    // Down-titrate the experiment boluses until the record stays clear of
    // hypoglycemia, so the model is identified in the regime the controller
    // will operate in.
    IdDataset data;
    for (double fraction : {1.0, 0.85, 0.7, 0.55, 0.4, 0.25}) {
        data = run_id_experiment(patient, seed, duration_min, ts, plant_h, fraction);
        double y_min = data.y.front();
        for (double y : data.y) y_min = std::min(y_min, y);
        if (y_min >= 3.9) break;
    }
    return data;
}

IdDataset simulate_ctrl_dataset(const ctrl::Params& p, const ctrl::State& x0,
                                const std::vector<ctrl::Inputs>& u, double ts,
                                std::uint64_t seed, double h, bool measurement_noise) {
    IdDataset data;
    data.patient_id = "synthetic";
    const int n = static_cast<int>(u.size());
    data.t.reserve(n + 1);
    data.y.reserve(n + 1);
    data.u = u;

    GaussianStream process(derive_seed(seed, 0x5deull));
    GaussianStream sensor(derive_seed(seed, 0x0b5ull));
    const ctrl::Diffusion sigma = ctrl::diffusion(p);
    const double meas_sd = measurement_noise ? std::sqrt(p.R) : 0.0;

    ctrl::State x = x0;
    for (int k = 0; k <= n; ++k) {
        data.t.push_back(k * ts);
        data.y.push_back(ctrl::output(x) + meas_sd * sensor.next());
        if (k == n) break;
        auto f = [&](double, const ctrl::State& xx) { return ctrl::drift(xx, u[k], p); };
        const int steps = std::max(1, static_cast<int>(std::round(ts / h)));
        const double hh = ts / steps;
        for (int s = 0; s < steps; ++s) {
            x = em_step(f, sigma, 0.0, x, hh, process.increments<ctrl::kNoiseDim>(hh));
        }
    }
    return data;
}

} // namespace dhap::trial
