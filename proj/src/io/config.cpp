#include "dhap/io/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dhap/errors.hpp"

namespace dhap::io {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
}

namespace {

json sim_params_to_json(const sim::Params& p) {
    return json{
        {"tau_S", p.tau_S},   {"V_I", p.V_I},       {"k_e", p.k_e},
        {"k_b1", p.k_b1},     {"k_b2", p.k_b2},     {"k_b3", p.k_b3},
        {"k_a1", p.k_a1},     {"k_a2", p.k_a2},     {"k_a3", p.k_a3},
        {"A_G", p.A_G},       {"tau_D", p.tau_D},   {"tau_Glu", p.tau_Glu},
        {"K_Glu", p.K_Glu},   {"HR_0", p.HR_0},     {"tau_HR", p.tau_HR},
        {"c_1", p.c_1},       {"c_2", p.c_2},       {"tau_ex", p.tau_ex},
        {"tau_in", p.tau_in}, {"a", p.a},           {"n", p.n},
        {"alpha", p.alpha},   {"beta", p.beta},     {"k_12", p.k_12},
        {"F_01", p.F_01},     {"V_G", p.V_G},       {"EGP_0", p.EGP_0},
        {"tau_IG", p.tau_IG},
    };
}

sim::Params sim_params_from_json(const json& j) {
    sim::Params p{};
    p.tau_S = j.at("tau_S");
    p.V_I = j.at("V_I");
    p.k_e = j.at("k_e");
    p.k_b1 = j.at("k_b1");
    p.k_b2 = j.at("k_b2");
    p.k_b3 = j.at("k_b3");
    p.k_a1 = j.at("k_a1");
    p.k_a2 = j.at("k_a2");
    p.k_a3 = j.at("k_a3");
    p.A_G = j.at("A_G");
    p.tau_D = j.at("tau_D");
    p.tau_Glu = j.at("tau_Glu");
    p.K_Glu = j.at("K_Glu");
    p.HR_0 = j.at("HR_0");
    p.tau_HR = j.at("tau_HR");
    p.c_1 = j.at("c_1");
    p.c_2 = j.at("c_2");
    p.tau_ex = j.at("tau_ex");
    p.tau_in = j.at("tau_in");
    p.a = j.at("a");
    p.n = j.at("n");
    p.alpha = j.at("alpha");
    p.beta = j.at("beta");
    p.k_12 = j.at("k_12");
    p.F_01 = j.at("F_01");
    p.V_G = j.at("V_G");
    p.EGP_0 = j.at("EGP_0");
    p.tau_IG = j.at("tau_IG");
    return p;
}

json ctrl_params_to_json(const ctrl::Params& p) {
    return json{
        {"k_1", p.k_1},         {"C_I", p.C_I},         {"GEZI", p.GEZI},
        {"EGP", p.EGP},         {"K_Glu", p.K_Glu},     {"k_m", p.k_m},
        {"V_G", p.V_G},         {"A_G", p.A_G},         {"tau_D", p.tau_D},
        {"tau_Glu", p.tau_Glu}, {"tau_IG", p.tau_IG},   {"sigma_G", p.sigma_G},
        {"sigma_SI", p.sigma_SI}, {"R", p.R},
    };
}

ctrl::Params ctrl_params_from_json(const json& j) {
    ctrl::Params p{};
    p.k_1 = j.at("k_1");
    p.C_I = j.at("C_I");
    p.GEZI = j.at("GEZI");
    p.EGP = j.at("EGP");
    p.K_Glu = j.at("K_Glu");
    p.k_m = j.at("k_m");
    p.V_G = j.at("V_G");
    p.A_G = j.at("A_G");
    p.tau_D = j.at("tau_D");
    p.tau_Glu = j.at("tau_Glu");
    p.tau_IG = j.at("tau_IG");
    p.sigma_G = j.at("sigma_G");
    p.sigma_SI = j.at("sigma_SI");
    p.R = j.at("R");
    return p;
}

} // namespace

std::string canonical_config(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["loop"] = {
        {"Ts", cfg.loop.Ts},
        {"plant_h", cfg.loop.plant.h},
        {"plant_steps", cfg.loop.plant.steps_per_interval},
        {"plant_process_noise", cfg.loop.plant_process_noise},
        {"plant_sigma_G", cfg.loop.plant_sigma_G},
        {"cgm_sd", cfg.loop.cgm_sd},
        {"cgm_ar", cfg.loop.cgm_ar},
        {"nmpc_substeps", cfg.loop.prediction.steps_per_interval},
        {"filter_h", cfg.loop.filter.h},
        {"sqp_kkt_tol", cfg.loop.sqp.kkt_tol},
        {"sqp_max_iter", cfg.loop.sqp.max_iter},
    };
    j["dosing"] = {
        {"glucagon_switch", cfg.loop.dosing.glucagon_switch},
        {"insulin_switch", cfg.loop.dosing.insulin_switch},
        {"exercise_threshold", cfg.loop.dosing.exercise_threshold},
        {"setpoint", cfg.loop.dosing.setpoint},
        {"meal_insulin_window", cfg.loop.dosing.meal_insulin_window},
        {"bolus_allowance", cfg.loop.dosing.bolus_allowance},
        {"epsilon", cfg.loop.dosing.epsilon},
        {"glucagon_cap_ug", cfg.loop.dosing.glucagon_cap_ug},
        {"exercise_bolus_ug", cfg.loop.dosing.exercise_bolus_ug},
        {"fallback_glucagon_ug", cfg.loop.dosing.fallback_glucagon_ug},
        {"fallback_basal_threshold", cfg.loop.dosing.fallback_basal_threshold},
        {"bolus_window", cfg.loop.dosing.bolus_window},
        {"glucagon_window", cfg.loop.dosing.glucagon_window},
        {"basal_resolution_U_h", cfg.loop.dosing.basal_resolution_U_h},
        {"bolus_resolution_U", cfg.loop.dosing.bolus_resolution_U},
        {"glucagon_resolution_ug_h", cfg.loop.dosing.glucagon_resolution_ug_h},
    };
    j["cohort"] = {
        {"dispersion", cfg.cohort.dispersion},
        {"target_glucose", cfg.cohort.target_glucose},
        {"body_weight_kg", cfg.cohort.body_weight_kg},
        {"icr_rule_constant", cfg.cohort.icr_rule_constant},
    };
    j["identify"] = {
        {"id_duration_min", cfg.id_duration_min},
        {"restarts", cfg.estimate.restarts},
        {"restart_spread", cfg.estimate.restart_spread},
        {"max_iter_start", cfg.estimate.max_iter_start},
        {"max_iter_restart", cfg.estimate.max_iter_restart},
    };
    return j.dump();
}

std::string config_hash(const RunConfig& cfg, const std::string& extra_content) {
    return fnv1a_hex(canonical_config(cfg) + extra_content);
}

RunConfig load_run_config(const std::string& path, RunConfig defaults) {
    if (path.empty()) return defaults;
    json j = json::parse(read_file(path));
    RunConfig cfg = defaults;
    for (auto& [key, value] : j.items()) {
        if (key == "seed") {
            cfg.seed = value.get<std::uint64_t>();
        } else if (key == "workers") {
            cfg.workers = value.get<int>();
        } else if (key == "plant_h") {
            cfg.loop.plant.h = value.get<double>();
            cfg.loop.plant.steps_per_interval =
                static_cast<int>(std::round(cfg.loop.Ts / cfg.loop.plant.h));
        } else if (key == "plant_process_noise") {
            cfg.loop.plant_process_noise = value.get<bool>();
        } else if (key == "plant_sigma_G") {
            cfg.loop.plant_sigma_G = value.get<double>();
        } else if (key == "cgm_sd") {
            cfg.loop.cgm_sd = value.get<double>();
        } else if (key == "cgm_ar") {
            cfg.loop.cgm_ar = value.get<double>();
        } else if (key == "nmpc_substeps") {
            cfg.loop.prediction.steps_per_interval = value.get<int>();
            cfg.loop.prediction.h = cfg.loop.Ts / cfg.loop.prediction.steps_per_interval;
        } else if (key == "filter_h") {
            cfg.loop.filter.h = value.get<double>();
        } else if (key == "id_duration_min") {
            cfg.id_duration_min = value.get<double>();
        } else if (key == "cohort_dispersion") {
            cfg.cohort.dispersion = value.get<double>();
        } else if (key == "icr_rule_constant") {
            cfg.cohort.icr_rule_constant = value.get<double>();
        } else if (key == "dosing") {
            auto& d = cfg.loop.dosing;
            const json& jd = value;
            if (jd.contains("glucagon_switch")) d.glucagon_switch = jd["glucagon_switch"];
            if (jd.contains("insulin_switch")) d.insulin_switch = jd["insulin_switch"];
            if (jd.contains("exercise_threshold")) d.exercise_threshold = jd["exercise_threshold"];
            if (jd.contains("setpoint")) d.setpoint = jd["setpoint"];
            if (jd.contains("meal_insulin_window")) d.meal_insulin_window = jd["meal_insulin_window"];
            if (jd.contains("bolus_allowance")) d.bolus_allowance = jd["bolus_allowance"];
            if (jd.contains("epsilon")) d.epsilon = jd["epsilon"];
            if (jd.contains("glucagon_cap_ug")) d.glucagon_cap_ug = jd["glucagon_cap_ug"];
            if (jd.contains("exercise_bolus_ug")) d.exercise_bolus_ug = jd["exercise_bolus_ug"];
            if (jd.contains("fallback_glucagon_ug")) d.fallback_glucagon_ug = jd["fallback_glucagon_ug"];
            if (jd.contains("fallback_basal_threshold")) d.fallback_basal_threshold = jd["fallback_basal_threshold"];
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    }
    return cfg;
}

void save_cohort(const std::string& path, const std::vector<trial::VirtualPatient>& cohort,
                 std::uint64_t seed, const std::string& hash) {
    json patients = json::array();
    for (const trial::VirtualPatient& vp : cohort) {
        patients.push_back(json{
            {"id", vp.id},
            {"params", sim_params_to_json(vp.params)},
            {"u_ba_nominal", vp.u_ba_nominal},
            {"ISF", vp.ISF},
            {"ICR", vp.ICR},
            {"noise_seed", vp.noise_seed},
        });
    }
    json j{{"config_hash", hash}, {"seed", seed}, {"patients", patients}};
    write_file(path, j.dump(2) + "\n");
}

std::vector<trial::VirtualPatient> load_cohort(const std::string& path) {
    json j = json::parse(read_file(path));
    std::vector<trial::VirtualPatient> cohort;
    for (const json& jp : j.at("patients")) {
        trial::VirtualPatient vp;
        vp.id = jp.at("id");
        vp.params = sim_params_from_json(jp.at("params"));
        vp.u_ba_nominal = jp.at("u_ba_nominal");
        vp.ISF = jp.at("ISF");
        vp.ICR = jp.at("ICR");
        vp.noise_seed = jp.at("noise_seed");
        if (!vp.params.valid()) {
            throw ConfigError("cohort patient " + std::to_string(vp.id) + " has invalid parameters");
        }
        cohort.push_back(vp);
    }
    return cohort;
}

void save_estimation(const std::string& path, const EstimationResult& result,
                     const std::string& hash) {
    json x0 = json::array();
    for (int i = 0; i < ctrl::kStateDim; ++i) x0.push_back(result.x0[i]);
    json j{
        {"config_hash", hash},
        {"patient_id", result.patient_id},
        {"params", ctrl_params_to_json(result.params)},
        {"x0", x0},
        {"log_SI0", result.theta.log_SI0},
        {"nll", result.nll},
        {"evaluations", result.evaluations},
        {"converged", result.converged},
        {"data_span_min", result.data_span_min},
    };
    write_file(path, j.dump(2) + "\n");
}

EstimationResult load_estimation(const std::string& path) {
    json j = json::parse(read_file(path));
    EstimationResult r;
    r.patient_id = j.at("patient_id");
    r.params = ctrl_params_from_json(j.at("params"));
    const json& x0 = j.at("x0");
    for (int i = 0; i < ctrl::kStateDim; ++i) r.x0[i] = x0.at(i);
    r.theta.log_SI0 = j.at("log_SI0");
    r.theta.k_m = r.params.k_m;
    r.theta.tau_D = r.params.tau_D;
    r.theta.V_G = r.params.V_G;
    r.theta.EGP = r.params.EGP;
    r.theta.sigma_G = r.params.sigma_G;
    r.theta.sigma_SI = r.params.sigma_SI;
    r.theta.G0 = r.x0[ctrl::idx::G];
    r.theta.GI0 = r.x0[ctrl::idx::GI];
    r.nll = j.at("nll");
    r.evaluations = j.at("evaluations");
    r.converged = j.at("converged");
    r.data_span_min = j.at("data_span_min");
    return r;
}

void save_protocol(const std::string& path, const trial::Protocol& protocol) {
    json events = json::array();
    for (const trial::MealEvent& m : protocol.meals) {
        events.push_back(json{
            {"type", "meal"}, {"t_min", m.t}, {"grams", m.grams}, {"announced", m.announced}});
    }
    for (const trial::ExerciseEvent& e : protocol.exercise) {
        events.push_back(json{{"type", "exercise"},
                              {"t_start", e.t_start},
                              {"t_end", e.t_end},
                              {"hr_delta", e.hr_delta}});
    }
    json j{{"duration_min", protocol.duration}, {"events", events}};
    write_file(path, j.dump(2) + "\n");
}

trial::Protocol load_protocol(const std::string& path) {
    json j = json::parse(read_file(path));
    trial::Protocol p;
    p.duration = j.at("duration_min");
    for (const json& je : j.at("events")) {
        const std::string type = je.at("type");
        if (type == "meal") {
            trial::MealEvent m;
            m.t = je.at("t_min");
            m.grams = je.at("grams");
            m.announced = je.value("announced", true);
            p.meals.push_back(m);
        } else if (type == "exercise") {
            trial::ExerciseEvent e;
            e.t_start = je.at("t_start");
            e.t_end = je.at("t_end");
            e.hr_delta = je.value("hr_delta", 50.0);
            p.exercise.push_back(e);
        } else {
            throw ConfigError("protocol: unknown event type " + type);
        }
    }
    return p;
}

void save_id_dataset(const std::string& path, const IdDataset& data, const std::string& hash) {
    std::ostringstream out;
    out << "# config_hash=" << hash << "\n";
    out << "t_min,cgm_mmolL,uba_mUmin,ubo_mUmin,ug_ugmin,meal_g\n";
    const double ts = data.dt();
    for (std::size_t k = 0; k < data.y.size(); ++k) {
        const bool has_u = k < data.u.size();
        const ctrl::Inputs u = has_u ? data.u[k] : ctrl::Inputs{};
        const double meal_g = u.D * ts * 180.0 / 1000.0;
        out << format_double(data.t[k]) << ',' << format_double(data.y[k]) << ','
            << format_double(u.u_ba) << ',' << format_double(u.u_bo) << ','
            << format_double(u.u_G) << ',' << format_double(meal_g) << "\n";
    }
    write_file(path, out.str());
}

IdDataset load_id_dataset(const std::string& path) {
    std::istringstream in(read_file(path));
    IdDataset data;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        double vals[6];
        for (int i = 0; i < 6; ++i) {
            if (!std::getline(row, cell, ',')) throw ConfigError("dataset: short row in " + path);
            vals[i] = std::stod(cell);
        }
        data.t.push_back(vals[0]);
        data.y.push_back(vals[1]);
        ctrl::Inputs u;
        u.u_ba = vals[2];
        u.u_bo = vals[3];
        u.u_G = vals[4];
        u.D = vals[5];  // grams; converted to a pulse below, once dt is known
        data.u.push_back(u);
    }
    if (data.t.size() < 2) throw ConfigError("dataset: too few rows in " + path);
    const double ts = data.t[1] - data.t[0];
    data.u.pop_back();  // the final row carries no interval
    for (ctrl::Inputs& u : data.u) {
        u.D = u.D * (1000.0 / 180.0) / ts;
    }
    return data;
}

void save_trajectory(const std::string& path, const trial::TrialRecord& record,
                     const std::string& hash) {
    std::ostringstream out;
    out << "# config_hash=" << hash << "\n";
    out << "t_min,G,cgm,uba,ubo,ug,mode\n";
    for (const trial::IntervalLog& row : record.log) {
        out << format_double(row.t) << ',' << format_double(row.g_true) << ','
            << format_double(row.cgm) << ',' << format_double(row.u_ba) << ','
            << format_double(row.u_bo) << ',' << format_double(row.u_G) << ',' << row.mode
            << "\n";
    }
    write_file(path, out.str());
}

void save_summary(const std::string& path, const std::vector<trial::TrialRecord>& records,
                  const std::string& hash) {
    std::ostringstream out;
    out << "# config_hash=" << hash << "\n";
    out << "patient,tir_below_3,tir_3_3p9,tir_3p9_10,tir_10_13p9,tir_above_13p9,"
           "basal_U_day,bolus_U_day,glucagon_ug_day,valid\n";
    std::array<double, 5> mean_tir{};
    double mean_basal = 0.0, mean_bolus = 0.0, mean_glucagon = 0.0;
    for (const trial::TrialRecord& r : records) {
        out << r.patient_id;
        for (double b : r.tir) out << ',' << format_double(b);
        out << ',' << format_double(r.basal_U_day) << ',' << format_double(r.bolus_U_day) << ','
            << format_double(r.glucagon_ug_day) << ',' << (r.valid ? 1 : 0) << "\n";
        for (int i = 0; i < 5; ++i) mean_tir[i] += r.tir[i];
        mean_basal += r.basal_U_day;
        mean_bolus += r.bolus_U_day;
        mean_glucagon += r.glucagon_ug_day;
    }
    if (!records.empty()) {
        const double n = static_cast<double>(records.size());
        out << "mean";
        for (double b : mean_tir) out << ',' << format_double(b / n);
        out << ',' << format_double(mean_basal / n) << ',' << format_double(mean_bolus / n) << ','
            << format_double(mean_glucagon / n) << ",1\n";
    }
    write_file(path, out.str());
}

void save_manifest(const std::string& path, const RunConfig& cfg, const std::string& hash,
                   int n_patients) {
    json j{
        {"config_hash", hash},
        {"seed", cfg.seed},
        {"n_patients", n_patients},
        {"config", json::parse(canonical_config(cfg))},
    };
    write_file(path, j.dump(2) + "\n");
}

} // namespace dhap::io
