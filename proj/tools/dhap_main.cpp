#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dhap/errors.hpp"
#include "dhap/io/config.hpp"
#include "dhap/util/parallel.hpp"

namespace {

using namespace dhap;

std::string patient_file(const std::string& dir, int id, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "patient_%03d%s", id, ext);
    return (std::filesystem::path(dir) / buf).string();
}

io::RunConfig make_config(const std::string& config_path, std::uint64_t seed, int workers) {
    std::string path = config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("DHAP_CONFIG")) path = env;
    }
    io::RunConfig cfg = io::load_run_config(path);
    cfg.seed = seed;
    if (workers > 0) cfg.workers = workers;
    if (cfg.workers <= 0) cfg.workers = default_workers();
    cfg.loop.master_seed = cfg.seed;
    return cfg;
}

int cmd_cohort(int n, const io::RunConfig& cfg, const std::string& out) {
    if (n < 1) {
        std::fprintf(stderr, "cohort: --n must be at least 1\n");
        return 2;
    }
    const auto cohort = trial::generate_cohort(n, cfg.seed, cfg.cohort);
    io::save_cohort(out, cohort, cfg.seed, io::config_hash(cfg));
    std::printf("cohort: wrote %d patients to %s\n", n, out.c_str());
    return 0;
}

EstimationResult identify_one(const trial::VirtualPatient& patient, const IdDataset& data,
                              const io::RunConfig& cfg) {
    ctrl::Params fixed = ctrl::nominal_params();
    IdentifiedSubset init = default_init(data, fixed);
    EstimateOptions opts = cfg.estimate;
    opts.seed = derive_seed(cfg.seed, 0xe57ull, static_cast<std::uint64_t>(patient.id));
    opts.filter = cfg.loop.filter;
    return estimate(data, fixed, init, opts);
}

int cmd_identify(const std::string& cohort_path, const std::string& data_path, bool generate,
                 int patient_id, bool all, const io::RunConfig& cfg, const std::string& out_dir,
                 const std::string& save_data_dir) {
    const auto cohort = io::load_cohort(cohort_path);
    std::vector<int> ids;
    if (all) {
        for (const auto& p : cohort) ids.push_back(p.id);
    } else {
        ids.push_back(patient_id);
    }

    std::mutex log_mutex;
    std::vector<std::string> failures;
    parallel_for(static_cast<int>(ids.size()), cfg.workers, [&](int i) {
        const int id = ids[i];
        const auto it = std::find_if(cohort.begin(), cohort.end(),
                                     [&](const auto& p) { return p.id == id; });
        if (it == cohort.end()) {
            std::lock_guard<std::mutex> lock(log_mutex);
            failures.push_back("patient " + std::to_string(id) + ": not in cohort");
            return;
        }
        try {
            IdDataset data;
            if (generate) {
                data = trial::generate_id_dataset(
                    *it, derive_seed(cfg.seed, 0x1dull, static_cast<std::uint64_t>(id)),
                    cfg.id_duration_min, cfg.loop.Ts, cfg.loop.plant.h);
                data.patient_id = "patient-" + std::to_string(id);
                if (!save_data_dir.empty()) {
                    io::save_id_dataset(patient_file(save_data_dir, id, ".csv"), data,
                                        io::config_hash(cfg));
                }
            } else {
                data = io::load_id_dataset(data_path);
                data.patient_id = "patient-" + std::to_string(id);
            }
            EstimationResult result = identify_one(*it, data, cfg);
            io::save_estimation(patient_file(out_dir, id, ".json"), result, io::config_hash(cfg));
            std::lock_guard<std::mutex> lock(log_mutex);
            std::printf("identify: patient %d nll=%.4f evals=%d converged=%d\n", id, result.nll,
                        result.evaluations, result.converged ? 1 : 0);
            if (!result.converged) {
                failures.push_back("patient " + std::to_string(id) + ": identify non-converged");
            }
        } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(log_mutex);
            failures.push_back("patient " + std::to_string(id) + ": identify failed: " + ex.what());
        }
    });

    for (const std::string& f : failures) std::fprintf(stderr, "%s\n", f.c_str());
    return failures.empty() ? 0 : 1;
}

int cmd_trial(const std::string& cohort_path, const std::string& params_dir,
              const std::string& protocol_path, const io::RunConfig& cfg,
              const std::string& out_dir, int max_patients) {
    auto cohort = io::load_cohort(cohort_path);
    if (max_patients > 0 && static_cast<int>(cohort.size()) > max_patients) {
        cohort.resize(max_patients);
    }
    const trial::Protocol protocol =
        protocol_path.empty() ? trial::default_protocol() : io::load_protocol(protocol_path);
    const std::string extra =
        (protocol_path.empty() ? std::string() : io::read_file(protocol_path)) +
        io::read_file(cohort_path);
    const std::string hash = io::config_hash(cfg, extra);

    std::vector<trial::TrialRecord> records(cohort.size());
    std::mutex log_mutex;
    std::vector<std::string> failures;
    parallel_for(static_cast<int>(cohort.size()), cfg.workers, [&](int i) {
        const trial::VirtualPatient& patient = cohort[i];
        try {
            EstimationResult est = io::load_estimation(patient_file(params_dir, patient.id, ".json"));
            trial::LoopConfig loop = cfg.loop;
            loop.master_seed = cfg.seed;
            records[i] = trial::run_closed_loop(patient, est.params, est.theta.log_SI0, protocol,
                                                loop);
            io::save_trajectory(patient_file(out_dir, patient.id, ".csv"), records[i], hash);
            if (!records[i].valid) {
                std::lock_guard<std::mutex> lock(log_mutex);
                failures.push_back("patient " + std::to_string(patient.id) + ": trial aborted");
            }
        } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(log_mutex);
            failures.push_back("patient " + std::to_string(patient.id) +
                               ": trial failed: " + ex.what());
            records[i].patient_id = patient.id;
            records[i].valid = false;
        }
    });

    // Records are already ordered by cohort position (sorted by id on save).
    io::save_summary((std::filesystem::path(out_dir) / "summary.csv").string(), records, hash);
    io::save_manifest((std::filesystem::path(out_dir) / "manifest.json").string(), cfg, hash,
                      static_cast<int>(records.size()));
    for (const std::string& f : failures) std::fprintf(stderr, "%s\n", f.c_str());
    std::printf("trial: wrote %zu trajectories and summary to %s\n", records.size(),
                out_dir.c_str());
    return failures.empty() ? 0 : 1;
}

int cmd_report(const std::string& summary_path) {
    const std::string content = io::read_file(summary_path);
    std::istringstream in(content);
    std::string line;
    std::vector<std::array<double, 9>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("patient,", 0) == 0) continue;
        if (line.rfind("mean,", 0) == 0) continue;
        std::istringstream row(line);
        std::string cell;
        std::array<double, 9> vals{};
        int col = 0;
        while (std::getline(row, cell, ',') && col < 10) {
            if (col > 0 && col < 10) vals[col - 1] = std::stod(cell);
            ++col;
        }
        rows.push_back(vals);
    }
    if (rows.empty()) {
        std::fprintf(stderr, "report: no patient rows in %s\n", summary_path.c_str());
        return 1;
    }
    double mean_normo = 0.0, min_normo = 1e9, below_39 = 0.0;
    double mean_basal = 0.0, mean_bolus = 0.0, mean_glucagon = 0.0;
    for (const auto& r : rows) {
        const double normo = r[2];
        mean_normo += normo;
        min_normo = std::min(min_normo, normo);
        below_39 += r[0] + r[1];
        mean_basal += r[5];
        mean_bolus += r[6];
        mean_glucagon += r[7];
    }
    const double n = static_cast<double>(rows.size());
    std::printf("metric,value\n");
    std::printf("patients,%d\n", static_cast<int>(rows.size()));
    std::printf("mean_tir_normo_pct,%.4f\n", mean_normo / n);
    std::printf("min_tir_normo_pct,%.4f\n", min_normo);
    std::printf("mean_pct_below_3p9,%.6f\n", below_39 / n);
    std::printf("mean_basal_U_day,%.4f\n", mean_basal / n);
    std::printf("mean_bolus_U_day,%.4f\n", mean_bolus / n);
    std::printf("mean_glucagon_ug_day,%.4f\n", mean_glucagon / n);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-hormone artificial pancreas toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 1;
    int workers = 0;
    app.add_option("--config", config_path, "JSON config file (env DHAP_CONFIG)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--workers", workers, "worker threads (default: all cores)");

    // cohort
    auto* cohort_cmd = app.add_subcommand("cohort", "generate a virtual cohort");
    cohort_cmd->fallthrough();
    int cohort_n = 50;
    std::string cohort_out = "cohort.json";
    cohort_cmd->add_option("--n", cohort_n, "number of patients");
    cohort_cmd->add_option("--out", cohort_out, "output cohort file");

    // identify
    auto* id_cmd = app.add_subcommand("identify", "estimate control-model parameters");
    id_cmd->fallthrough();
    std::string id_cohort, id_data, id_out = "params", id_save_data;
    int id_patient = 0;
    bool id_all = false, id_generate = false;
    id_cmd->add_option("--cohort", id_cohort, "cohort file")->required();
    id_cmd->add_option("--data", id_data, "identification dataset CSV");
    id_cmd->add_flag("--generate", id_generate, "generate the identification experiment");
    id_cmd->add_option("--patient", id_patient, "patient id");
    id_cmd->add_flag("--all", id_all, "identify every patient in the cohort");
    id_cmd->add_option("--out", id_out, "output directory for parameter files");
    id_cmd->add_option("--save-data", id_save_data, "also write generated datasets here");

    // trial
    auto* trial_cmd = app.add_subcommand("trial", "run the virtual clinical trial");
    trial_cmd->fallthrough();
    std::string tr_cohort, tr_params = "params", tr_protocol, tr_out = "trial_out";
    int tr_patients = 0;
    trial_cmd->add_option("--cohort", tr_cohort, "cohort file")->required();
    trial_cmd->add_option("--params-dir", tr_params, "identified-parameter directory");
    trial_cmd->add_option("--protocol", tr_protocol, "protocol file (default: built-in)");
    trial_cmd->add_option("--out", tr_out, "output directory");
    trial_cmd->add_option("--patients", tr_patients, "run only the first N patients");

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate a trial summary");
    report_cmd->fallthrough();
    std::string rep_summary;
    report_cmd->add_option("--summary", rep_summary, "summary.csv from a trial run")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const io::RunConfig cfg = make_config(config_path, seed, workers);
        if (cohort_cmd->parsed()) return cmd_cohort(cohort_n, cfg, cohort_out);
        if (id_cmd->parsed()) {
            if (!id_generate && id_data.empty()) {
                std::fprintf(stderr, "identify: need --data or --generate\n");
                return 2;
            }
            return cmd_identify(id_cohort, id_data, id_generate, id_patient, id_all, cfg, id_out,
                                id_save_data);
        }
        if (trial_cmd->parsed()) {
            return cmd_trial(tr_cohort, tr_params, tr_protocol, cfg, tr_out, tr_patients);
        }
        if (report_cmd->parsed()) return cmd_report(rep_summary);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
