#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dhap/estimation/mle.hpp"
#include "dhap/trial/closed_loop.hpp"
#include "dhap/trial/cohort.hpp"
#include "dhap/trial/protocol.hpp"

namespace dhap::io {

/// Pipeline-wide options; everything here feeds the provenance hash.
struct RunConfig {
    std::uint64_t seed = 1;
    int workers = 0;  ///< 0 means hardware concurrency
    trial::LoopConfig loop;
    trial::CohortOptions cohort;
    double id_duration_min = 2160.0;
    EstimateOptions estimate;
};

/// FNV-1a 64-bit over a byte string, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);

/// Canonical serialization of the run configuration (sorted keys).
std::string canonical_config(const RunConfig& cfg);

/// Hash of the effective configuration plus any consumed input content.
std::string config_hash(const RunConfig& cfg, const std::string& extra_content = "");

/// Applies overrides found in a JSON config file onto defaults; unknown keys
/// are rejected. Missing path returns defaults untouched.
RunConfig load_run_config(const std::string& path, RunConfig defaults = {});

// --- cohort files ---------------------------------------------------------
void save_cohort(const std::string& path, const std::vector<trial::VirtualPatient>& cohort,
                 std::uint64_t seed, const std::string& hash);
std::vector<trial::VirtualPatient> load_cohort(const std::string& path);

// --- identified-parameter files -------------------------------------------
void save_estimation(const std::string& path, const EstimationResult& result,
                     const std::string& hash);
EstimationResult load_estimation(const std::string& path);

// --- protocol files --------------------------------------------------------
void save_protocol(const std::string& path, const trial::Protocol& protocol);
trial::Protocol load_protocol(const std::string& path);

// --- identification datasets (CSV) ------------------------------------------
// Columns: t_min, cgm_mmolL, uba_mUmin, ubo_mUmin, ug_ugmin, meal_g.
void save_id_dataset(const std::string& path, const IdDataset& data, const std::string& hash);
IdDataset load_id_dataset(const std::string& path);

// --- trial outputs (CSV) -----------------------------------------------------
void save_trajectory(const std::string& path, const trial::TrialRecord& record,
                     const std::string& hash);
void save_summary(const std::string& path, const std::vector<trial::TrialRecord>& records,
                  const std::string& hash);
void save_manifest(const std::string& path, const RunConfig& cfg, const std::string& hash,
                   int n_patients);

/// Stable float formatting shared by every writer.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace dhap::io
