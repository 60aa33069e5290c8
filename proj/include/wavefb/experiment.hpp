#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "wavefb/analysis.hpp"

namespace wavefb {

/// Fully parsed run configuration. `raw` keeps the original JSON for
/// hashing and for embedding in the run manifest.
struct ExperimentConfig {
  nlohmann::json raw;

  // mesh
  std::string mesh_type;          // "unit_square" | "annulus"
  int square_n = 16;
  double r_inner = 0.5, r_outer = 1.0, resolution = 0.05;
  std::string partition = "mesh_default";  // | "gamma0_all" | "gamma1_all"

  std::array<double, 2> x0{0.0, 0.0};
  nlohmann::json nonlinearity;    // forwarded to nonlinearity_from_json
  nlohmann::json initial_data;    // preset parameters, see build_initial_data
  std::optional<double> normalize_energy;

  double dt = 0.01;
  double t_end = 1.0;
  SolverConfig solver;            // lambda is derived as 1/dt
  int snapshot_every = 5;
  double r = 2.0;
  std::string scheme = "implicit_euler";  // | "midpoint"
};

ExperimentConfig config_from_json(const nlohmann::json& j);

/// FNV-1a over the canonical (key-sorted) serialization; stable under
/// field reordering in the source file.
std::string config_hash(const nlohmann::json& config);

Mesh build_mesh(const ExperimentConfig& cfg);

State build_initial_data(const ExperimentConfig& cfg, const DiscreteOperators& ops,
                         const BoundaryFeedback& fb);

struct RunResult {
  Trace trace;
  bool failed = false;
  std::string error;
  double final_energy = 0.0;
};

/// Report of the configuration validators (geometry + feedback map).
struct ValidationReport {
  bool passed = true;
  std::vector<std::string> messages;
};
ValidationReport validate_config(const ExperimentConfig& cfg);

/// Runs the simulation and writes trace.csv, snapshots/, manifest.json
/// and checkpoint.json into out_dir. On solver failure the partial
/// outputs are kept and the manifest flags the failure.
RunResult run_simulation(const ExperimentConfig& cfg,
                         const std::filesystem::path& out_dir);

struct AnalysisOptions {
  std::optional<double> r;                      // overrides the config r
  std::optional<std::array<double, 2>> window;  // fit window, default data-driven
  std::optional<std::array<double, 2>> tau;     // multiplier interval
  bool svg = false;
};

/// Post-processes a completed run directory; writes analysis.json,
/// bound_monitor.csv and (optionally) energy.svg. Returns 0 on success,
/// 1 if the run directory is incomplete or flagged failed.
int run_analysis(const std::filesystem::path& run_dir, const AnalysisOptions& opts);

/// Sweep config: {"base": <config>, "overrides": [<merge patch>, ...]}.
/// Runs each merged config in its own subdirectory (up to `jobs`
/// concurrently) and writes summary.csv. Returns 0 iff every run and its
/// analysis succeeded.
int run_sweep(const nlohmann::json& sweep, const std::filesystem::path& out_dir,
              int jobs);

/// Reloads a run written by run_simulation (trace.csv + snapshots).
std::pair<ExperimentConfig, Trace> load_run(const std::filesystem::path& run_dir);

/// Final-state checkpoint helpers.
void write_checkpoint(const std::filesystem::path& path, double t, const State& s,
                      const std::string& hash);
std::pair<double, State> read_checkpoint(const std::filesystem::path& path,
                                         const std::string& expected_hash);

/// Formats a double with 17 significant digits (round-trip safe).
std::string format_full(double x);

/// Minimal standalone log-log SVG line chart of E(t).
void write_energy_svg(const std::filesystem::path& path,
                      const std::vector<double>& times,
                      const std::vector<double>& energies);

}  // namespace wavefb
