/// @file app.hpp
/// @brief Run configuration, presets and the command implementations behind
///        the speconet CLI (solve, train, infer, ensemble, convergence).
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "speconet/io.hpp"
#include "speconet/problems.hpp"
#include "speconet/trainer.hpp"

namespace speconet {

struct RunConfig {
  std::string preset = "custom";
  Family family = Family::Forcing2D;
  Boundary boundary = Boundary::Dirichlet;
  int modes = 16;
  bool dealias = false;
  SolverConfig solver;
  RandomInputSpec inputs;
  bool zero_inputs = false;  // all-zero data instead of random draws
  TrainConfig train;
  int threads = 0;  // 0 keeps the OpenMP default
  std::filesystem::path out = "out";
  std::filesystem::path checkpoint;  // infer/ensemble model, train resume
  bool resume = false;
  bool write_fields = true;
  bool reference = true;  // infer: compare against the classical solver

  std::string ensemble_source = "oracle";  // or "model"
  std::vector<int> ensemble_sizes{10, 20, 40, 80, 160};
  int ensemble_max = 1000;
  std::vector<int> histogram_sizes{100, 500, 1000};
  int histogram_bins = 20;
  int ensemble_component = 0;
  std::vector<int> timing_sizes{100, 1000};
  bool timing_oracle = true;  // model source: also time the classical solver

  std::vector<double> convergence_dts{0.04, 0.02, 0.01, 0.005};
  std::vector<int> convergence_modes{4, 6, 8, 12, 16};
  double convergence_time = 0.48;

  int dim() const;
};

std::vector<std::string> preset_names();
// Throws ConfigError for an unknown name.
RunConfig preset_config(const std::string& name);

// Reads every known key; unknown keys throw ConfigError naming the key.
void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv);
// Effective configuration as key=value pairs (round-trips through apply_config).
std::map<std::string, std::string> config_echo(const RunConfig& cfg);
void validate(const RunConfig& cfg);

std::shared_ptr<const Discretization> make_space(const RunConfig& cfg);
std::vector<InputSample> make_samples(const RunConfig& cfg, int count);
TrainProblem make_problem(const RunConfig& cfg, const std::vector<InputSample>& samples);

// Classical trajectories, parallel over samples.
std::vector<Trajectory> oracle_runs(const std::shared_ptr<const Discretization>& space, const SolverConfig& solver,
                                    const std::vector<InputSample>& samples, Exec e = Exec::Parallel);

// Errors over the recorded states after t = 0.
ErrorReport trajectory_errors(const Discretization& space, const Trajectory& pred, const Trajectory& ref);
ErrorReport exact_errors(const Discretization& space, const Trajectory& pred, const BeltramiParams& exact);

// Per-sample SPFD files plus a manifest, and an index manifest over samples.
void write_trajectories(const std::filesystem::path& dir, const Discretization& space,
                        const std::vector<Trajectory>& trajectories);

struct SolveOutput {
  std::vector<Trajectory> trajectories;
  std::vector<ErrorReport> errors;  // empty without an exact solution
};

struct InferOutput {
  std::vector<Trajectory> predicted;
  std::vector<ErrorReport> errors;  // empty when run.reference is false
  double wall_seconds = 0;
};

struct TimingRow {
  std::string source;
  int samples = 0;
  double wall_seconds = 0;
  double per_sample_seconds = 0;
};

struct EnsembleOutput {
  EnsembleReport report;
  std::vector<TimingRow> timing;
};

struct ConvergenceRow {
  std::string kind;  // "time" or "space"
  double dt = 0;
  int modes = 0;
  double error = 0;
  double order = 0;  // NaN for the first row of a sweep
};

SolveOutput cmd_solve(const RunConfig& cfg);
TrainResult cmd_train(const RunConfig& cfg);
InferOutput cmd_infer(const RunConfig& cfg);
EnsembleOutput cmd_ensemble(const RunConfig& cfg);
std::vector<ConvergenceRow> cmd_convergence(const RunConfig& cfg);

}  // namespace speconet
