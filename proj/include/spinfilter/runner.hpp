#pragma once

// CLI-level orchestration: configuration parsing, scenario execution with a
// deterministic work queue, and CSV/JSON result emission.  Worker count never
// affects results; trajectory i at F-index j always uses
// seed_for(base_seed, j, i) = base_seed + j*10^6 + i.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spinfilter/estimators.hpp"
#include "spinfilter/fisher.hpp"

namespace spinfilter {

enum class Scenario { qcr_sweep, pf_sweep, kalman, qfunction, trajectory };

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario s);

enum class OutputFormat { csv, json };

struct ExperimentConfig {
  Scenario scenario = Scenario::trajectory;
  std::vector<double> F_list = {10};
  double M = 10.0;
  double K = 0.0;
  double B = 0.0;
  double gamma = 1.0;
  double dt = 1e-5;
  double t_final = 0.1;
  double deltaB = 5e-4;
  int n_trajectories = 20;
  int n_particles = 200;
  double prior_mean = 0.0;
  double prior_var = 10.0;
  std::uint64_t base_seed = 0;
  int workers = 0;  // 0: SPINFILTER_WORKERS env var, else 1
  std::string output_path = "result.csv";
  OutputFormat output_format = OutputFormat::csv;
  // qfunction scenario
  int q_n_theta = 100;
  int q_n_phi = 200;
  // trace stride for trajectory/kalman/pf traces (steps between samples)
  std::size_t trace_stride = 100;

  void validate() const;
  ModelParams model_params(double F) const;
  int effective_workers() const;
};

// Flat key=value file, '#' comments; unknown keys and malformed values are
// reported with their line number.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin = "<config>");

struct CliOverrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> format;
};
void apply_overrides(ExperimentConfig& cfg, const CliOverrides& cli);

// Population standard deviation of (estimate - trueB) across runs.
double sample_deviation(const std::vector<double>& estimates, double trueB);

// Deterministic parallel map: results are produced in index order regardless
// of worker count.
void parallel_for_indexed(std::size_t n_jobs, int workers,
                          const std::function<void(std::size_t)>& fn);

struct PfPointResult {
  double F = 0;
  std::vector<int> trajectories;  // original trajectory indices
  std::vector<std::uint64_t> seeds;
  std::vector<double> b_estimates;
  std::vector<double> b_uncertainties;
  std::vector<double> n_eff_fractions;
  std::vector<long> clip_counts;
  double mean_uncertainty = 0;
  double s_pf = 0;  // sample estimator deviation
  double mean_n_eff_fraction = 0;
};

struct PfSweepResult {
  std::vector<PfPointResult> points;
  std::optional<PowerLawFit> fit;  // of mean_uncertainty vs F
  std::vector<SweepFailure> failures;
};

struct QcrResult {
  BoundSweepResult sweep;
  std::optional<PowerLawFit> fit;
};

struct RunResult {
  Scenario scenario;
  std::vector<std::string> files_written;
  std::string summary_json;
  // populated per scenario
  std::optional<QcrResult> qcr;
  std::optional<PfSweepResult> pf;
};

QcrResult run_qcr_sweep(const ExperimentConfig& cfg);
PfSweepResult run_pf_sweep(const ExperimentConfig& cfg);

// Executes the configured scenario, writes the result file(s) plus a
// "<output_path>.summary.json" summary, and returns the in-memory results.
RunResult run(const ExperimentConfig& cfg);

}  // namespace spinfilter
