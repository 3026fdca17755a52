#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhfedmtl/dataset.hpp"
#include "rhfedmtl/engine.hpp"
#include "rhfedmtl/planner.hpp"

namespace rhfedmtl {

enum class Algorithm { rhfedmtl, hfedmtl, fedavg };
const char* to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::rhfedmtl;
  SystemConfig system;
  ResourceCosts costs = ResourceCosts::single(0.1, 10.0, 1400.0);

  std::size_t num_tasks = 5;           // N
  std::size_t terminals_per_task = 5;  // N_b
  double test_fraction = 2.0 / 7.0;
  bool standardize = true;

  // Data source: CSV when csv_path is set, otherwise the synthetic generator.
  std::string csv_path;
  CsvOptions csv;
  std::size_t samples_per_task = 490;
  std::size_t dim = 10;
  double relatedness = 0.7;
  double noise = 0.05;

  std::uint64_t seed = 0;
  std::size_t fixed_h = 2;  // baselines
  double fedavg_lr = 0.1;
  bool replan = true;
  bool strict = false;  // infeasible plans are an error
  bool parallel = false;

  void validate() const;
  SynthOptions synth_options() const;
};

/// Unset keys keep the value already in `config`.
void merge_json(ExperimentConfig& config, const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

FederatedDataset load_dataset(const ExperimentConfig& config);

struct RunArtifact {
  ExperimentConfig config;
  RunTrace trace;
  std::vector<double> accuracy;
  double mean_accuracy = 0;
  std::uint64_t fingerprint = 0;
};

RunArtifact run_experiment(const ExperimentConfig& config);
RunArtifact run_experiment(const ExperimentConfig& config, const FederatedDataset& data);
/// Planner bypassed: H = fixed_h, K from the budget ratio.
RunArtifact baseline_hfedmtl(const ExperimentConfig& config, const FederatedDataset& data);
/// One shared model trained by local gradient steps and sample-weighted
/// averaging. Each round is charged like one sweep of BS iterations.
RunArtifact baseline_fedavg(const ExperimentConfig& config, const FederatedDataset& data);

/// Columns m,b,k,h,dual,primal,gap,accuracy,consumed_0..; NaN prints as an empty cell.
void write_metrics_csv(const RunArtifact& artifact, std::ostream& out);
nlohmann::json summary_json(const RunArtifact& artifact);
/// metrics.csv and summary.json under dir, each written to a temporary file
/// and renamed into place.
void write_artifact(const RunArtifact& artifact, const std::string& dir);
void write_file_atomic(const std::string& path, const std::string& contents);

struct PlanRow {
  std::size_t h = 0;
  std::vector<double> cost;  // f_j(h)
  double theta_max = 0;
  std::size_t k_bound = 0;
  bool feasible = false;
};

struct PlanReport {
  PlanningModel model;
  ResourcePlan plan;
  std::vector<PlanRow> table;  // h = 1..h_max
};

PlanReport plan_report(const ExperimentConfig& config, const FederatedDataset& data);
void write_plan_report(const PlanReport& report, std::ostream& out);

enum class SweepAxis { budget, terminals, tasks, c_dev, lambda1, lambda2 };
const char* to_string(SweepAxis axis);
SweepAxis parse_axis(const std::string& name);
void apply_axis(ExperimentConfig& config, SweepAxis axis, double value);

struct AxisValues {
  SweepAxis axis = SweepAxis::budget;
  std::vector<double> values;
};

struct SweepSpec {
  std::vector<AxisValues> axes;  // cartesian product, first axis outermost
  std::vector<Algorithm> algorithms{Algorithm::rhfedmtl};
  std::vector<std::uint64_t> seeds{0};
  bool parallel = false;
};

struct SweepRow {
  std::vector<double> point;  // one value per axis
  Algorithm algorithm = Algorithm::rhfedmtl;
  std::uint64_t seed = 0;
  double mean_accuracy = 0;
  std::vector<double> consumed;
  std::size_t h = 0;
  std::size_t k = 0;
  Regime regime = Regime::fixed;
  bool feasible = false;
  RunStatus status = RunStatus::iterations_complete;
  std::size_t sweeps = 0;
  double final_gap = 0;
};

std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepSpec& spec);
/// One row per run.
void write_sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows, std::ostream& out);
/// mean and sample standard deviation of accuracy over seeds per (point, algorithm).
void write_sweep_aggregate(const SweepSpec& spec, const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace rhfedmtl
