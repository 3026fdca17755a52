#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "rhfedmtl/dataset.hpp"
#include "rhfedmtl/objective.hpp"
#include "rhfedmtl/planner.hpp"

namespace rhfedmtl {

struct SystemConfig {
  double lambda1 = 1e-4;
  double lambda2 = 1e-6;
  double gamma = 1.0;
  double eps_d = 0.01;
  std::size_t server_iterations = 1;  // M
  EtaVariant eta_variant = EtaVariant::theorem;
  SigmaMode sigma_mode = SigmaMode::safe_bound;
  std::size_t k_cap = 100;  // K limit in the surplus regime

  void validate() const;
  ConvergenceTarget target() const { return {eps_d, server_iterations}; }
};

PlanningModel planning_model(const SystemConfig& config, const FederatedDataset& data);

struct FederationState {
  std::vector<TaskModel> models;
  RegulationParams regulation;  // anchor r is shared by all tasks
  DualState duals;
  std::size_t m = 0;
  std::vector<std::size_t> k;  // BS iterations done per task in server iteration m
  std::vector<double> consumed;
};

FederationState init(const SystemConfig& config, const FederatedDataset& data, const ResourceCosts& costs);

/// Metrics after one BS iteration of task b.
struct RoundReport {
  std::size_t m = 0;
  std::size_t b = 0;
  std::size_t k = 0;
  std::size_t h = 0;
  double dual = 0;
  double primal = 0;
  double gap = 0;
  double accuracy = 0;
  double mapping_error = 0;
  std::vector<double> consumed;
};

/// One BS iteration of task b: local rounds on every terminal, averaged dual
/// merge, model refresh from the duals and cost accounting.
///
/// The incrementally aggregated model is compared with the recovered one and
/// InvariantViolation is thrown when they differ by more than
/// kMappingTolerance.
RoundReport bs_iteration(FederationState& state, const FederatedDataset& data, std::size_t b, std::size_t h,
                         const SystemConfig& config, const ResourceCosts& costs, std::uint64_t root_seed,
                         bool parallel = false);

/// r <- mean of the task models, then every w_b is re-derived from its duals.
void server_update(FederationState& state, const FederatedDataset& data);

class ReportSink {
 public:
  virtual ~ReportSink() = default;
  virtual void on_round(const RoundReport& report) = 0;
};

using PlanFn = std::function<ResourcePlan(const ResourceCosts& remaining, const ConvergenceTarget& target,
                                          const PlanningModel& model)>;

PlanFn adaptive_planner(std::size_t k_cap);
PlanFn fixed_planner(std::size_t h);

enum class RunStatus { converged, budget_exhausted, iterations_complete };
const char* to_string(RunStatus status);

struct RunTrace {
  std::vector<RoundReport> rounds;  // ordered by (m, k, b)
  std::vector<double> gap_history;  // mean task gap after each sweep over all tasks
  std::vector<ResourcePlan> plans;  // one per server iteration started
  RunStatus status = RunStatus::iterations_complete;
  std::vector<double> accuracy;  // per task, final models
  std::vector<double> consumed;
  std::size_t sweeps = 0;
  FederationState state;
};

struct EngineOptions {
  std::uint64_t root_seed = 0;
  bool replan = true;
  bool parallel = false;
  PlanFn planner;  // empty: adaptive_planner(config.k_cap)
  ReportSink* sink = nullptr;
};

/// Runs until the mean gap reaches eps_d, the next sweep is unaffordable, or
/// M server iterations finish. A sweep (one BS iteration on every task) is
/// never split across the budget.
RunTrace run(const SystemConfig& config, const ResourceCosts& costs, const FederatedDataset& data,
             const EngineOptions& options = {});

/// Per-type cost of one sweep with the given per-task H.
std::vector<double> sweep_cost(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                               const FederatedDataset& data);

}  // namespace rhfedmtl
