#include "rhfedmtl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

#include "rhfedmtl/errors.hpp"
#include "rhfedmtl/terminal.hpp"

namespace rhfedmtl {

void SystemConfig::validate() const {
  if (!(lambda1 > 0) || !std::isfinite(lambda1)) throw std::invalid_argument("lambda1 must be > 0");
  if (!(lambda2 >= 0) || !std::isfinite(lambda2)) throw std::invalid_argument("lambda2 must be >= 0");
  if (!(gamma > 0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be > 0");
  if (!(eps_d > 0)) throw std::invalid_argument("eps_d must be > 0");
  if (server_iterations < 1) throw std::invalid_argument("server_iterations must be >= 1");
  if (k_cap < 1) throw std::invalid_argument("k_cap must be >= 1");
}

PlanningModel planning_model(const SystemConfig& config, const FederatedDataset& data) {
  PlanningModel model;
  model.tasks = task_stats(data);
  model.gamma = config.gamma;
  model.lambda1 = config.lambda1;
  model.lambda2 = config.lambda2;
  model.sigma = sigma_estimate(data, config.sigma_mode);
  model.eta_variant = config.eta_variant;
  return model;
}

FederationState init(const SystemConfig& config, const FederatedDataset& data, const ResourceCosts& costs) {
  config.validate();
  costs.validate();
  data.validate();
  FederationState state;
  state.regulation = RegulationParams{config.lambda1, config.lambda2, Vector::Zero(static_cast<Eigen::Index>(data.dim))};
  state.regulation.validate(data.dim);
  for (std::size_t b = 0; b < data.num_tasks(); ++b)
    state.models.push_back({Vector::Zero(static_cast<Eigen::Index>(data.dim)), b});
  state.duals = zero_duals(data);
  state.k.assign(data.num_tasks(), 0);
  state.consumed.assign(costs.types(), 0.0);
  return state;
}

RoundReport bs_iteration(FederationState& state, const FederatedDataset& data, std::size_t b, std::size_t h,
                         const SystemConfig& config, const ResourceCosts& costs, std::uint64_t root_seed,
                         bool parallel) {
  if (b >= data.num_tasks()) throw std::out_of_range("bs_iteration: task index out of range");
  const TaskData& task = data.tasks[b];
  TaskDual& alpha = state.duals.at(b);
  Vector& w = state.models.at(b).w;
  const SmoothedHinge<> loss(config.gamma);
  const std::size_t n_b = task.samples();
  const std::size_t terminals = task.terminals();

  const auto solve = [&](std::size_t t) {
    const std::uint64_t seed = stream_seed(root_seed, state.m, state.k[b], t);
    return local_round(task.shards[t], alpha.blocks[t], w, state.regulation, n_b, loss, h, seed);
  };
  std::vector<LocalUpdate> updates;
  updates.reserve(terminals);
  if (parallel && terminals > 1) {
    std::vector<std::future<LocalUpdate>> pending;
    for (std::size_t t = 0; t < terminals; ++t) pending.push_back(std::async(std::launch::async, solve, t));
    for (auto& p : pending) updates.push_back(p.get());
  } else {
    for (std::size_t t = 0; t < terminals; ++t) updates.push_back(solve(t));
  }

  const double share = 1.0 / static_cast<double>(terminals);
  Vector incremental = w;
  for (std::size_t t = 0; t < terminals; ++t) {
    alpha.blocks[t] += share * updates[t].delta_alpha;
    incremental += share * updates[t].delta_w;
  }
  w = recover_w(alpha, state.regulation, task);

  RoundReport report;
  report.mapping_error = mapping_error(incremental, alpha, state.regulation, task);
  if (!(report.mapping_error <= kMappingTolerance))
    throw InvariantViolation("bs_iteration: aggregated model drifted from the dual image (task " + std::to_string(b) +
                             ", error " + std::to_string(report.mapping_error) + ")");

  for (std::size_t j = 0; j < costs.types(); ++j)
    state.consumed[j] +=
        costs.base_station[j] + static_cast<double>(terminals) * static_cast<double>(h) * costs.device[j];

  report.m = state.m;
  report.b = b;
  report.k = state.k[b];
  report.h = h;
  report.dual = task_dual(alpha, state.regulation, task, loss);
  report.primal = task_primal(w, state.regulation, task, loss);
  report.gap = task_duality_gap(w, alpha, state.regulation, task, loss);
  report.accuracy = test_accuracy(w, task);
  report.consumed = state.consumed;
  ++state.k[b];
  return report;
}

void server_update(FederationState& state, const FederatedDataset& data) {
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(data.dim));
  for (const auto& model : state.models) mean += model.w;
  state.regulation.anchor = mean / static_cast<double>(state.models.size());
  for (std::size_t b = 0; b < state.models.size(); ++b)
    state.models[b].w = recover_w(state.duals[b], state.regulation, data.tasks[b]);
  ++state.m;
  std::fill(state.k.begin(), state.k.end(), 0);
}

PlanFn adaptive_planner(std::size_t k_cap) {
  return [k_cap](const ResourceCosts& remaining, const ConvergenceTarget& target, const PlanningModel& model) {
    return select_plan(remaining, target, model, model.h_max(), k_cap);
  };
}

PlanFn fixed_planner(std::size_t h) {
  return [h](const ResourceCosts& remaining, const ConvergenceTarget& target, const PlanningModel& model) {
    return fixed_plan(h, remaining, target, model);
  };
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::converged: return "converged";
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::iterations_complete: return "iterations_complete";
  }
  return "unknown";
}

std::vector<double> sweep_cost(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                               const FederatedDataset& data) {
  if (h_per_task.size() != data.num_tasks()) throw DimensionMismatch("sweep_cost: one H per task");
  std::vector<double> cost(costs.types(), 0.0);
  for (std::size_t j = 0; j < costs.types(); ++j)
    for (std::size_t b = 0; b < data.num_tasks(); ++b)
      cost[j] += costs.base_station[j] + static_cast<double>(data.tasks[b].terminals()) *
                                             static_cast<double>(h_per_task[b]) * costs.device[j];
  return cost;
}

namespace {

bool affordable(const std::vector<double>& consumed, const std::vector<double>& cost, const ResourceCosts& costs) {
  for (std::size_t j = 0; j < costs.types(); ++j) {
    const double budget = costs.budget[j];
    if (consumed[j] + cost[j] > budget + 1e-9 * std::max(1.0, budget)) return false;
  }
  return true;
}

ResourceCosts remaining_costs(const ResourceCosts& costs, const std::vector<double>& consumed) {
  ResourceCosts out = costs;
  for (std::size_t j = 0; j < costs.types(); ++j) out.budget[j] = std::max(0.0, costs.budget[j] - consumed[j]);
  return out;
}

}  // namespace

RunTrace run(const SystemConfig& config, const ResourceCosts& costs, const FederatedDataset& data,
             const EngineOptions& options) {
  RunTrace trace;
  trace.state = init(config, data, costs);
  FederationState& state = trace.state;
  const PlanFn planner = options.planner ? options.planner : adaptive_planner(config.k_cap);
  const PlanningModel model = planning_model(config, data);

  bool stopped = false;
  for (std::size_t m = 0; m < config.server_iterations && !stopped; ++m) {
    if (m == 0 || options.replan) {
      ConvergenceTarget target = config.target();
      target.server_iterations = config.server_iterations - m;
      trace.plans.push_back(planner(remaining_costs(costs, state.consumed), target, model));
    } else {
      trace.plans.push_back(trace.plans.back());
    }
    const ResourcePlan& plan = trace.plans.back();
    const std::vector<double> cost = sweep_cost(plan.h_per_task, costs, data);

    for (std::size_t k = 0; k < plan.k; ++k) {
      if (!affordable(state.consumed, cost, costs)) {
        trace.status = RunStatus::budget_exhausted;
        stopped = true;
        break;
      }
      double gap = 0;
      for (std::size_t b = 0; b < data.num_tasks(); ++b) {
        RoundReport report = bs_iteration(state, data, b, plan.h_per_task[b], config, costs, options.root_seed,
                                          options.parallel);
        gap += report.gap;
        if (options.sink) options.sink->on_round(report);
        trace.rounds.push_back(std::move(report));
      }
      ++trace.sweeps;
      gap /= static_cast<double>(data.num_tasks());
      trace.gap_history.push_back(gap);
      if (gap <= config.eps_d) {
        trace.status = RunStatus::converged;
        stopped = true;
        break;
      }
    }
    if (!stopped && m + 1 < config.server_iterations) server_update(state, data);
  }

  for (std::size_t b = 0; b < data.num_tasks(); ++b) trace.accuracy.push_back(test_accuracy(state.models[b].w, data.tasks[b]));
  trace.consumed = state.consumed;
  return trace;
}

}  // namespace rhfedmtl
