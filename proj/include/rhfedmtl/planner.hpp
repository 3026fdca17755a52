#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rhfedmtl/dataset.hpp"

namespace rhfedmtl {

/// Per-type resource prices and totals. Index j runs over resource types.
struct ResourceCosts {
  std::vector<double> device;        // cost of one terminal iteration
  std::vector<double> base_station;  // cost of one BS iteration
  std::vector<double> budget;        // total allowance; +inf means unbounded

  static ResourceCosts single(double device, double base_station, double budget);
  std::size_t types() const { return budget.size(); }
  void validate() const;
};

struct ConvergenceTarget {
  double eps_d = 0.01;
  std::size_t server_iterations = 1;  // M
};

struct TaskStats {
  std::size_t samples = 0;        // n_b
  std::size_t largest_shard = 0;  // ñ_b
  std::size_t terminals = 0;      // N_b
};

std::vector<TaskStats> task_stats(const FederatedDataset& data);

enum class EtaVariant { theorem, proof };
enum class SigmaMode { safe_bound, brute_force };

/// Contraction of the local duality gap after h terminal iterations:
///   (1 - s / (1 + s) / ñ_b)^h,  s = (lambda1 + lambda2) n_b gamma.
double theta(std::size_t h, std::size_t task_samples, std::size_t largest_shard, double gamma, double lambda1,
             double lambda2);

/// n_b^2 * max over alpha of (sum_t ||A_[t] alpha_[t]||^2 - ||A_b alpha_b||^2) / ||alpha_b||^2.
///
/// The safe bound drops the (non-positive) coupling term and bounds each
/// block by its operator norm, giving max_t ||X_t||_2^2. A single terminal
/// has no cross-block terms and yields exactly 0.
double sigma_safe_bound(const TaskData& task);
/// Largest eigenvalue of the block quadratic form by shifted power iteration.
/// Limited to n_b <= 64.
double sigma_brute_force(const TaskData& task);
inline constexpr std::size_t kSigmaBruteForceLimit = 64;

double sigma_estimate(const FederatedDataset& data, SigmaMode mode = SigmaMode::safe_bound);

/// Theorem form: (l1+l2) gamma / (n_b sigma + (l1+l2) gamma).
/// Proof form:   (l1+l2) gamma / (sigma + (l1+l2) gamma).
double eta(std::size_t task_samples, double sigma, double gamma, double lambda1, double lambda2,
           EtaVariant variant = EtaVariant::theorem);

/// Smallest integer K with K > (1 - (1 - theta) eta / T) ln(sum n_b / (N eps)).
std::size_t k_bound(double theta_max, double eta_star, std::size_t t_star, std::span<const std::size_t> task_samples,
                    std::size_t num_tasks, double eps_d);

/// Everything the closed-form planning math needs to know about a system.
struct PlanningModel {
  std::vector<TaskStats> tasks;
  double gamma = 1.0;
  double lambda1 = 1e-4;
  double lambda2 = 1e-6;
  double sigma = 0.0;
  EtaVariant eta_variant = EtaVariant::theorem;

  double task_theta(std::size_t b, std::size_t h) const;
  double theta_max(std::size_t h) const;
  double eta_star() const;
  std::size_t t_star() const;
  /// ln(sum n_b / (N eps)), floored at 0.
  double log_term(double eps_d) const;
  std::size_t k_bound(std::size_t h, double eps_d) const;
  /// Largest H the planner scans: the smallest per-task largest shard.
  std::size_t h_max() const;
};

/// Projected type-j cost to reach eps_d with per-task iterations h:
///   M sum_b (C_BS + N_b H_b C_dev) (1 - eta*/T* [1 - (1 - kappa_b)^{min H}]) ln(...)
double projected_cost(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                      const ConvergenceTarget& target, const PlanningModel& model, std::size_t j);
/// projected_cost with H_b = h for every task.
double cost_f(std::size_t h, const ResourceCosts& costs, const ConvergenceTarget& target,
              const PlanningModel& model, std::size_t j);

struct Feasibility {
  bool feasible = false;
  std::optional<std::size_t> binding;  // first violated resource type
};

Feasibility feasible(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                     const ConvergenceTarget& target, const PlanningModel& model);

/// floor(min_j C_bud / (M sum_b (C_BS + N_b H_b C_dev))); may be 0 or +inf.
double budget_rounds(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                     const ConvergenceTarget& target, const PlanningModel& model);
/// budget_rounds clamped to [1, SIZE_MAX].
std::size_t k_from_budget(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                          const ConvergenceTarget& target, const PlanningModel& model);

enum class Regime { fixed = 0, starved = 1, balanced = 2, surplus = 3 };

struct ResourcePlan {
  std::vector<std::size_t> h_per_task;
  std::size_t k = 1;
  std::vector<double> projected_cost;
  bool feasible = false;
  std::optional<std::size_t> binding;
  Regime regime = Regime::fixed;
  std::size_t k_bound = 1;
  double k_budget = 0;  // budget_rounds at the chosen H
};

/// Chooses H and K for the given budget.
///   starved  (no H is feasible): H = argmin f, K from the budget ratio.
///   balanced (f crosses the budget): H = largest h with h feasible and
///            h + 1 not, K = the convergence bound (never above the budget ratio).
///   surplus  (every H up to h_max + 1 feasible): smallest feasible H,
///            K = min(budget ratio, k_cap).
ResourcePlan select_plan(const ResourceCosts& costs, const ConvergenceTarget& target, const PlanningModel& model,
                         std::size_t h_max, std::size_t k_cap);

/// Planner bypass: H fixed, K from the budget ratio.
ResourcePlan fixed_plan(std::size_t h, const ResourceCosts& costs, const ConvergenceTarget& target,
                        const PlanningModel& model);

const char* to_string(Regime regime);

}  // namespace rhfedmtl
