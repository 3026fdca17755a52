#include "rhfedmtl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "rhfedmtl/errors.hpp"

namespace rhfedmtl {

ResourceCosts ResourceCosts::single(double device, double base_station, double budget) {
  return ResourceCosts{{device}, {base_station}, {budget}};
}

void ResourceCosts::validate() const {
  if (budget.empty()) throw std::invalid_argument("resource costs: at least one resource type required");
  if (device.size() != budget.size() || base_station.size() != budget.size())
    throw DimensionMismatch("resource costs: device, base_station and budget must have one entry per type");
  for (std::size_t j = 0; j < budget.size(); ++j)
    if (!(device[j] >= 0) || !(base_station[j] >= 0) || !(budget[j] >= 0) || std::isnan(budget[j]) ||
        !std::isfinite(device[j]) || !std::isfinite(base_station[j]))
      throw std::invalid_argument("resource costs: type " + std::to_string(j) + " has a negative or non-finite entry");
}

std::vector<TaskStats> task_stats(const FederatedDataset& data) {
  std::vector<TaskStats> out;
  out.reserve(data.tasks.size());
  for (const auto& task : data.tasks) out.push_back({task.samples(), task.largest_shard(), task.terminals()});
  return out;
}

double theta(std::size_t h, std::size_t task_samples, std::size_t largest_shard, double gamma, double lambda1,
             double lambda2) {
  if (largest_shard == 0) throw std::invalid_argument("theta: largest shard must be >= 1");
  const double s = (lambda1 + lambda2) * static_cast<double>(task_samples) * gamma;
  const double kappa = s / (1.0 + s) / static_cast<double>(largest_shard);
  return std::pow(1.0 - kappa, static_cast<double>(h));
}

namespace {

// Rows y_i x_i of a task, stacked terminal by terminal.
Matrix folded_rows(const TaskData& task) {
  const auto d = static_cast<Eigen::Index>(task.shards.front().dim());
  Matrix z(static_cast<Eigen::Index>(task.samples()), d);
  Eigen::Index row = 0;
  for (const auto& s : task.shards) {
    const auto len = static_cast<Eigen::Index>(s.size());
    z.middleRows(row, len) = s.labels().asDiagonal() * s.features();
    row += len;
  }
  return z;
}

double largest_gram_eigenvalue(const Matrix& x) {
  Eigen::MatrixXd gram = x.rows() <= x.cols() ? Eigen::MatrixXd(x * x.transpose())
                                              : Eigen::MatrixXd(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

}  // namespace

double sigma_safe_bound(const TaskData& task) {
  if (task.shards.size() <= 1) return 0.0;
  double bound = 0.0;
  for (const auto& s : task.shards) bound = std::max(bound, largest_gram_eigenvalue(s.features()));
  return bound;
}

double sigma_brute_force(const TaskData& task) {
  const std::size_t n = task.samples();
  if (n > kSigmaBruteForceLimit)
    throw std::invalid_argument("sigma_brute_force: n_b = " + std::to_string(n) + " exceeds limit " +
                                std::to_string(kSigmaBruteForceLimit));
  if (task.shards.size() <= 1) return 0.0;

  const Matrix z = folded_rows(task);
  const Eigen::MatrixXd gram = z * z.transpose();
  // Q = blockdiag(G) - G: only the cross-terminal blocks survive, negated.
  Eigen::MatrixXd q = -gram;
  Eigen::Index offset = 0;
  for (const auto& s : task.shards) {
    const auto len = static_cast<Eigen::Index>(s.size());
    q.block(offset, offset, len, len).setZero();
    offset += len;
  }

  const double shift = q.cwiseAbs().rowwise().sum().maxCoeff();
  if (shift == 0.0) return 0.0;
  const Eigen::MatrixXd shifted = q + shift * Eigen::MatrixXd::Identity(q.rows(), q.cols());

  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(q.rows(), 1.0, 2.0);
  v.normalize();
  double mu = v.dot(shifted * v);
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd next = shifted * v;
    const double norm = next.norm();
    if (norm == 0.0) break;
    v = next / norm;
    const double updated = v.dot(shifted * v);
    const bool done = std::abs(updated - mu) <= 1e-15 * std::max(1.0, std::abs(updated));
    mu = updated;
    if (done) break;
  }
  return std::max(0.0, mu - shift);
}

double sigma_estimate(const FederatedDataset& data, SigmaMode mode) {
  double sigma = 0.0;
  for (const auto& task : data.tasks)
    sigma = std::max(sigma, mode == SigmaMode::safe_bound ? sigma_safe_bound(task) : sigma_brute_force(task));
  return sigma;
}

double eta(std::size_t task_samples, double sigma, double gamma, double lambda1, double lambda2,
           EtaVariant variant) {
  if (!(sigma >= 0)) throw std::invalid_argument("eta: sigma must be >= 0");
  const double lg = (lambda1 + lambda2) * gamma;
  if (std::isinf(sigma)) return 0.0;
  const double weight = variant == EtaVariant::theorem ? static_cast<double>(task_samples) : 1.0;
  return lg / (weight * sigma + lg);
}

std::size_t k_bound(double theta_max, double eta_star, std::size_t t_star, std::span<const std::size_t> task_samples,
                    std::size_t num_tasks, double eps_d) {
  if (t_star == 0 || num_tasks == 0) throw std::invalid_argument("k_bound: T* and N must be >= 1");
  if (!(eps_d > 0)) throw std::invalid_argument("k_bound: eps_d must be > 0");
  double total = 0;
  for (std::size_t n : task_samples) total += static_cast<double>(n);
  const double ratio = total / (static_cast<double>(num_tasks) * eps_d);
  if (!(ratio > 1.0)) return 1;
  const double beta = (1.0 - theta_max) * eta_star / static_cast<double>(t_star);
  const double bound = (1.0 - beta) * std::log(ratio);
  if (!(bound > 0)) return 1;
  // Strict inequality: an integral bound needs one more iteration.
  return static_cast<std::size_t>(std::floor(bound)) + 1;
}

double PlanningModel::task_theta(std::size_t b, std::size_t h) const {
  const auto& t = tasks.at(b);
  return theta(h, t.samples, t.largest_shard, gamma, lambda1, lambda2);
}

double PlanningModel::theta_max(std::size_t h) const {
  double out = 0;
  for (std::size_t b = 0; b < tasks.size(); ++b) out = std::max(out, task_theta(b, h));
  return out;
}

double PlanningModel::eta_star() const {
  double out = 1.0;
  for (const auto& t : tasks) out = std::min(out, eta(t.samples, sigma, gamma, lambda1, lambda2, eta_variant));
  return out;
}

std::size_t PlanningModel::t_star() const {
  std::size_t out = 0;
  for (const auto& t : tasks) out = std::max(out, t.terminals);
  return out;
}

double PlanningModel::log_term(double eps_d) const {
  double total = 0;
  for (const auto& t : tasks) total += static_cast<double>(t.samples);
  return std::max(0.0, std::log(total / (static_cast<double>(tasks.size()) * eps_d)));
}

std::size_t PlanningModel::k_bound(std::size_t h, double eps_d) const {
  std::vector<std::size_t> n;
  n.reserve(tasks.size());
  for (const auto& t : tasks) n.push_back(t.samples);
  return rhfedmtl::k_bound(theta_max(h), eta_star(), t_star(), n, tasks.size(), eps_d);
}

std::size_t PlanningModel::h_max() const {
  std::size_t out = std::numeric_limits<std::size_t>::max();
  for (const auto& t : tasks) out = std::min(out, t.largest_shard);
  return tasks.empty() ? 0 : out;
}

namespace {

void check_h(std::span<const std::size_t> h_per_task, const PlanningModel& model) {
  if (h_per_task.size() != model.tasks.size())
    throw DimensionMismatch("planner: one terminal-iteration count per task required");
}

double round_cost(std::span<const std::size_t> h_per_task, const ResourceCosts& costs, const PlanningModel& model,
                  std::size_t j) {
  double sum = 0;
  for (std::size_t b = 0; b < model.tasks.size(); ++b)
    sum += costs.base_station[j] +
           static_cast<double>(model.tasks[b].terminals) * static_cast<double>(h_per_task[b]) * costs.device[j];
  return sum;
}

}  // namespace

double projected_cost(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                      const ConvergenceTarget& target, const PlanningModel& model, std::size_t j) {
  check_h(h_per_task, model);
  if (j >= costs.types()) throw std::out_of_range("projected_cost: resource type out of range");
  const std::size_t h_min = *std::min_element(h_per_task.begin(), h_per_task.end());
  const double rate = model.eta_star() / static_cast<double>(model.t_star());
  double sum = 0;
  for (std::size_t b = 0; b < model.tasks.size(); ++b) {
    const double per_round = costs.base_station[j] + static_cast<double>(model.tasks[b].terminals) *
                                                         static_cast<double>(h_per_task[b]) * costs.device[j];
    sum += per_round * (1.0 - rate * (1.0 - model.task_theta(b, h_min)));
  }
  return static_cast<double>(target.server_iterations) * sum * model.log_term(target.eps_d);
}

double cost_f(std::size_t h, const ResourceCosts& costs, const ConvergenceTarget& target,
              const PlanningModel& model, std::size_t j) {
  const std::vector<std::size_t> uniform(model.tasks.size(), h);
  return projected_cost(uniform, costs, target, model, j);
}

Feasibility feasible(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                     const ConvergenceTarget& target, const PlanningModel& model) {
  for (std::size_t j = 0; j < costs.types(); ++j) {
    if (std::isinf(costs.budget[j])) continue;
    if (!(projected_cost(h_per_task, costs, target, model, j) < costs.budget[j])) return {false, j};
  }
  return {true, std::nullopt};
}

double budget_rounds(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                     const ConvergenceTarget& target, const PlanningModel& model) {
  check_h(h_per_task, model);
  double rounds = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < costs.types(); ++j) {
    const double per = static_cast<double>(target.server_iterations) * round_cost(h_per_task, costs, model, j);
    if (per == 0.0 || std::isinf(costs.budget[j])) continue;
    rounds = std::min(rounds, std::floor(costs.budget[j] / per));
  }
  return rounds;
}

std::size_t k_from_budget(std::span<const std::size_t> h_per_task, const ResourceCosts& costs,
                          const ConvergenceTarget& target, const PlanningModel& model) {
  const double rounds = budget_rounds(h_per_task, costs, target, model);
  if (rounds >= static_cast<double>(std::numeric_limits<std::size_t>::max()))
    return std::numeric_limits<std::size_t>::max();
  return std::max<std::size_t>(1, static_cast<std::size_t>(rounds));
}

namespace {

ResourcePlan make_plan(std::size_t h, const ResourceCosts& costs, const ConvergenceTarget& target,
                       const PlanningModel& model) {
  ResourcePlan plan;
  plan.h_per_task.assign(model.tasks.size(), h);
  for (std::size_t j = 0; j < costs.types(); ++j)
    plan.projected_cost.push_back(projected_cost(plan.h_per_task, costs, target, model, j));
  const Feasibility f = feasible(plan.h_per_task, costs, target, model);
  plan.feasible = f.feasible;
  plan.binding = f.binding;
  plan.k_bound = model.k_bound(h, target.eps_d);
  plan.k_budget = budget_rounds(plan.h_per_task, costs, target, model);
  return plan;
}

// Largest f_j / budget_j, the quantity minimized when nothing fits.
double budget_pressure(std::size_t h, const ResourceCosts& costs, const ConvergenceTarget& target,
                       const PlanningModel& model) {
  double worst = 0;
  for (std::size_t j = 0; j < costs.types(); ++j) {
    const double f = cost_f(h, costs, target, model, j);
    double ratio = 0;
    if (f > 0) ratio = costs.budget[j] > 0 ? f / costs.budget[j] : std::numeric_limits<double>::infinity();
    worst = std::max(worst, ratio);
  }
  return worst;
}

}  // namespace

ResourcePlan select_plan(const ResourceCosts& costs, const ConvergenceTarget& target, const PlanningModel& model,
                         std::size_t h_max, std::size_t k_cap) {
  if (h_max < 1) throw std::invalid_argument("select_plan: h_max must be >= 1");
  if (k_cap < 1) throw std::invalid_argument("select_plan: k_cap must be >= 1");
  if (model.tasks.empty()) throw std::invalid_argument("select_plan: no tasks");
  costs.validate();

  std::vector<char> fits(h_max + 2, 0);
  for (std::size_t h = 1; h <= h_max + 1; ++h) {
    const std::vector<std::size_t> uniform(model.tasks.size(), h);
    fits[h] = feasible(uniform, costs, target, model).feasible;
  }

  std::optional<std::size_t> crossing;
  for (std::size_t h = h_max; h >= 1; --h)
    if (fits[h] && !fits[h + 1]) {
      crossing = h;
      break;
    }
  std::optional<std::size_t> smallest;
  for (std::size_t h = 1; h <= h_max; ++h)
    if (fits[h]) {
      smallest = h;
      break;
    }

  if (!smallest) {
    std::size_t best = 1;
    double best_pressure = budget_pressure(1, costs, target, model);
    for (std::size_t h = 2; h <= h_max; ++h) {
      const double p = budget_pressure(h, costs, target, model);
      if (p < best_pressure) {
        best_pressure = p;
        best = h;
      }
    }
    ResourcePlan plan = make_plan(best, costs, target, model);
    plan.regime = Regime::starved;
    plan.k = k_from_budget(plan.h_per_task, costs, target, model);
    return plan;
  }

  if (crossing) {
    ResourcePlan plan = make_plan(*crossing, costs, target, model);
    plan.regime = Regime::balanced;
    plan.k = std::min(plan.k_bound, k_from_budget(plan.h_per_task, costs, target, model));
    return plan;
  }

  ResourcePlan plan = make_plan(*smallest, costs, target, model);
  plan.regime = Regime::surplus;
  plan.k = std::min(k_cap, k_from_budget(plan.h_per_task, costs, target, model));
  return plan;
}

ResourcePlan fixed_plan(std::size_t h, const ResourceCosts& costs, const ConvergenceTarget& target,
                        const PlanningModel& model) {
  costs.validate();
  ResourcePlan plan = make_plan(h, costs, target, model);
  plan.regime = Regime::fixed;
  plan.k = k_from_budget(plan.h_per_task, costs, target, model);
  return plan;
}

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::fixed: return "fixed";
    case Regime::starved: return "starved";
    case Regime::balanced: return "balanced";
    case Regime::surplus: return "surplus";
  }
  return "unknown";
}

}  // namespace rhfedmtl
