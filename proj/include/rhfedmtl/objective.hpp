#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rhfedmtl/dataset.hpp"
#include "rhfedmtl/linalg.hpp"
#include "rhfedmtl/loss.hpp"

namespace rhfedmtl {

/// lambda1 ||w||^2 / 2 + lambda2 ||w - r||^2 / 2, with one anchor r shared
/// by every task.
struct RegulationParams {
  double lambda1 = 1e-4;
  double lambda2 = 1e-6;
  Vector anchor;

  double total() const { return lambda1 + lambda2; }
  void validate(std::size_t dim) const;
};

struct TaskModel {
  Vector w;
  std::size_t task_id = 0;
};

/// Label-folded duals of one task, one block alpha_[t] per terminal.
struct TaskDual {
  std::vector<Vector> blocks;

  static TaskDual zeros(const TaskData& task);
  std::size_t size() const;
};

using DualState = std::vector<TaskDual>;

DualState zero_duals(const FederatedDataset& data);

/// A_b alpha_b = (1/n_b) sum_i alpha_i y_i x_i.
Vector data_image(const TaskDual& alpha, const TaskData& task);

/// w_b = (lambda2 r + A_b alpha_b) / (lambda1 + lambda2).
Vector recover_w(const TaskDual& alpha, const RegulationParams& reg, const TaskData& task);

/// Per-task terms. The averaged objectives below are (1/N) sums of these.
double task_primal(const Vector& w, const RegulationParams& reg, const TaskData& task,
                   const SmoothedHinge<>& loss);
double task_dual(const TaskDual& alpha, const RegulationParams& reg, const TaskData& task,
                 const SmoothedHinge<>& loss);

double primal_objective(std::span<const TaskModel> models, const RegulationParams& reg,
                        const FederatedDataset& data, const SmoothedHinge<>& loss);
double dual_objective(const DualState& alpha, const RegulationParams& reg, const FederatedDataset& data,
                      const SmoothedHinge<>& loss);

/// Relative distance ||w - recover_w(alpha)|| / (1 + ||w||).
double mapping_error(const Vector& w, const TaskDual& alpha, const RegulationParams& reg,
                     const TaskData& task);

inline constexpr double kMappingTolerance = 1e-9;
inline constexpr double kWeakDualityTolerance = 1e-9;

/// P(w) - D(alpha) for a single task. Throws InvariantViolation if w is not
/// the recovered image of alpha or if the gap is negative beyond rounding.
double task_duality_gap(const Vector& w, const TaskDual& alpha, const RegulationParams& reg,
                        const TaskData& task, const SmoothedHinge<>& loss);

double duality_gap(std::span<const TaskModel> models, const DualState& alpha, const RegulationParams& reg,
                   const FederatedDataset& data, const SmoothedHinge<>& loss);

/// Fraction of test samples with sign(w'x) == y; ties predict task.tie_label.
double test_accuracy(const Vector& w, const TaskData& task);

}  // namespace rhfedmtl
