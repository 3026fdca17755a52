#include "rhfedmtl/objective.hpp"

#include <cmath>
#include <string>

#include "rhfedmtl/errors.hpp"

namespace rhfedmtl {

void RegulationParams::validate(std::size_t dim) const {
  if (!(lambda1 > 0.0) || !std::isfinite(lambda1)) throw std::invalid_argument("lambda1 must be > 0");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw std::invalid_argument("lambda2 must be >= 0");
  if (static_cast<std::size_t>(anchor.size()) != dim)
    throw DimensionMismatch("regulation anchor has dimension " + std::to_string(anchor.size()) +
                            ", data has " + std::to_string(dim));
}

TaskDual TaskDual::zeros(const TaskData& task) {
  TaskDual out;
  out.blocks.reserve(task.shards.size());
  for (const auto& s : task.shards) out.blocks.push_back(Vector::Zero(static_cast<Eigen::Index>(s.size())));
  return out;
}

std::size_t TaskDual::size() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.size());
  return n;
}

DualState zero_duals(const FederatedDataset& data) {
  DualState out;
  out.reserve(data.tasks.size());
  for (const auto& task : data.tasks) out.push_back(TaskDual::zeros(task));
  return out;
}

namespace {

void check_dual_shape(const TaskDual& alpha, const TaskData& task) {
  if (alpha.blocks.size() != task.shards.size())
    throw DimensionMismatch("dual has " + std::to_string(alpha.blocks.size()) + " blocks, task has " +
                            std::to_string(task.shards.size()) + " terminals");
  for (std::size_t t = 0; t < task.shards.size(); ++t)
    if (static_cast<std::size_t>(alpha.blocks[t].size()) != task.shards[t].size())
      throw DimensionMismatch("dual block " + std::to_string(t) + " does not match shard size");
}

}  // namespace

Vector data_image(const TaskDual& alpha, const TaskData& task) {
  check_dual_shape(alpha, task);
  const auto d = task.shards.front().features().cols();
  Vector v = Vector::Zero(d);
  for (std::size_t t = 0; t < task.shards.size(); ++t) {
    const auto& s = task.shards[t];
    v.noalias() += s.features().transpose() * alpha.blocks[t].cwiseProduct(s.labels());
  }
  return v / static_cast<double>(task.samples());
}

Vector recover_w(const TaskDual& alpha, const RegulationParams& reg, const TaskData& task) {
  Vector v = data_image(alpha, task);
  if (reg.anchor.size() != v.size()) throw DimensionMismatch("recover_w: anchor dimension mismatch");
  return (reg.lambda2 * reg.anchor + v) / reg.total();
}

double task_primal(const Vector& w, const RegulationParams& reg, const TaskData& task,
                   const SmoothedHinge<>& loss) {
  if (task.shards.empty()) throw std::invalid_argument("task_primal: task has no terminals");
  if (static_cast<std::size_t>(w.size()) != task.shards.front().dim() || reg.anchor.size() != w.size())
    throw DimensionMismatch("task_primal: model dimension mismatch");
  double sum = 0;
  for (const auto& s : task.shards) {
    const Vector margins = (s.features() * w).cwiseProduct(s.labels());
    for (Eigen::Index i = 0; i < margins.size(); ++i) sum += loss.value(margins[i]);
  }
  return sum / static_cast<double>(task.samples()) + 0.5 * reg.lambda1 * w.squaredNorm() +
         0.5 * reg.lambda2 * (w - reg.anchor).squaredNorm();
}

// D_b = (1/n_b) sum_i -phi*(-alpha_i)
//       + [lambda1 lambda2 ||r||^2 - ||v||^2 - 2 lambda2 v'r] / (2 (lambda1 + lambda2)),
// with v = A_b alpha_b.
double task_dual(const TaskDual& alpha, const RegulationParams& reg, const TaskData& task,
                 const SmoothedHinge<>& loss) {
  const Vector v = data_image(alpha, task);
  if (reg.anchor.size() != v.size()) throw DimensionMismatch("task_dual: anchor dimension mismatch");
  double conj = 0;
  for (const auto& block : alpha.blocks)
    for (Eigen::Index i = 0; i < block.size(); ++i) conj -= loss.conjugate(block[i]);
  const double r2 = reg.anchor.squaredNorm();
  const double quad =
      (reg.lambda1 * reg.lambda2 * r2 - v.squaredNorm() - 2.0 * reg.lambda2 * v.dot(reg.anchor)) /
      (2.0 * reg.total());
  return conj / static_cast<double>(task.samples()) + quad;
}

double primal_objective(std::span<const TaskModel> models, const RegulationParams& reg,
                        const FederatedDataset& data, const SmoothedHinge<>& loss) {
  if (models.size() != data.tasks.size()) throw DimensionMismatch("primal_objective: one model per task");
  double sum = 0;
  for (std::size_t b = 0; b < models.size(); ++b) sum += task_primal(models[b].w, reg, data.tasks[b], loss);
  return sum / static_cast<double>(models.size());
}

double dual_objective(const DualState& alpha, const RegulationParams& reg, const FederatedDataset& data,
                      const SmoothedHinge<>& loss) {
  if (alpha.size() != data.tasks.size()) throw DimensionMismatch("dual_objective: one dual per task");
  double sum = 0;
  for (std::size_t b = 0; b < alpha.size(); ++b) sum += task_dual(alpha[b], reg, data.tasks[b], loss);
  return sum / static_cast<double>(alpha.size());
}

double mapping_error(const Vector& w, const TaskDual& alpha, const RegulationParams& reg,
                     const TaskData& task) {
  const Vector expected = recover_w(alpha, reg, task);
  if (expected.size() != w.size()) throw DimensionMismatch("mapping_error: model dimension mismatch");
  return (w - expected).norm() / (1.0 + w.norm());
}

double task_duality_gap(const Vector& w, const TaskDual& alpha, const RegulationParams& reg,
                        const TaskData& task, const SmoothedHinge<>& loss) {
  const double drift = mapping_error(w, alpha, reg, task);
  if (!(drift <= kMappingTolerance))
    throw InvariantViolation("duality_gap: model is not the recovered image of the duals (drift " +
                             std::to_string(drift) + ")");
  const double gap = task_primal(w, reg, task, loss) - task_dual(alpha, reg, task, loss);
  if (!(gap >= -kWeakDualityTolerance))
    throw InvariantViolation("duality_gap: weak duality violated (gap " + std::to_string(gap) + ")");
  return gap;
}

double duality_gap(std::span<const TaskModel> models, const DualState& alpha, const RegulationParams& reg,
                   const FederatedDataset& data, const SmoothedHinge<>& loss) {
  if (models.size() != data.tasks.size() || alpha.size() != data.tasks.size())
    throw DimensionMismatch("duality_gap: one model and one dual per task");
  double sum = 0;
  for (std::size_t b = 0; b < models.size(); ++b)
    sum += task_duality_gap(models[b].w, alpha[b], reg, data.tasks[b], loss);
  return sum / static_cast<double>(models.size());
}

double test_accuracy(const Vector& w, const TaskData& task) {
  const auto n = task.test_labels.size();
  if (n == 0) return 0.0;
  if (task.test_features.cols() != w.size()) throw DimensionMismatch("test_accuracy: dimension mismatch");
  const Vector scores = task.test_features * w;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pred = scores[i] > 0 ? 1.0 : (scores[i] < 0 ? -1.0 : task.tie_label);
    correct += pred == task.test_labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace rhfedmtl
