#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rhfedmtl/errors.hpp"
#include "rhfedmtl/objective.hpp"

using namespace rhfedmtl;

namespace {

RegulationParams reg_for(const FederatedDataset& data, double l1, double l2, Vector r = {}) {
  if (r.size() == 0) r = Vector::Zero(static_cast<Eigen::Index>(data.dim));
  return RegulationParams{l1, l2, r};
}

std::vector<TaskModel> zero_models(const FederatedDataset& data) {
  std::vector<TaskModel> out;
  for (std::size_t b = 0; b < data.num_tasks(); ++b) out.push_back({Vector::Zero(Eigen::Index(data.dim)), b});
  return out;
}

}  // namespace

TEST_CASE("primal at zero models is the loss at margin zero") {
  const auto data = fixture::random_dataset(1, 3, 2, 5, 4);
  const SmoothedHinge<> loss(1.0);
  CHECK(primal_objective(zero_models(data), reg_for(data, 1e-4, 1e-6), data, loss) == doctest::Approx(0.5));
}

TEST_CASE("primal with lambda2 = 0 is the mean of independent single-task objectives") {
  std::mt19937_64 rng(7);
  const auto data = fixture::random_dataset(2, 3, 2, 5, 4);
  const SmoothedHinge<> loss(1.0);
  auto models = zero_models(data);
  for (auto& m : models) m.w = fixture::random_vector(data.dim, rng);
  const auto reg = reg_for(data, 0.3, 0.0, fixture::random_vector(data.dim, rng));
  double sum = 0;
  for (std::size_t b = 0; b < data.num_tasks(); ++b) {
    FederatedDataset single{{data.tasks[b]}, data.dim};
    sum += primal_objective(std::span(&models[b], 1), reg, single, loss);
  }
  CHECK(primal_objective(models, reg, data, loss) == doctest::Approx(sum / 3).epsilon(1e-14));
}

TEST_CASE("primal and dual agree with term-by-term oracles") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = fixture::random_dataset(100 + trial, 2, 2, 2, 3);  // N=2, n_b=4, d=3
    const double l1 = 0.01 + trial * 0.05, l2 = 0.002 * trial;
    const double gamma = 0.5 + 0.1 * trial;
    const SmoothedHinge<> loss(gamma);
    const Vector r = fixture::random_vector(3, rng);
    const auto reg = reg_for(data, l1, l2, r);
    auto models = zero_models(data);
    DualState duals;
    double p_ref = 0, d_ref = 0;
    for (std::size_t b = 0; b < 2; ++b) {
      models[b].w = fixture::random_vector(3, rng);
      duals.push_back(fixture::random_dual(data.tasks[b], rng));
      p_ref += oracle::task_primal(oracle::to_std(models[b].w), data.tasks[b], l1, l2, oracle::to_std(r), gamma) / 2;
      d_ref += oracle::task_dual(fixture::flatten(duals[b]), data.tasks[b], l1, l2, oracle::to_std(r), gamma) / 2;
    }
    CHECK(std::abs(primal_objective(models, reg, data, loss) - p_ref) <= 1e-12);
    CHECK(std::abs(dual_objective(duals, reg, data, loss) - d_ref) <= 1e-12);
  }
}

TEST_CASE("dual at zero") {
  const auto data = fixture::random_dataset(3, 2, 3, 4, 5);
  const SmoothedHinge<> loss(1.0);
  CHECK(dual_objective(zero_duals(data), reg_for(data, 1e-4, 1e-6), data, loss) == 0.0);

  // Only the anchor term survives: lambda1 lambda2 |r|^2 / (2 (lambda1 + lambda2)).
  std::mt19937_64 rng(5);
  const Vector r = fixture::random_vector(5, rng);
  const double l1 = 0.2, l2 = 0.7;
  const double expected = l1 * l2 * r.squaredNorm() / (2 * (l1 + l2));
  CHECK(dual_objective(zero_duals(data), reg_for(data, l1, l2, r), data, loss) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("recover_w") {
  std::mt19937_64 rng(9);
  const auto data = fixture::random_dataset(4, 1, 3, 4, 3);
  const Vector r = fixture::random_vector(3, rng);
  const auto reg = reg_for(data, 0.4, 0.1, r);
  const TaskDual zero = TaskDual::zeros(data.tasks[0]);
  CHECK((recover_w(zero, reg, data.tasks[0]) - 0.1 * r / 0.5).norm() < 1e-15);
  CHECK(recover_w(zero, reg_for(data, 0.4, 0.1), data.tasks[0]).norm() == 0.0);

  SUBCASE("stationarity of the inner Lagrangian minimization") {
    for (int trial = 0; trial < 10; ++trial) {
      const TaskDual a = fixture::random_dual(data.tasks[0], rng);
      const Vector v = data_image(a, data.tasks[0]);
      const Vector w = recover_w(a, reg, data.tasks[0]);
      const auto inner = [&](const Vector& u) {
        return 0.5 * reg.lambda1 * u.squaredNorm() + 0.5 * reg.lambda2 * (u - r).squaredNorm() - v.dot(u);
      };
      Vector grad(3);
      const double h = 1e-5;
      for (Eigen::Index j = 0; j < 3; ++j) {
        Vector up = w, down = w;
        up[j] += h;
        down[j] -= h;
        grad[j] = (inner(up) - inner(down)) / (2 * h);
      }
      CHECK(grad.norm() <= 1e-10);
    }
  }
}

TEST_CASE("duality gap on a one-sample one-dimension problem") {
  // min_w phi(w) + lam w^2 / 2 with x = y = 1 has w* = 1/(1+lam) and a* = lam/(1+lam).
  const double lam = 0.25;
  Matrix x(1, 1);
  x << 1.0;
  Vector y(1);
  y << 1.0;
  TaskData task;
  task.shards.emplace_back(x, y);
  const RegulationParams reg{lam, 0.0, Vector::Zero(1)};
  TaskDual a = TaskDual::zeros(task);
  a.blocks[0][0] = lam / (1 + lam);
  const Vector w = recover_w(a, reg, task);
  CHECK(w[0] == doctest::Approx(1 / (1 + lam)).epsilon(1e-15));
  const double gap = task_duality_gap(w, a, reg, task, SmoothedHinge<>(1.0));
  CHECK(gap >= -1e-9);
  CHECK(gap <= 1e-9);
}

TEST_CASE("duality gap at zero equals the primal") {
  const auto data = fixture::random_dataset(5, 2, 2, 3, 4);
  const SmoothedHinge<> loss(1.0);
  const auto reg = reg_for(data, 1e-3, 1e-5);
  const auto models = zero_models(data);
  const auto duals = zero_duals(data);
  CHECK(duality_gap(models, duals, reg, data, loss) == primal_objective(models, reg, data, loss));
}

TEST_CASE("weak duality for random duals and the recovered model") {
  std::mt19937_64 rng(13);
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto data = fixture::random_dataset(200 + trial, 1, 3, 3, 4);
    const auto reg = reg_for(data, std::pow(10.0, -1 - trial % 4), 1e-3 * (trial % 3),
                             fixture::random_vector(4, rng));
    const TaskDual a = fixture::random_dual(data.tasks[0], rng);
    const Vector w = recover_w(a, reg, data.tasks[0]);
    if (task_duality_gap(w, a, reg, data.tasks[0], SmoothedHinge<>(1.0)) < -1e-9) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("gap refuses a model that is not the dual image") {
  const auto data = fixture::random_dataset(6, 1, 2, 3, 2);
  const auto reg = reg_for(data, 0.1, 0.0);
  const TaskDual a = TaskDual::zeros(data.tasks[0]);
  Vector w = Vector::Ones(2);
  CHECK_THROWS_AS(task_duality_gap(w, a, reg, data.tasks[0], SmoothedHinge<>(1.0)), InvariantViolation);
}

TEST_CASE("lambda2 = 0 decouples the tasks") {
  std::mt19937_64 rng(17);
  const auto data = fixture::random_dataset(7, 3, 2, 3, 3);
  const SmoothedHinge<> loss(1.0);
  const auto reg = reg_for(data, 0.05, 0.0, fixture::random_vector(3, rng));
  DualState duals;
  for (const auto& t : data.tasks) duals.push_back(fixture::random_dual(t, rng));
  const double before = task_dual(duals[0], reg, data.tasks[0], loss);
  duals[1] = fixture::random_dual(data.tasks[1], rng);
  duals[2] = fixture::random_dual(data.tasks[2], rng);
  CHECK(task_dual(duals[0], reg, data.tasks[0], loss) == before);
  // ...and the anchor no longer matters either.
  auto moved = reg;
  moved.anchor = fixture::random_vector(3, rng);
  CHECK(task_dual(duals[0], moved, data.tasks[0], loss) == before);
}

TEST_CASE("dimension mismatches are reported") {
  const auto data = fixture::random_dataset(8, 2, 2, 3, 3);
  const SmoothedHinge<> loss(1.0);
  auto models = zero_models(data);
  models[0].w = Vector::Zero(4);
  CHECK_THROWS_AS(primal_objective(models, reg_for(data, 0.1, 0.0), data, loss), DimensionMismatch);
  DualState duals = zero_duals(data);
  duals[1].blocks[0] = Vector::Zero(5);
  CHECK_THROWS_AS(dual_objective(duals, reg_for(data, 0.1, 0.0), data, loss), DimensionMismatch);
  CHECK_THROWS_AS(RegulationParams({0.1, 0.0, Vector::Zero(2)}).validate(3), DimensionMismatch);
  CHECK_THROWS_AS(RegulationParams({0.0, 0.0, Vector::Zero(3)}).validate(3), std::invalid_argument);
}

TEST_CASE("test accuracy uses the tie label at zero scores") {
  TaskData task;
  task.test_features = Matrix::Zero(4, 2);
  task.test_labels = Vector(4);
  task.test_labels << 1, -1, -1, -1;
  task.tie_label = -1.0;
  CHECK(test_accuracy(Vector::Zero(2), task) == 0.75);
  task.tie_label = 1.0;
  CHECK(test_accuracy(Vector::Zero(2), task) == 0.25);
}
