#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rhfedmtl/dataset.hpp"
#include "rhfedmtl/objective.hpp"

namespace fixture {

using namespace rhfedmtl;

/// Gaussian features and random +-1 labels, no standardization.
inline FederatedDataset random_dataset(std::uint64_t seed, std::size_t tasks, std::size_t terminals,
                                       std::size_t per_shard, std::size_t dim, std::size_t test = 4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto draw = [&](std::size_t rows, Matrix& x, Vector& y) {
    x.resize(static_cast<Eigen::Index>(rows), d);
    y.resize(static_cast<Eigen::Index>(rows));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = normal(rng);
      y[i] = coin(rng) ? 1.0 : -1.0;
    }
  };
  FederatedDataset data;
  data.dim = dim;
  for (std::size_t b = 0; b < tasks; ++b) {
    TaskData task;
    for (std::size_t t = 0; t < terminals; ++t) {
      Matrix x;
      Vector y;
      draw(per_shard, x, y);
      task.shards.emplace_back(x, y);
    }
    draw(test, task.test_features, task.test_labels);
    data.tasks.push_back(std::move(task));
  }
  return data;
}

inline TaskDual random_dual(const TaskData& task, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TaskDual a = TaskDual::zeros(task);
  for (auto& block : a.blocks)
    for (Eigen::Index i = 0; i < block.size(); ++i) block[i] = unit(rng);
  return a;
}

inline std::vector<double> flatten(const TaskDual& a) {
  std::vector<double> out;
  for (const auto& block : a.blocks)
    for (Eigen::Index i = 0; i < block.size(); ++i) out.push_back(block[i]);
  return out;
}

inline Vector random_vector(std::size_t dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
  return v;
}

}  // namespace fixture
