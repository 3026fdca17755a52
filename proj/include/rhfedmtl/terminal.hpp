#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "rhfedmtl/dataset.hpp"
#include "rhfedmtl/linalg.hpp"
#include "rhfedmtl/loss.hpp"
#include "rhfedmtl/objective.hpp"

namespace rhfedmtl {

/// Exact maximizer over the box [-alpha, 1 - alpha] of the task dual D_b
/// restricted to one coordinate.
///
/// Along coordinate i the objective (times n_b) is
///   (a + d) - gamma (a + d)^2 / 2 - d * margin - d^2 * curvature / 2
/// with margin = y x'w and curvature = ||x||^2 / ((lambda1 + lambda2) n_b),
/// a concave quadratic, so the clipped stationary point is exact.
template <typename Scalar>
Scalar coordinate_step(Scalar alpha, Scalar margin, Scalar curvature, Scalar gamma) {
  const Scalar step = (Scalar(1) - margin - gamma * alpha) / (gamma + curvature);
  if (!std::isfinite(step)) throw std::domain_error("coordinate_step: non-finite update");
  return std::clamp(step, -alpha, Scalar(1) - alpha);
}

/// Coordinate update for sample i of a shard, given the current task model.
double coordinate_update(const TerminalShard& shard, std::size_t i, double alpha_i, const Vector& w,
                         const RegulationParams& reg, std::size_t task_samples, const SmoothedHinge<>& loss);

/// What a terminal sends to its base station. Never carries samples.
struct LocalUpdate {
  Vector delta_alpha;
  Vector delta_w;  // (1/((lambda1+lambda2) n_b)) sum_i delta_alpha_i y_i x_i
  std::size_t iterations_used = 0;
};

/// H uniform-with-replacement coordinate updates on a private copy of the
/// block and the model. H = 0 returns a zero update.
LocalUpdate local_round(const TerminalShard& shard, const Vector& alpha_block, const Vector& w,
                        const RegulationParams& reg, std::size_t task_samples, const SmoothedHinge<>& loss,
                        std::size_t iterations, std::uint64_t seed);

/// Seed of the RNG stream for terminal t at (server m, BS k). Tasks share
/// streams, so cloned tasks evolve identically.
std::uint64_t stream_seed(std::uint64_t root, std::uint64_t m, std::uint64_t k, std::uint64_t t);

}  // namespace rhfedmtl
