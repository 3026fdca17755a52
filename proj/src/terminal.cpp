#include "rhfedmtl/terminal.hpp"

#include <random>

#include "rhfedmtl/errors.hpp"

namespace rhfedmtl {

double coordinate_update(const TerminalShard& shard, std::size_t i, double alpha_i, const Vector& w,
                         const RegulationParams& reg, std::size_t task_samples, const SmoothedHinge<>& loss) {
  if (i >= shard.size()) throw std::out_of_range("coordinate_update: sample index out of range");
  if (static_cast<std::size_t>(w.size()) != shard.dim()) throw DimensionMismatch("coordinate_update: model dimension");
  const auto x = shard.features().row(static_cast<Eigen::Index>(i));
  const double y = shard.labels()[static_cast<Eigen::Index>(i)];
  const double margin = y * x.dot(w);
  const double curvature = x.squaredNorm() / (reg.total() * static_cast<double>(task_samples));
  return coordinate_step(alpha_i, margin, curvature, loss.gamma);
}

LocalUpdate local_round(const TerminalShard& shard, const Vector& alpha_block, const Vector& w,
                        const RegulationParams& reg, std::size_t task_samples, const SmoothedHinge<>& loss,
                        std::size_t iterations, std::uint64_t seed) {
  if (static_cast<std::size_t>(alpha_block.size()) != shard.size())
    throw DimensionMismatch("local_round: dual block does not match shard");
  if (static_cast<std::size_t>(w.size()) != shard.dim()) throw DimensionMismatch("local_round: model dimension");
  if (task_samples < shard.size()) throw std::invalid_argument("local_round: n_b smaller than shard");

  LocalUpdate out{Vector::Zero(alpha_block.size()), Vector::Zero(w.size()), iterations};
  if (iterations == 0) return out;

  const double scale = 1.0 / (reg.total() * static_cast<double>(task_samples));
  Vector alpha = alpha_block;
  Vector local_w = w;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, shard.size() - 1);

  const Matrix& x = shard.features();
  const Vector& y = shard.labels();
  for (std::size_t h = 0; h < iterations; ++h) {
    const auto i = static_cast<Eigen::Index>(pick(rng));
    const double margin = y[i] * x.row(i).dot(local_w);
    const double curvature = x.row(i).squaredNorm() * scale;
    const double next = std::clamp(alpha[i] + coordinate_step(alpha[i], margin, curvature, loss.gamma), 0.0, 1.0);
    const double step = next - alpha[i];
    if (step == 0.0) continue;
    alpha[i] = next;
    out.delta_alpha[i] += step;
    local_w.noalias() += (step * y[i] * scale) * x.row(i).transpose();
  }
  // Recomputed from delta_alpha rather than read off local_w so the message
  // is an exact linear image of the dual change.
  out.delta_w = scale * (x.transpose() * out.delta_alpha.cwiseProduct(y));
  return out;
}

std::uint64_t stream_seed(std::uint64_t root, std::uint64_t m, std::uint64_t k, std::uint64_t t) {
  // splitmix64 finalizer folded over the coordinates.
  const auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(root);
  for (std::uint64_t v : {m, k, t}) h = mix(h ^ v);
  return h;
}

}  // namespace rhfedmtl
