#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rhfedmtl/linalg.hpp"

namespace rhfedmtl {

/// Samples held by one terminal T_{b,t}. Immutable after construction.
class TerminalShard {
 public:
  TerminalShard(Matrix features, Vector labels);

  std::size_t size() const { return static_cast<std::size_t>(labels_.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }

  const Matrix& features() const { return features_; }
  const Vector& labels() const { return labels_; }

 private:
  Matrix features_;
  Vector labels_;
};

/// Everything under one base station: the terminals' training shards plus
/// the BS-held test split.
struct TaskData {
  std::vector<TerminalShard> shards;
  Matrix test_features;
  Vector test_labels;
  // Prediction used when w'x == 0; the training-majority label.
  double tie_label = 1.0;

  std::size_t samples() const;        // n_b
  std::size_t largest_shard() const;  // ñ_b
  std::size_t terminals() const { return shards.size(); }
};

struct FederatedDataset {
  std::vector<TaskData> tasks;
  std::size_t dim = 0;

  std::size_t num_tasks() const { return tasks.size(); }
  /// Throws DimensionMismatch / std::invalid_argument when the structural
  /// invariants do not hold.
  void validate() const;
  /// 64-bit FNV-1a over the canonical byte layout of all shards and test sets.
  std::uint64_t fingerprint() const;
};

/// Rows grouped by task, in order of first appearance in the source.
struct RawTask {
  std::string key;
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;  // +1 / -1
};

struct RawTable {
  std::vector<std::string> feature_names;
  std::vector<RawTask> tasks;

  std::size_t dim() const { return feature_names.size(); }
};

struct CsvOptions {
  std::string label_column = "label";
  std::string task_column = "task";
  // Label value mapped to +1. All other values map to -1. A numeric label
  // column with values in {-1, +1} is accepted as-is when this is empty.
  std::string positive_label = "1";
};

/// Comma separated, header row mandatory, '.' decimal separator.
RawTable load_csv(const std::string& path, const CsvOptions& options = {});
RawTable parse_csv(std::istream& in, const CsvOptions& options = {});

struct PartitionOptions {
  std::size_t num_tasks = 0;  // 0 = all tasks in the table
  std::size_t terminals_per_task = 5;
  double test_fraction = 2.0 / 7.0;
  std::uint64_t seed = 0;
  bool standardize = true;
};

/// Deterministic shuffle, train/test split and near-equal sharding per task.
/// The first (train % N_b) terminals receive one extra sample.
FederatedDataset partition(const RawTable& raw, const PartitionOptions& options);

struct SynthOptions {
  std::size_t num_tasks = 5;
  std::size_t terminals_per_task = 5;
  std::size_t samples_per_task = 490;
  std::size_t dim = 10;
  double relatedness = 0.7;  // rho
  double noise = 0.05;       // label flip probability
  double test_fraction = 2.0 / 7.0;
  std::uint64_t seed = 0;
};

struct SynthTable {
  RawTable table;
  std::vector<Vector> true_weights;  // unit-norm w_b°
  std::vector<std::size_t> flipped;  // flipped labels per task
};

/// Related linear classification tasks: w_b° ∝ rho u + (1 - rho) delta_b.
SynthTable synth_table(const SynthOptions& options);
FederatedDataset synth_tasks(const SynthOptions& options);

/// Writes a RawTable in the load_csv dialect (task column first, label last).
void write_csv(const RawTable& table, std::ostream& out);

}  // namespace rhfedmtl
