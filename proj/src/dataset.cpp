#include "rhfedmtl/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "rhfedmtl/errors.hpp"

namespace rhfedmtl {

TerminalShard::TerminalShard(Matrix features, Vector labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (labels_.size() == 0) throw std::invalid_argument("TerminalShard: empty shard");
  if (features_.rows() != labels_.size())
    throw DimensionMismatch("TerminalShard: feature rows and labels disagree");
  if (!features_.allFinite()) throw std::invalid_argument("TerminalShard: non-finite feature");
  for (Eigen::Index i = 0; i < labels_.size(); ++i)
    if (labels_[i] != 1.0 && labels_[i] != -1.0)
      throw std::invalid_argument("TerminalShard: labels must be -1 or +1");
}

std::size_t TaskData::samples() const {
  std::size_t n = 0;
  for (const auto& s : shards) n += s.size();
  return n;
}

std::size_t TaskData::largest_shard() const {
  std::size_t m = 0;
  for (const auto& s : shards) m = std::max(m, s.size());
  return m;
}

void FederatedDataset::validate() const {
  if (tasks.empty()) throw std::invalid_argument("dataset has no tasks");
  for (const auto& task : tasks) {
    if (task.shards.empty()) throw std::invalid_argument("task has no terminals");
    for (const auto& s : task.shards)
      if (s.dim() != dim) throw DimensionMismatch("shard dimension differs from dataset dimension");
    if (task.test_features.rows() != task.test_labels.size())
      throw DimensionMismatch("test features and labels disagree");
    if (task.test_features.rows() > 0 && static_cast<std::size_t>(task.test_features.cols()) != dim)
      throw DimensionMismatch("test dimension differs from dataset dimension");
  }
}

namespace {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  template <typename M>
  void matrix(const M& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        bytes(&v, sizeof v);
      }
  }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

}  // namespace

std::uint64_t FederatedDataset::fingerprint() const {
  Fnv1a f;
  f.u64(dim);
  f.u64(tasks.size());
  for (const auto& task : tasks) {
    f.u64(task.shards.size());
    for (const auto& s : task.shards) {
      f.matrix(s.features());
      f.matrix(s.labels());
    }
    f.matrix(task.test_features);
    f.matrix(task.test_labels);
  }
  return f.h;
}

RawTable parse_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  const auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = find_col(options.label_column);
  const std::size_t task_col = find_col(options.task_column);
  if (label_col == task_col) throw ParseError("csv: label and task columns must differ");

  RawTable table;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_col && c != task_col) {
      feature_cols.push_back(c);
      table.feature_names.push_back(header[c]);
    }

  std::unordered_map<std::string, std::size_t> task_index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));

    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (std::size_t c : feature_cols) {
      double v = 0;
      if (!parse_double(trim(cells[c]), v) || !std::isfinite(v))
        throw ParseError("csv line " + std::to_string(line_no) + ": non-numeric feature in column '" +
                         header[c] + "'");
      row.push_back(v);
    }

    const std::string label = trim(cells[label_col]);
    double y = 0;
    if (options.positive_label.empty()) {
      if (!parse_double(label, y) || (y != 1.0 && y != -1.0))
        throw ParseError("csv line " + std::to_string(line_no) + ": label must be -1 or +1");
    } else {
      y = label == options.positive_label ? 1.0 : -1.0;
    }

    const std::string key = trim(cells[task_col]);
    auto [it, inserted] = task_index.try_emplace(key, table.tasks.size());
    if (inserted) table.tasks.push_back(RawTask{key, {}, {}});
    table.tasks[it->second].rows.push_back(std::move(row));
    table.tasks[it->second].labels.push_back(y);
  }
  return table;
}

RawTable load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open '" + path + "'");
  return parse_csv(in, options);
}

void write_csv(const RawTable& table, std::ostream& out) {
  out << "task";
  for (const auto& name : table.feature_names) out << ',' << name;
  out << ",label\n";
  out << std::setprecision(17);
  for (const auto& task : table.tasks)
    for (std::size_t i = 0; i < task.rows.size(); ++i) {
      out << task.key;
      for (double v : task.rows[i]) out << ',' << v;
      out << ',' << (task.labels[i] > 0 ? 1 : -1) << '\n';
    }
}

FederatedDataset partition(const RawTable& raw, const PartitionOptions& options) {
  const std::size_t n_tasks = options.num_tasks == 0 ? raw.tasks.size() : options.num_tasks;
  if (n_tasks > raw.tasks.size())
    throw std::invalid_argument("partition: requested " + std::to_string(n_tasks) + " tasks, table has " +
                                std::to_string(raw.tasks.size()));
  if (options.terminals_per_task == 0) throw std::invalid_argument("partition: N_b must be >= 1");
  if (!(options.test_fraction >= 0.0 && options.test_fraction < 1.0))
    throw std::invalid_argument("partition: test_fraction must lie in [0, 1)");

  FederatedDataset out;
  out.dim = raw.dim();
  const auto d = static_cast<Eigen::Index>(out.dim);

  for (std::size_t b = 0; b < n_tasks; ++b) {
    const RawTask& rt = raw.tasks[b];
    const std::size_t rows = rt.rows.size();
    const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * double(rows)));
    const std::size_t n_train = rows - std::min(rows, n_test);
    if (options.terminals_per_task > n_train)
      throw std::invalid_argument("partition: task '" + rt.key + "' has " + std::to_string(n_train) +
                                  " training rows for " + std::to_string(options.terminals_per_task) +
                                  " terminals");

    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(options.seed ^ (0x9E3779B97F4A7C15ULL * (b + 1)));
    std::shuffle(order.begin(), order.end(), rng);

    Matrix x(static_cast<Eigen::Index>(rows), d);
    Vector y(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
      const auto& src = rt.rows[order[i]];
      if (src.size() != out.dim) throw DimensionMismatch("partition: ragged row in task '" + rt.key + "'");
      for (Eigen::Index j = 0; j < d; ++j) x(Eigen::Index(i), j) = src[std::size_t(j)];
      y[Eigen::Index(i)] = rt.labels[order[i]];
    }

    const auto tr = static_cast<Eigen::Index>(n_train);
    if (options.standardize) {
      const Eigen::RowVectorXd mean = x.topRows(tr).colwise().mean();
      Eigen::RowVectorXd sd =
          ((x.topRows(tr).rowwise() - mean).array().square().colwise().sum() / double(n_train)).sqrt();
      for (Eigen::Index j = 0; j < d; ++j)
        if (!(sd[j] > 0)) sd[j] = 1.0;
      x = ((x.rowwise() - mean).array().rowwise() / sd.array()).matrix();
    }

    TaskData task;
    const std::size_t nb = options.terminals_per_task;
    std::size_t offset = 0;
    for (std::size_t t = 0; t < nb; ++t) {
      const std::size_t s = n_train / nb + (t < n_train % nb ? 1 : 0);
      const auto o = static_cast<Eigen::Index>(offset);
      const auto len = static_cast<Eigen::Index>(s);
      task.shards.emplace_back(Matrix(x.middleRows(o, len)), Vector(y.segment(o, len)));
      offset += s;
    }
    task.test_features = x.bottomRows(static_cast<Eigen::Index>(rows) - tr);
    task.test_labels = y.tail(static_cast<Eigen::Index>(rows) - tr);
    const double train_sum = y.head(tr).sum();
    task.tie_label = train_sum >= 0 ? 1.0 : -1.0;
    out.tasks.push_back(std::move(task));
  }
  out.validate();
  return out;
}

SynthTable synth_table(const SynthOptions& o) {
  if (!(o.relatedness >= 0.0 && o.relatedness <= 1.0))
    throw std::invalid_argument("synth: relatedness must lie in [0, 1]");
  if (!(o.noise >= 0.0 && o.noise <= 1.0)) throw std::invalid_argument("synth: noise must lie in [0, 1]");
  if (o.dim == 0) throw std::invalid_argument("synth: dim must be >= 1");

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution flip(o.noise);
  const auto d = static_cast<Eigen::Index>(o.dim);

  const auto unit_gaussian = [&] {
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = normal(rng);
    return Vector(v / v.norm());
  };

  SynthTable out;
  for (std::size_t j = 0; j < o.dim; ++j) out.table.feature_names.push_back("x" + std::to_string(j));

  const Vector shared = unit_gaussian();
  for (std::size_t b = 0; b < o.num_tasks; ++b) {
    const Vector own = unit_gaussian();
    Vector w = o.relatedness * shared + (1.0 - o.relatedness) * own;
    if (w.norm() == 0.0) w = shared;
    w.normalize();

    RawTask task{"task" + std::to_string(b), {}, {}};
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < o.samples_per_task; ++i) {
      std::vector<double> row(o.dim);
      double score = 0;
      for (std::size_t j = 0; j < o.dim; ++j) {
        row[j] = normal(rng);
        score += w[Eigen::Index(j)] * row[j];
      }
      double y = score >= 0 ? 1.0 : -1.0;
      if (flip(rng)) {
        y = -y;
        ++flipped;
      }
      task.rows.push_back(std::move(row));
      task.labels.push_back(y);
    }
    out.table.tasks.push_back(std::move(task));
    out.true_weights.push_back(std::move(w));
    out.flipped.push_back(flipped);
  }
  return out;
}

FederatedDataset synth_tasks(const SynthOptions& o) {
  PartitionOptions p;
  p.num_tasks = o.num_tasks;
  p.terminals_per_task = o.terminals_per_task;
  p.test_fraction = o.test_fraction;
  p.seed = o.seed;
  p.standardize = true;
  return partition(synth_table(o).table, p);
}

}  // namespace rhfedmtl
