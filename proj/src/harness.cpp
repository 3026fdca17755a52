#include "rhfedmtl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <sstream>

#include "rhfedmtl/errors.hpp"

namespace rhfedmtl {

using nlohmann::json;

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::rhfedmtl: return "rhfedmtl";
    case Algorithm::hfedmtl: return "hfedmtl";
    case Algorithm::fedavg: return "fedavg";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "rhfedmtl") return Algorithm::rhfedmtl;
  if (name == "hfedmtl") return Algorithm::hfedmtl;
  if (name == "fedavg") return Algorithm::fedavg;
  throw std::invalid_argument("unknown algorithm '" + name + "' (rhfedmtl, hfedmtl, fedavg)");
}

void ExperimentConfig::validate() const {
  system.validate();
  costs.validate();
  if (num_tasks < 1) throw std::invalid_argument("num_tasks must be >= 1");
  if (terminals_per_task < 1) throw std::invalid_argument("terminals_per_task must be >= 1");
  if (!(test_fraction >= 0 && test_fraction < 1)) throw std::invalid_argument("test_fraction must lie in [0, 1)");
  if (fixed_h < 1) throw std::invalid_argument("fixed_h must be >= 1");
  if (!(fedavg_lr >= 0) || !std::isfinite(fedavg_lr)) throw std::invalid_argument("fedavg_lr must be >= 0");
  if (csv_path.empty()) {
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (!(relatedness >= 0 && relatedness <= 1)) throw std::invalid_argument("relatedness must lie in [0, 1]");
    if (!(noise >= 0 && noise <= 1)) throw std::invalid_argument("noise must lie in [0, 1]");
  }
}

SynthOptions ExperimentConfig::synth_options() const {
  SynthOptions o;
  o.num_tasks = num_tasks;
  o.terminals_per_task = terminals_per_task;
  o.samples_per_task = samples_per_task;
  o.dim = dim;
  o.relatedness = relatedness;
  o.noise = noise;
  o.test_fraction = test_fraction;
  o.seed = seed;
  return o;
}

namespace {

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_number(const json& j, const std::string& key) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ParseError("config: '" + key + "' must be a number or \"inf\"");
  }
  if (!j.is_number()) throw ParseError("config: '" + key + "' must be a number");
  return j.get<double>();
}

std::vector<double> read_numbers(const json& j, const std::string& key) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(read_number(v, key));
  } else {
    out.push_back(read_number(j, key));
  }
  return out;
}

template <typename T>
T read(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ParseError("config: '" + key + "' has the wrong type");
  }
}

std::size_t read_count(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw ParseError("config: '" + key + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace

void merge_json(ExperimentConfig& c, const json& j) {
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "algorithm") c.algorithm = parse_algorithm(read<std::string>(v, key));
    else if (key == "lambda1") c.system.lambda1 = read_number(v, key);
    else if (key == "lambda2") c.system.lambda2 = read_number(v, key);
    else if (key == "gamma") c.system.gamma = read_number(v, key);
    else if (key == "eps_d") c.system.eps_d = read_number(v, key);
    else if (key == "server_iterations") c.system.server_iterations = read_count(v, key);
    else if (key == "k_cap") c.system.k_cap = read_count(v, key);
    else if (key == "eta_variant") {
      const auto s = read<std::string>(v, key);
      if (s == "theorem") c.system.eta_variant = EtaVariant::theorem;
      else if (s == "proof") c.system.eta_variant = EtaVariant::proof;
      else throw ParseError("config: eta_variant must be \"theorem\" or \"proof\"");
    } else if (key == "sigma_mode") {
      const auto s = read<std::string>(v, key);
      if (s == "safe_bound") c.system.sigma_mode = SigmaMode::safe_bound;
      else if (s == "brute_force") c.system.sigma_mode = SigmaMode::brute_force;
      else throw ParseError("config: sigma_mode must be \"safe_bound\" or \"brute_force\"");
    } else if (key == "costs") {
      if (!v.is_object()) throw ParseError("config: 'costs' must be an object");
      for (const auto& [ck, cv] : v.items()) {
        if (ck == "device") c.costs.device = read_numbers(cv, "costs.device");
        else if (ck == "base_station") c.costs.base_station = read_numbers(cv, "costs.base_station");
        else if (ck == "budget") c.costs.budget = read_numbers(cv, "costs.budget");
        else throw ParseError("config: unknown key 'costs." + ck + "'");
      }
    } else if (key == "num_tasks") c.num_tasks = read_count(v, key);
    else if (key == "terminals_per_task") c.terminals_per_task = read_count(v, key);
    else if (key == "test_fraction") c.test_fraction = read_number(v, key);
    else if (key == "standardize") c.standardize = read<bool>(v, key);
    else if (key == "csv") c.csv_path = read<std::string>(v, key);
    else if (key == "label_column") c.csv.label_column = read<std::string>(v, key);
    else if (key == "task_column") c.csv.task_column = read<std::string>(v, key);
    else if (key == "positive_label") c.csv.positive_label = read<std::string>(v, key);
    else if (key == "samples_per_task") c.samples_per_task = read_count(v, key);
    else if (key == "dim") c.dim = read_count(v, key);
    else if (key == "relatedness") c.relatedness = read_number(v, key);
    else if (key == "noise") c.noise = read_number(v, key);
    else if (key == "seed") c.seed = read<std::uint64_t>(v, key);
    else if (key == "fixed_h") c.fixed_h = read_count(v, key);
    else if (key == "fedavg_lr") c.fedavg_lr = read_number(v, key);
    else if (key == "replan") c.replan = read<bool>(v, key);
    else if (key == "strict") c.strict = read<bool>(v, key);
    else if (key == "parallel") c.parallel = read<bool>(v, key);
    else throw ParseError("config: unknown key '" + key + "'");
  }
}

json to_json(const ExperimentConfig& c) {
  json costs;
  costs["device"] = c.costs.device;
  costs["base_station"] = c.costs.base_station;
  json budget = json::array();
  for (double b : c.costs.budget) budget.push_back(number_or_inf(b));
  costs["budget"] = budget;

  json j;
  j["algorithm"] = to_string(c.algorithm);
  j["lambda1"] = c.system.lambda1;
  j["lambda2"] = c.system.lambda2;
  j["gamma"] = c.system.gamma;
  j["eps_d"] = c.system.eps_d;
  j["server_iterations"] = c.system.server_iterations;
  j["k_cap"] = c.system.k_cap;
  j["eta_variant"] = c.system.eta_variant == EtaVariant::theorem ? "theorem" : "proof";
  j["sigma_mode"] = c.system.sigma_mode == SigmaMode::safe_bound ? "safe_bound" : "brute_force";
  j["costs"] = costs;
  j["num_tasks"] = c.num_tasks;
  j["terminals_per_task"] = c.terminals_per_task;
  j["test_fraction"] = c.test_fraction;
  j["standardize"] = c.standardize;
  if (!c.csv_path.empty()) {
    j["csv"] = c.csv_path;
    j["label_column"] = c.csv.label_column;
    j["task_column"] = c.csv.task_column;
    j["positive_label"] = c.csv.positive_label;
  } else {
    j["samples_per_task"] = c.samples_per_task;
    j["dim"] = c.dim;
    j["relatedness"] = c.relatedness;
    j["noise"] = c.noise;
  }
  j["seed"] = c.seed;
  j["fixed_h"] = c.fixed_h;
  j["fedavg_lr"] = c.fedavg_lr;
  j["replan"] = c.replan;
  j["strict"] = c.strict;
  j["parallel"] = c.parallel;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config: " + path + ": " + e.what());
  }
  ExperimentConfig c;
  merge_json(c, j);
  return c;
}

FederatedDataset load_dataset(const ExperimentConfig& config) {
  if (config.csv_path.empty()) {
    SynthOptions o = config.synth_options();
    FederatedDataset data = synth_tasks(o);
    if (!config.standardize) {
      PartitionOptions p{o.num_tasks, o.terminals_per_task, o.test_fraction, o.seed, false};
      data = partition(synth_table(o).table, p);
    }
    return data;
  }
  const RawTable raw = load_csv(config.csv_path, config.csv);
  PartitionOptions p{config.num_tasks, config.terminals_per_task, config.test_fraction, config.seed,
                     config.standardize};
  return partition(raw, p);
}

namespace {

RunArtifact finish(const ExperimentConfig& config, const FederatedDataset& data, RunTrace trace) {
  RunArtifact a;
  a.config = config;
  a.accuracy = trace.accuracy;
  double sum = 0;
  for (double acc : a.accuracy) sum += acc;
  a.mean_accuracy = a.accuracy.empty() ? 0.0 : sum / static_cast<double>(a.accuracy.size());
  a.fingerprint = data.fingerprint();
  a.trace = std::move(trace);
  return a;
}

EngineOptions engine_options(const ExperimentConfig& config) {
  EngineOptions o;
  o.root_seed = config.seed;
  o.replan = config.replan;
  o.parallel = config.parallel;
  return o;
}

}  // namespace

RunArtifact run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, load_dataset(config));
}

RunArtifact run_experiment(const ExperimentConfig& config, const FederatedDataset& data) {
  config.validate();
  switch (config.algorithm) {
    case Algorithm::hfedmtl: return baseline_hfedmtl(config, data);
    case Algorithm::fedavg: return baseline_fedavg(config, data);
    case Algorithm::rhfedmtl: break;
  }
  EngineOptions o = engine_options(config);
  o.planner = adaptive_planner(config.system.k_cap);
  return finish(config, data, run(config.system, config.costs, data, o));
}

RunArtifact baseline_hfedmtl(const ExperimentConfig& config, const FederatedDataset& data) {
  config.validate();
  EngineOptions o = engine_options(config);
  o.planner = fixed_planner(config.fixed_h);
  return finish(config, data, run(config.system, config.costs, data, o));
}

namespace {

// H full-gradient steps on (1/S) sum phi(y x'w) + lambda1/2 ||w||^2.
Vector fedavg_local(const TerminalShard& shard, Vector w, const SmoothedHinge<>& loss, double lambda1, double lr,
                    std::size_t steps) {
  const Matrix& x = shard.features();
  const Vector& y = shard.labels();
  const double inv = 1.0 / static_cast<double>(shard.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const Vector margins = (x * w).cwiseProduct(y);
    Vector coeff(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) coeff[i] = loss.derivative(margins[i]) * y[i];
    const Vector grad = inv * (x.transpose() * coeff) + lambda1 * w;
    w -= lr * grad;
  }
  return w;
}

}  // namespace

RunArtifact baseline_fedavg(const ExperimentConfig& config, const FederatedDataset& data) {
  config.validate();
  data.validate();
  const SystemConfig& sys = config.system;
  const SmoothedHinge<> loss(sys.gamma);
  const PlanningModel model = planning_model(sys, data);
  const ResourcePlan plan = fixed_plan(config.fixed_h, config.costs, sys.target(), model);
  const std::vector<double> cost = sweep_cost(plan.h_per_task, config.costs, data);
  const RegulationParams ridge{sys.lambda1, 0.0, Vector::Zero(static_cast<Eigen::Index>(data.dim))};
  const double nan = std::numeric_limits<double>::quiet_NaN();

  RunTrace trace;
  trace.plans.push_back(plan);
  trace.consumed.assign(config.costs.types(), 0.0);
  Vector w = Vector::Zero(static_cast<Eigen::Index>(data.dim));

  bool stopped = false;
  for (std::size_t m = 0; m < sys.server_iterations && !stopped; ++m) {
    for (std::size_t k = 0; k < plan.k; ++k) {
      bool fits = true;
      for (std::size_t j = 0; j < config.costs.types(); ++j) {
        const double budget = config.costs.budget[j];
        if (trace.consumed[j] + cost[j] > budget + 1e-9 * std::max(1.0, budget)) fits = false;
      }
      if (!fits) {
        trace.status = RunStatus::budget_exhausted;
        stopped = true;
        break;
      }

      Vector next = Vector::Zero(w.size());
      double total = 0;
      for (std::size_t b = 0; b < data.num_tasks(); ++b)
        for (const auto& shard : data.tasks[b].shards) {
          const double weight = static_cast<double>(shard.size());
          next += weight * fedavg_local(shard, w, loss, sys.lambda1, config.fedavg_lr, plan.h_per_task[b]);
          total += weight;
        }
      w = next / total;
      for (std::size_t j = 0; j < config.costs.types(); ++j) trace.consumed[j] += cost[j];

      for (std::size_t b = 0; b < data.num_tasks(); ++b) {
        RoundReport r;
        r.m = m;
        r.b = b;
        r.k = k;
        r.h = plan.h_per_task[b];
        r.dual = nan;
        r.gap = nan;
        r.mapping_error = nan;
        r.primal = task_primal(w, ridge, data.tasks[b], loss);
        r.accuracy = test_accuracy(w, data.tasks[b]);
        r.consumed = trace.consumed;
        trace.rounds.push_back(std::move(r));
      }
      ++trace.sweeps;
      trace.gap_history.push_back(nan);
    }
  }
  for (const auto& task : data.tasks) trace.accuracy.push_back(test_accuracy(w, task));
  return finish(config, data, std::move(trace));
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json plan_json(const ResourcePlan& p) {
  json j;
  j["h_per_task"] = p.h_per_task;
  j["k"] = p.k;
  j["regime"] = to_string(p.regime);
  j["feasible"] = p.feasible;
  j["binding"] = p.binding ? json(*p.binding) : json(nullptr);
  j["projected_cost"] = p.projected_cost;
  j["k_bound"] = p.k_bound;
  j["k_budget"] = number_or_inf(p.k_budget);
  return j;
}

}  // namespace

void write_metrics_csv(const RunArtifact& a, std::ostream& out) {
  out << "m,b,k,h,dual,primal,gap,accuracy";
  for (std::size_t j = 0; j < a.config.costs.types(); ++j) out << ",consumed_" << j;
  out << '\n';
  for (const auto& r : a.trace.rounds) {
    out << r.m << ',' << r.b << ',' << r.k << ',' << r.h << ',' << fmt(r.dual) << ',' << fmt(r.primal) << ','
        << fmt(r.gap) << ',' << fmt(r.accuracy);
    for (double c : r.consumed) out << ',' << fmt(c);
    out << '\n';
  }
}

json summary_json(const RunArtifact& a) {
  json j;
  j["config"] = to_json(a.config);
  j["dataset_fingerprint"] = hex64(a.fingerprint);
  j["accuracy"] = a.accuracy;
  j["mean_accuracy"] = a.mean_accuracy;
  j["consumed"] = a.trace.consumed;
  json plans = json::array();
  for (const auto& p : a.trace.plans) plans.push_back(plan_json(p));
  j["plans"] = plans;
  j["status"] = to_string(a.trace.status);
  j["sweeps"] = a.trace.sweeps;
  j["bs_iterations"] = a.trace.rounds.size();
  const double last = a.trace.gap_history.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                  : a.trace.gap_history.back();
  j["final_gap"] = std::isnan(last) ? json(nullptr) : json(last);
  return j;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

void write_artifact(const RunArtifact& a, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream metrics;
  write_metrics_csv(a, metrics);
  write_file_atomic((std::filesystem::path(dir) / "metrics.csv").string(), metrics.str());
  write_file_atomic((std::filesystem::path(dir) / "summary.json").string(), summary_json(a).dump(2) + "\n");
}

PlanReport plan_report(const ExperimentConfig& config, const FederatedDataset& data) {
  config.validate();
  PlanReport r;
  r.model = planning_model(config.system, data);
  const ConvergenceTarget target = config.system.target();
  r.plan = config.algorithm == Algorithm::rhfedmtl
               ? select_plan(config.costs, target, r.model, r.model.h_max(), config.system.k_cap)
               : fixed_plan(config.fixed_h, config.costs, target, r.model);
  for (std::size_t h = 1; h <= r.model.h_max(); ++h) {
    PlanRow row;
    row.h = h;
    for (std::size_t j = 0; j < config.costs.types(); ++j) row.cost.push_back(cost_f(h, config.costs, target, r.model, j));
    row.theta_max = r.model.theta_max(h);
    row.k_bound = r.model.k_bound(h, config.system.eps_d);
    const std::vector<std::size_t> uniform(r.model.tasks.size(), h);
    row.feasible = feasible(uniform, config.costs, target, r.model).feasible;
    r.table.push_back(std::move(row));
  }
  return r;
}

void write_plan_report(const PlanReport& r, std::ostream& out) {
  const auto& p = r.plan;
  out << "# H " << (p.h_per_task.empty() ? 0 : p.h_per_task.front()) << '\n'
      << "# K " << p.k << '\n'
      << "# regime " << to_string(p.regime) << '\n'
      << "# feasible " << (p.feasible ? "true" : "false") << '\n'
      << "# k_bound " << p.k_bound << '\n'
      << "# k_budget " << fmt(p.k_budget) << '\n'
      << "# sigma " << fmt(r.model.sigma) << '\n'
      << "# eta_star " << fmt(r.model.eta_star()) << '\n';
  out << "h";
  const std::size_t types = r.table.empty() ? 0 : r.table.front().cost.size();
  for (std::size_t j = 0; j < types; ++j) out << ",f_" << j;
  out << ",theta,k_bound,feasible\n";
  for (const auto& row : r.table) {
    out << row.h;
    for (double c : row.cost) out << ',' << fmt(c);
    out << ',' << fmt(row.theta_max) << ',' << row.k_bound << ',' << (row.feasible ? 1 : 0) << '\n';
  }
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::budget: return "budget";
    case SweepAxis::terminals: return "terminals";
    case SweepAxis::tasks: return "tasks";
    case SweepAxis::c_dev: return "c_dev";
    case SweepAxis::lambda1: return "lambda1";
    case SweepAxis::lambda2: return "lambda2";
  }
  return "unknown";
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "budget") return SweepAxis::budget;
  if (name == "terminals" || name == "N_b") return SweepAxis::terminals;
  if (name == "tasks" || name == "N") return SweepAxis::tasks;
  if (name == "c_dev") return SweepAxis::c_dev;
  if (name == "lambda1") return SweepAxis::lambda1;
  if (name == "lambda2") return SweepAxis::lambda2;
  throw std::invalid_argument("unknown sweep axis '" + name + "' (budget, terminals, tasks, c_dev, lambda1, lambda2)");
}

namespace {

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1) || v != std::floor(v) || !std::isfinite(v))
    throw std::invalid_argument(std::string("sweep: ") + what + " values must be positive integers");
  return static_cast<std::size_t>(v);
}

}  // namespace

void apply_axis(ExperimentConfig& c, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::budget: std::fill(c.costs.budget.begin(), c.costs.budget.end(), value); break;
    case SweepAxis::terminals: c.terminals_per_task = as_count(value, "terminals"); break;
    case SweepAxis::tasks: c.num_tasks = as_count(value, "tasks"); break;
    case SweepAxis::c_dev: std::fill(c.costs.device.begin(), c.costs.device.end(), value); break;
    case SweepAxis::lambda1: c.system.lambda1 = value; break;
    case SweepAxis::lambda2: c.system.lambda2 = value; break;
  }
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepSpec& spec) {
  for (const auto& a : spec.axes)
    if (a.values.empty()) throw std::invalid_argument(std::string("sweep: axis '") + to_string(a.axis) + "' has no values");
  if (spec.algorithms.empty() || spec.seeds.empty()) throw std::invalid_argument("sweep: no algorithms or seeds");

  std::vector<std::vector<double>> points{{}};
  for (const auto& a : spec.axes) {
    std::vector<std::vector<double>> next;
    for (const auto& p : points)
      for (double v : a.values) {
        next.push_back(p);
        next.back().push_back(v);
      }
    points = std::move(next);
  }

  struct Job {
    std::vector<double> point;
    Algorithm algorithm;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& p : points)
    for (Algorithm alg : spec.algorithms)
      for (std::uint64_t s : spec.seeds) jobs.push_back({p, alg, s});

  const auto execute = [&](const Job& job) {
    ExperimentConfig c = base;
    for (std::size_t i = 0; i < spec.axes.size(); ++i) apply_axis(c, spec.axes[i].axis, job.point[i]);
    c.algorithm = job.algorithm;
    c.seed = job.seed;
    const RunArtifact a = run_experiment(c);
    SweepRow row;
    row.point = job.point;
    row.algorithm = job.algorithm;
    row.seed = job.seed;
    row.mean_accuracy = a.mean_accuracy;
    row.consumed = a.trace.consumed;
    const ResourcePlan& plan = a.trace.plans.front();
    row.h = plan.h_per_task.front();
    row.k = plan.k;
    row.regime = plan.regime;
    row.feasible = plan.feasible;
    row.status = a.trace.status;
    row.sweeps = a.trace.sweeps;
    row.final_gap = a.trace.gap_history.empty() ? std::numeric_limits<double>::quiet_NaN() : a.trace.gap_history.back();
    return row;
  };

  std::vector<SweepRow> rows;
  rows.reserve(jobs.size());
  if (spec.parallel) {
    std::vector<std::future<SweepRow>> pending;
    for (const auto& job : jobs) pending.push_back(std::async(std::launch::async, execute, std::cref(job)));
    for (auto& p : pending) rows.push_back(p.get());
  } else {
    for (const auto& job : jobs) rows.push_back(execute(job));
  }
  return rows;
}

void write_sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows, std::ostream& out) {
  for (const auto& a : spec.axes) out << to_string(a.axis) << ',';
  out << "algorithm,seed,mean_accuracy,h,k,regime,feasible,status,sweeps,final_gap";
  const std::size_t types = rows.empty() ? 0 : rows.front().consumed.size();
  for (std::size_t j = 0; j < types; ++j) out << ",consumed_" << j;
  out << '\n';
  for (const auto& r : rows) {
    for (double v : r.point) out << fmt(v) << ',';
    out << to_string(r.algorithm) << ',' << r.seed << ',' << fmt(r.mean_accuracy) << ',' << r.h << ',' << r.k << ','
        << to_string(r.regime) << ',' << (r.feasible ? 1 : 0) << ',' << to_string(r.status) << ',' << r.sweeps
        << ',' << fmt(r.final_gap);
    for (double c : r.consumed) out << ',' << fmt(c);
    out << '\n';
  }
}

void write_sweep_aggregate(const SweepSpec& spec, const std::vector<SweepRow>& rows, std::ostream& out) {
  for (const auto& a : spec.axes) out << to_string(a.axis) << ',';
  out << "algorithm,runs,mean_accuracy,std_accuracy,mean_h,mean_k,mean_consumed_0\n";

  std::vector<std::pair<std::vector<double>, Algorithm>> order;
  std::map<std::pair<std::vector<double>, int>, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.point, static_cast<int>(r.algorithm));
    if (!groups.count(key)) order.emplace_back(r.point, r.algorithm);
    groups[key].push_back(&r);
  }
  for (const auto& [point, alg] : order) {
    const auto& g = groups[{point, static_cast<int>(alg)}];
    const double n = static_cast<double>(g.size());
    double mean = 0, h = 0, k = 0, consumed = 0;
    for (const auto* r : g) {
      mean += r->mean_accuracy;
      h += static_cast<double>(r->h);
      k += static_cast<double>(r->k);
      consumed += r->consumed.empty() ? 0.0 : r->consumed.front();
    }
    mean /= n;
    double var = 0;
    for (const auto* r : g) var += (r->mean_accuracy - mean) * (r->mean_accuracy - mean);
    const double sd = g.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    for (double v : point) out << fmt(v) << ',';
    out << to_string(alg) << ',' << g.size() << ',' << fmt(mean) << ',' << fmt(sd) << ',' << fmt(h / n) << ','
        << fmt(k / n) << ',' << fmt(consumed / n) << '\n';
  }
}

}  // namespace rhfedmtl
