#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rhfedmtl/errors.hpp"
#include "rhfedmtl/harness.hpp"

namespace {

using namespace rhfedmtl;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kInfeasible = 3;

// Flags are optional so that only the ones given override the config file.
struct Flags {
  std::string config;
  std::optional<std::string> algorithm;
  std::optional<double> budget, c_dev, c_bs;
  std::optional<double> lambda1, lambda2, gamma, eps_d;
  std::optional<std::size_t> server_iterations, k_cap;
  std::optional<std::string> eta_variant, sigma_mode;
  std::optional<std::size_t> tasks, terminals;
  std::optional<double> test_fraction;
  std::optional<std::string> csv, label_column, task_column, positive_label;
  std::optional<std::size_t> samples, dim;
  std::optional<double> relatedness, noise;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> fixed_h;
  std::optional<double> lr;
  bool no_replan = false;
  bool no_standardize = false;
  bool strict = false;
  bool parallel = false;
};

double parse_budget(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw CLI::ValidationError("--budget", "not a number: " + s);
  return v;
}

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--algorithm", f.algorithm, "rhfedmtl | hfedmtl | fedavg");
  app->add_option_function<std::string>("--budget", [&f](const std::string& s) { f.budget = parse_budget(s); },
                                        "resource budget (number or inf)");
  app->add_option("--c-dev", f.c_dev, "cost per terminal iteration");
  app->add_option("--c-bs", f.c_bs, "cost per BS iteration");
  app->add_option("--lambda1", f.lambda1);
  app->add_option("--lambda2", f.lambda2);
  app->add_option("--gamma", f.gamma);
  app->add_option("--eps", f.eps_d, "target duality gap");
  app->add_option("--server-iterations", f.server_iterations, "M");
  app->add_option("--k-cap", f.k_cap, "K limit when the budget is in surplus");
  app->add_option("--eta-variant", f.eta_variant, "theorem | proof");
  app->add_option("--sigma-mode", f.sigma_mode, "safe_bound | brute_force");
  app->add_option("--tasks", f.tasks, "N");
  app->add_option("--terminals", f.terminals, "N_b");
  app->add_option("--test-fraction", f.test_fraction);
  app->add_option("--csv", f.csv, "input CSV (synthetic data when absent)");
  app->add_option("--label-column", f.label_column);
  app->add_option("--task-column", f.task_column);
  app->add_option("--positive-label", f.positive_label);
  app->add_option("--samples", f.samples, "synthetic samples per task");
  app->add_option("--dim", f.dim, "synthetic feature dimension");
  app->add_option("--relatedness", f.relatedness, "synthetic task relatedness rho");
  app->add_option("--noise", f.noise, "synthetic label flip rate");
  app->add_option("--seed", f.seed);
  app->add_option("--fixed-h", f.fixed_h, "H for the baselines");
  app->add_option("--lr", f.lr, "FedAVG learning rate");
  app->add_flag("--no-replan", f.no_replan, "keep the first plan for every server iteration");
  app->add_flag("--no-standardize", f.no_standardize);
  app->add_flag("--strict", f.strict, "exit 3 when the plan is infeasible");
  app->add_flag("--parallel", f.parallel, "run terminals and sweep points concurrently");
}

template <typename T, typename U>
void set(U& dst, const std::optional<T>& v) {
  if (v) dst = *v;
}

ExperimentConfig build_config(const Flags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.algorithm) c.algorithm = parse_algorithm(*f.algorithm);
  if (f.budget) std::fill(c.costs.budget.begin(), c.costs.budget.end(), *f.budget);
  if (f.c_dev) std::fill(c.costs.device.begin(), c.costs.device.end(), *f.c_dev);
  if (f.c_bs) std::fill(c.costs.base_station.begin(), c.costs.base_station.end(), *f.c_bs);
  set(c.system.lambda1, f.lambda1);
  set(c.system.lambda2, f.lambda2);
  set(c.system.gamma, f.gamma);
  set(c.system.eps_d, f.eps_d);
  set(c.system.server_iterations, f.server_iterations);
  set(c.system.k_cap, f.k_cap);
  if (f.eta_variant) merge_json(c, {{"eta_variant", *f.eta_variant}});
  if (f.sigma_mode) merge_json(c, {{"sigma_mode", *f.sigma_mode}});
  set(c.num_tasks, f.tasks);
  set(c.terminals_per_task, f.terminals);
  set(c.test_fraction, f.test_fraction);
  set(c.csv_path, f.csv);
  set(c.csv.label_column, f.label_column);
  set(c.csv.task_column, f.task_column);
  set(c.csv.positive_label, f.positive_label);
  set(c.samples_per_task, f.samples);
  set(c.dim, f.dim);
  set(c.relatedness, f.relatedness);
  set(c.noise, f.noise);
  set(c.seed, f.seed);
  set(c.fixed_h, f.fixed_h);
  set(c.fedavg_lr, f.lr);
  if (f.no_replan) c.replan = false;
  if (f.no_standardize) c.standardize = false;
  if (f.strict) c.strict = true;
  if (f.parallel) c.parallel = true;
  c.validate();
  return c;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_budget(item));
  if (out.empty()) throw std::invalid_argument("empty value list");
  return out;
}

int cmd_run(const Flags& f, const std::string& out_dir) {
  const ExperimentConfig c = build_config(f);
  const FederatedDataset data = load_dataset(c);
  if (c.strict && !plan_report(c, data).plan.feasible) {
    std::cerr << "plan infeasible under the given budget\n";
    return kInfeasible;
  }
  const RunArtifact a = run_experiment(c, data);
  write_artifact(a, out_dir);
  std::cout << "status " << to_string(a.trace.status) << "\n"
            << "sweeps " << a.trace.sweeps << "\n"
            << "mean_accuracy " << a.mean_accuracy << "\n"
            << "consumed " << (a.trace.consumed.empty() ? 0.0 : a.trace.consumed.front()) << "\n";
  return 0;
}

int cmd_plan(const Flags& f) {
  const ExperimentConfig c = build_config(f);
  const PlanReport r = plan_report(c, load_dataset(c));
  write_plan_report(r, std::cout);
  return c.strict && !r.plan.feasible ? kInfeasible : 0;
}

int cmd_sweep(const Flags& f, const std::vector<std::string>& axes, const std::vector<std::string>& algorithms,
              const std::string& seeds, const std::string& out_dir) {
  const ExperimentConfig c = build_config(f);
  SweepSpec spec;
  for (const auto& a : axes) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--axis", "expected name=v1,v2,...: " + a);
    spec.axes.push_back({parse_axis(a.substr(0, eq)), parse_values(a.substr(eq + 1))});
  }
  if (spec.axes.empty()) throw CLI::ValidationError("--axis", "at least one axis is required");
  spec.algorithms.clear();
  for (const auto& name : algorithms) spec.algorithms.push_back(parse_algorithm(name));
  if (spec.algorithms.empty()) spec.algorithms.push_back(c.algorithm);
  spec.seeds.clear();
  for (double s : parse_values(seeds)) spec.seeds.push_back(static_cast<std::uint64_t>(s));
  spec.parallel = c.parallel;

  const auto rows = sweep(c, spec);
  std::filesystem::create_directories(out_dir);
  std::ostringstream runs, agg;
  write_sweep_csv(spec, rows, runs);
  write_sweep_aggregate(spec, rows, agg);
  write_file_atomic((std::filesystem::path(out_dir) / "sweep.csv").string(), runs.str());
  write_file_atomic((std::filesystem::path(out_dir) / "aggregate.csv").string(), agg.str());
  std::cout << agg.str();
  return 0;
}

int cmd_synth(const Flags& f, const std::string& out) {
  const ExperimentConfig c = build_config(f);
  const SynthTable t = synth_table(c.synth_options());
  std::ostringstream csv;
  write_csv(t.table, csv);
  if (out == "-") {
    std::cout << csv.str();
  } else {
    write_file_atomic(out, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resource-aware hierarchical federated multi-task learning simulator"};
  app.require_subcommand(1);

  Flags run_flags, plan_flags, sweep_flags, synth_flags;
  std::string run_out = "out", sweep_out = "sweep_out", synth_out = "-";
  std::vector<std::string> axes, algorithms;
  std::string seeds = "0";

  auto* run = app.add_subcommand("run", "train once and write metrics.csv and summary.json");
  add_flags(run, run_flags);
  run->add_option("--out", run_out, "output directory");

  auto* plan = app.add_subcommand("plan", "print the chosen H and K and the f(H) table");
  add_flags(plan, plan_flags);

  auto* sw = app.add_subcommand("sweep", "grid of runs over one or more axes");
  add_flags(sw, sweep_flags);
  sw->add_option("--axis", axes, "name=v1,v2,... (budget, terminals, tasks, c_dev, lambda1, lambda2)")->required();
  sw->add_option("--algorithms", algorithms, "algorithms to compare")->delimiter(',');
  sw->add_option("--seeds", seeds, "comma separated seeds");
  sw->add_option("--out", sweep_out, "output directory");

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset as CSV");
  add_flags(synth, synth_flags);
  synth->add_option("--out", synth_out, "output file, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }

  try {
    if (*run) return cmd_run(run_flags, run_out);
    if (*plan) return cmd_plan(plan_flags);
    if (*sw) return cmd_sweep(sweep_flags, axes, algorithms, seeds, sweep_out);
    if (*synth) return cmd_synth(synth_flags, synth_out);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
