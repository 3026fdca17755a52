#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "rhfedmtl/errors.hpp"
#include "rhfedmtl/harness.hpp"

using namespace rhfedmtl;
namespace fs = std::filesystem;

namespace {

std::string metrics(const RunArtifact& a) {
  std::ostringstream out;
  write_metrics_csv(a, out);
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rhfedmtl_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(RHFEDMTL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("defaults follow the reference settings") {
  const ExperimentConfig c;
  CHECK(c.fixed_h == 2);
  CHECK(c.costs.budget == std::vector<double>{1400});
  CHECK(c.costs.device == std::vector<double>{0.1});
  CHECK(c.costs.base_station == std::vector<double>{10});
  CHECK(c.num_tasks == 5);
  CHECK(c.terminals_per_task == 5);
  CHECK(c.system.gamma == 1.0);
  CHECK(c.system.lambda1 == 1e-4);
  CHECK(c.system.lambda2 == 1e-6);
}

TEST_CASE("default run stays within budget") {
  const RunArtifact a = run_experiment(ExperimentConfig{});
  CHECK(a.trace.consumed.front() <= 1400);
  double sum = 0;
  for (double acc : a.accuracy) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    sum += acc;
  }
  CHECK(a.mean_accuracy == doctest::Approx(sum / 5).epsilon(1e-15));
}

TEST_CASE("config JSON") {
  ExperimentConfig c;
  c.algorithm = Algorithm::fedavg;
  c.costs.budget = {std::numeric_limits<double>::infinity()};
  c.system.eta_variant = EtaVariant::proof;
  c.seed = 77;
  ExperimentConfig back;
  merge_json(back, to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(std::isinf(back.costs.budget.front()));

  ExperimentConfig partial;
  merge_json(partial, nlohmann::json::parse(R"({"lambda1": 0.5, "costs": {"budget": 300}})"));
  CHECK(partial.system.lambda1 == 0.5);
  CHECK(partial.costs.budget == std::vector<double>{300});
  CHECK(partial.costs.device == std::vector<double>{0.1});

  CHECK_THROWS_AS(merge_json(partial, nlohmann::json::parse(R"({"lamda1": 1})")), ParseError);
  CHECK_THROWS_AS(merge_json(partial, nlohmann::json::parse(R"({"dim": -3})")), ParseError);
  CHECK_THROWS_AS(merge_json(partial, nlohmann::json::parse(R"({"algorithm": "sgd"})")), std::invalid_argument);
}

TEST_CASE("HFedMTL baseline") {
  ExperimentConfig c;
  c.algorithm = Algorithm::hfedmtl;
  const FederatedDataset data = load_dataset(c);
  const RunArtifact a = run_experiment(c, data);
  CHECK(a.trace.plans.front().k == 25);
  CHECK(a.trace.sweeps == 25);
  CHECK(a.trace.consumed.front() == doctest::Approx(25 * 55.0).epsilon(1e-12));

  SUBCASE("same H as the planner gives the same trajectory") {
    ExperimentConfig r;
    const RunArtifact adaptive = run_experiment(r, data);
    ExperimentConfig h = r;
    h.algorithm = Algorithm::hfedmtl;
    h.fixed_h = adaptive.trace.plans.front().h_per_task.front();
    const RunArtifact fixed = run_experiment(h, data);
    REQUIRE(adaptive.trace.plans.front().k == fixed.trace.plans.front().k);
    CHECK(metrics(adaptive) == metrics(fixed));
  }
  SUBCASE("zero budget keeps the initial models") {
    ExperimentConfig z = c;
    z.costs.budget = {0};
    const RunArtifact none = run_experiment(z, data);
    CHECK(none.trace.sweeps == 0);
    for (std::size_t b = 0; b < 5; ++b) CHECK(none.accuracy[b] == test_accuracy(Vector::Zero(10), data.tasks[b]));
  }
}

TEST_CASE("FedAVG baseline") {
  ExperimentConfig c;
  c.algorithm = Algorithm::fedavg;
  const FederatedDataset data = load_dataset(c);
  SUBCASE("charged like the fixed-H engine") {
    const RunArtifact a = run_experiment(c, data);
    CHECK(a.trace.sweeps == 25);
    CHECK(a.trace.consumed.front() == doctest::Approx(1375).epsilon(1e-12));
    const std::string m = metrics(a);
    CHECK(m.find("0,0,0,2,,") != std::string::npos);  // dual cell is empty
  }
  SUBCASE("learning rate 0 keeps the initial model") {
    ExperimentConfig z = c;
    z.fedavg_lr = 0;
    const RunArtifact a = run_experiment(z, data);
    for (std::size_t b = 0; b < 5; ++b) CHECK(a.accuracy[b] == test_accuracy(Vector::Zero(10), data.tasks[b]));
    for (const auto& r : a.trace.rounds) CHECK(r.primal == 0.5);
  }
  SUBCASE("one shared model suffers on heterogeneous tasks") {
    const auto accuracy_at = [&](double rho) {
      ExperimentConfig x = c;
      x.relatedness = rho;
      return run_experiment(x).mean_accuracy;
    };
    CHECK(accuracy_at(1.0) >= accuracy_at(0.3) + 0.1);
  }
}

TEST_CASE("artifacts are deterministic and written atomically") {
  ExperimentConfig c;
  c.system.server_iterations = 2;
  const RunArtifact a = run_experiment(c), b = run_experiment(c);
  CHECK(metrics(a) == metrics(b));
  CHECK(summary_json(a).dump() == summary_json(b).dump());

  const fs::path dir = scratch("artifact");
  write_artifact(a, dir.string());
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK_FALSE(fs::exists(dir / "metrics.csv.tmp"));
  std::ifstream in(dir / "summary.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["status"] == to_string(a.trace.status));
  CHECK(j["accuracy"].size() == 5);
  CHECK(j["dataset_fingerprint"].get<std::string>().size() == 16);
  std::ifstream m(dir / "metrics.csv");
  std::string header;
  std::getline(m, header);
  CHECK(header == "m,b,k,h,dual,primal,gap,accuracy,consumed_0");
  fs::remove_all(dir);
}

TEST_CASE("plan report") {
  const ExperimentConfig c;
  const PlanReport r = plan_report(c, load_dataset(c));
  CHECK(r.table.size() == 70);
  CHECK(r.plan.regime == Regime::balanced);
  std::ostringstream out;
  write_plan_report(r, out);
  CHECK(out.str().find("h,f_0,theta,k_bound,feasible\n1,") != std::string::npos);
}

TEST_CASE("sweeps") {
  ExperimentConfig base;
  base.samples_per_task = 84;
  SUBCASE("single-value sweep equals a run") {
    SweepSpec spec;
    spec.axes = {{SweepAxis::budget, {700}}};
    const auto rows = sweep(base, spec);
    REQUIRE(rows.size() == 1);
    ExperimentConfig c = base;
    c.costs.budget = {700};
    const RunArtifact a = run_experiment(c);
    CHECK(rows[0].mean_accuracy == a.mean_accuracy);
    CHECK(rows[0].consumed == a.trace.consumed);
  }
  SUBCASE("budget grid shape, serial and parallel agree") {
    SweepSpec spec;
    spec.axes = {{SweepAxis::budget, {200, 400, 600, 800, 1000, 1200, 1400, 1600}}, {SweepAxis::terminals, {5, 10}}};
    spec.algorithms = {Algorithm::rhfedmtl, Algorithm::hfedmtl, Algorithm::fedavg};
    const auto rows = sweep(base, spec);
    CHECK(rows.size() == 8 * 2 * 3);
    spec.parallel = true;
    const auto again = sweep(base, spec);
    std::ostringstream x, y;
    write_sweep_csv(spec, rows, x);
    write_sweep_csv(spec, again, y);
    CHECK(x.str() == y.str());
    std::ostringstream agg;
    write_sweep_aggregate(spec, rows, agg);
    std::size_t lines = 0;
    for (char ch : agg.str()) lines += ch == '\n';
    CHECK(lines == 1 + 8 * 2 * 3);
  }
  SUBCASE("seeds aggregate to mean and spread") {
    SweepSpec spec;
    spec.axes = {{SweepAxis::lambda1, {1e-4}}};
    spec.seeds = {1, 2, 3};
    const auto rows = sweep(base, spec);
    std::ostringstream agg;
    write_sweep_aggregate(spec, rows, agg);
    CHECK(agg.str().find("rhfedmtl,3,") != std::string::npos);
  }
  SUBCASE("axis parsing") {
    CHECK(parse_axis("N_b") == SweepAxis::terminals);
    CHECK(parse_axis("lambda2") == SweepAxis::lambda2);
    CHECK_THROWS(parse_axis("gamma"));
    ExperimentConfig c = base;
    CHECK_THROWS(apply_axis(c, SweepAxis::tasks, 2.5));
  }
}

TEST_CASE("lambda1 too large degrades accuracy") {
  ExperimentConfig base;
  base.relatedness = 0.3;
  SweepSpec spec;
  spec.axes = {{SweepAxis::lambda1, {1e-4, 1e-2, 1.0, 100.0}}};
  spec.seeds = {0, 1, 2};
  const auto rows = sweep(base, spec);
  std::vector<double> mean(4, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < 4; ++i)
      if (r.point[0] == spec.axes[0].values[i]) mean[i] += r.mean_accuracy / 3;
  CHECK(mean[3] < *std::max_element(mean.begin(), mean.end()));
}

TEST_CASE("command line") {
  CHECK(cli("plan") == 0);
  CHECK(cli("plan --budget 50 --strict") == 3);
  CHECK(cli("plan --budget inf") == 0);
  CHECK(cli("plan --no-such-flag") == 1);
  CHECK(cli("") == 1);
  CHECK(cli("run --lambda1 -1 --out /tmp/rhfedmtl_cli_bad") == 1);
  CHECK(cli("run --csv /nonexistent.csv --out /tmp/rhfedmtl_cli_bad") != 0);

  const fs::path dir = scratch("cli");
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"algorithm": "hfedmtl", "costs": {"budget": 550}, "samples_per_task": 84})";
  }
  CHECK(cli("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "run").string()) == 0);
  std::ifstream in(dir / "run" / "summary.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["config"]["algorithm"] == "hfedmtl");
  CHECK(j["sweeps"] == 10);

  // Flags win over the file.
  CHECK(cli("run --config " + (dir / "cfg.json").string() + " --budget 110 --out " + (dir / "run2").string()) == 0);
  std::ifstream in2(dir / "run2" / "summary.json");
  CHECK(nlohmann::json::parse(in2)["sweeps"] == 2);

  CHECK(cli("synth --tasks 2 --samples 10 --out " + (dir / "d.csv").string()) == 0);
  CHECK(cli("run --csv " + (dir / "d.csv").string() + " --tasks 2 --terminals 2 --out " + (dir / "run3").string()) == 0);
  CHECK(cli("sweep --axis budget=100,200 --algorithms rhfedmtl,fedavg --samples 84 --out " + (dir / "sw").string()) == 0);
  CHECK(fs::exists(dir / "sw" / "aggregate.csv"));
  fs::remove_all(dir);
}
