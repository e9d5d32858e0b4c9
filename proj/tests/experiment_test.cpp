// Copyright 2026 The SiloFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "silofed/experiment.hpp"

#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "silofed/errors.hpp"

using namespace silofed;
using namespace silofed::experiment;

namespace {

namespace fs = std::filesystem;

const char* kFederatedConfig = R"({
  "version": 1,
  "kind": "federated",
  "output": "sweep.csv",
  "dataset": {
    "generator": "heterogeneous_linear",
    "seed": 5,
    "silos": 3,
    "train_per_silo": 40,
    "dim": 3,
    "tau2": 0.2,
    "label_noise": 0.0,
    "task": "regression"
  },
  "trainer": {
    "rounds": 4,
    "clip": 5.0,
    "sampling_rate": 1.0,
    "learning_rate": 0.05,
    "delta": 1e-5,
    "loss": "squared_error"
  },
  "sweep": {
    "methods": ["local", "mrmtl"],
    "epsilons": ["inf", 2.0],
    "lambdas": [0.5],
    "seeds": [1, 2, 3]
  }
})";

fs::path scratch_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing fills defaults and validates") {
  const ExperimentConfig config = parse_config_text(kFederatedConfig, "test");
  CHECK(config.kind == Kind::kFederated);
  CHECK(config.output == "sweep.csv");
  CHECK(config.dataset.silos == 3);
  CHECK(config.trainer.rounds == 4);
  CHECK(config.trainer.eps_select_fraction == 0.03);  // default echoed
  CHECK(config.sweep.methods.size() == 2);
  CHECK(std::isinf(config.sweep.epsilons[0]));
  CHECK(config.sweep.epsilons[1] == 2.0);
  CHECK(config.sweep.seeds.size() == 3);

  // unknown keys are rejected by name
  std::string bad = kFederatedConfig;
  bad.replace(bad.find("\"version\""), 9, "\"epsilonn\"");
  CHECK_THROWS_WITH_AS(parse_config_text(bad, "test"), doctest::Contains("epsilonn"),
                       FormatError);

  // negative lambda rejected
  std::string negative = kFederatedConfig;
  negative.replace(negative.find("[0.5]"), 5, "[-0.5]");
  CHECK_THROWS_AS(parse_config_text(negative, "test"), FormatError);

  // malformed JSON names the source
  CHECK_THROWS_AS(parse_config_text("{", "broken.json"), FormatError);
  CHECK_THROWS_AS(parse_config("/nonexistent/nope.json"), FormatError);
}

TEST_CASE("sweep produces per-seed rows plus one agg row per point") {
  const ExperimentConfig config = parse_config_text(kFederatedConfig, "test");
  const fs::path dir = scratch_dir("silofed_sweep_test");
  std::ostringstream log;
  const SweepOutcome outcome = run_sweep(config, dir.string(), 2, 0, log);
  CHECK(outcome.failures == 0);

  // 2 methods x 2 epsilons x 1 lambda = 4 points; each 3 seed rows + 1 agg
  CHECK(outcome.rows.size() == 16);
  int agg_rows = 0;
  for (const auto& row : outcome.rows) {
    if (row.seed == "agg") {
      ++agg_rows;
    } else {
      CHECK(row.round == "final");
    }
    if (!std::isinf(row.epsilon)) {
      CHECK(row.realized_epsilon <= row.epsilon);
    }
  }
  CHECK(agg_rows == 4);

  const std::string csv = slurp(outcome.csv_path);
  CHECK(csv.rfind("method,lambda,epsilon,delta,seed,round,train_metric,test_metric,"
                  "realized_epsilon\n", 0) == 0);
  CHECK(csv.find("inf") != std::string::npos);

  // byte-identical across runs and worker counts
  const fs::path dir2 = scratch_dir("silofed_sweep_test2");
  const SweepOutcome replay = run_sweep(config, dir2.string(), 1, 0, log);
  CHECK(slurp(replay.csv_path) == csv);

  // a seed offset changes the rows
  const fs::path dir3 = scratch_dir("silofed_sweep_test3");
  const SweepOutcome shifted = run_sweep(config, dir3.string(), 2, 7, log);
  CHECK(slurp(shifted.csv_path) != csv);
  fs::remove_all(dir);
  fs::remove_all(dir2);
  fs::remove_all(dir3);
}

TEST_CASE("sweep failures are recorded and do not abort the sweep") {
  ExperimentConfig config = parse_config_text(kFederatedConfig, "test");
  // a budget this tight is uncalibratable -> the private points fail
  config.sweep.epsilons = {1e-7, std::numeric_limits<double>::infinity()};
  const fs::path dir = scratch_dir("silofed_sweep_fail");
  std::ostringstream log;
  const SweepOutcome outcome = run_sweep(config, dir.string(), 1, 0, log);
  CHECK(outcome.failures == 2);  // one failed point per method
  int error_rows = 0, final_rows = 0;
  for (const auto& row : outcome.rows) {
    if (row.round == "error") ++error_rows;
    if (row.round == "final" && row.seed != "agg") ++final_rows;
  }
  CHECK(error_rows == 6);  // 2 methods x 1 bad epsilon x 3 seeds
  CHECK(final_rows == 6);  // the inf points still ran
  CHECK(log.str().find("run failed") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("mean estimation sweep emits theory and simulation columns") {
  const char* text = R"({
    "kind": "mean_estimation",
    "problem": {
      "silos": 8, "per_silo_n": 50, "data_var": 1.0,
      "heterogeneity": 0.02, "clip": 1.0
    },
    "epsilon": 1.0,
    "trials": 2000,
    "sweep": { "lambdas": [0.0, 1.0, 10.0], "seeds": [4] },
    "output": "meanest.csv"
  })";
  const ExperimentConfig config = parse_config_text(text, "test");
  CHECK(config.kind == Kind::kMeanEstimation);
  const fs::path dir = scratch_dir("silofed_meanest");
  std::ostringstream log;
  const SweepOutcome outcome = run_sweep(config, dir.string(), 2, 0, log);
  CHECK(outcome.failures == 0);
  CHECK(outcome.rows.size() == 6);  // 3 lambdas x (1 seed + agg)
  for (const auto& row : outcome.rows) {
    CHECK(row.method == "mean_est");
    // simulation stays near the closed form
    CHECK(row.test_metric == doctest::Approx(row.train_metric).epsilon(0.25));
  }
  fs::remove_all(dir);
}

TEST_CASE("private lambda sweep traces a unimodal error curve") {
  const char* text = R"({
    "kind": "mean_estimation",
    "problem": {
      "silos": 10, "per_silo_n": 100, "data_var": 1.0, "heterogeneity": 0.01
    },
    "epsilon": 1.0,
    "trials": 0,
    "sweep": {
      "epsilons": [1.0],
      "lambdas": [0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.5, 4.0, 8.0, 20.0, 100.0],
      "seeds": [1]
    },
    "output": "curve.csv"
  })";
  const ExperimentConfig config = parse_config_text(text, "test");
  const fs::path dir = scratch_dir("silofed_curve");
  std::ostringstream log;
  const SweepOutcome outcome = run_sweep(config, dir.string(), 1, 0, log);

  std::vector<double> curve;
  for (const auto& row : outcome.rows) {
    if (row.seed != "agg") curve.push_back(row.test_metric);
  }
  REQUIRE(curve.size() == 11);
  // MSE falls to an interior minimum and rises again toward full federation
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i] < curve[best]) best = i;
  }
  CHECK(best > 0);
  CHECK(best + 1 < curve.size());
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (i <= best) {
      CHECK(curve[i] <= curve[i - 1] + 1e-15);
    } else {
      CHECK(curve[i] >= curve[i - 1] - 1e-15);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("tuning study config runs end to end") {
  const char* text = R"({
    "kind": "tuning_study",
    "problem": {
      "silos": 10, "per_silo_n": 100, "data_var": 1.0,
      "heterogeneity": 0.01, "clip": 1.0
    },
    "epsilon": 1.0,
    "delta": 1e-5,
    "trials": 0,
    "tnb": [ {"eta": 1.0, "expected_h": 10} ],
    "sweep": { "lambdas": [0.0, 1.0, 3.0], "seeds": [1] },
    "output": "tuning.csv"
  })";
  const ExperimentConfig config = parse_config_text(text, "test");
  CHECK(config.kind == Kind::kTuningStudy);
  REQUIRE(config.tnb.size() == 1);
  CHECK(accounting::tnb_mean(config.tnb[0]) == doctest::Approx(10.0).epsilon(1e-6));

  const fs::path dir = scratch_dir("silofed_tuning");
  std::ostringstream log;
  const SweepOutcome outcome = run_sweep(config, dir.string(), 1, 0, log);
  const std::string csv = slurp(outcome.csv_path);
  CHECK(csv.rfind("lambda,mse_nonprivate,mse_private,mse_private_tuned_eta1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  // gamma and expected_h are mutually exclusive
  std::string both = text;
  both.replace(both.find("\"expected_h\": 10"), 16, "\"expected_h\": 10, \"gamma\": 0.5");
  CHECK_THROWS_AS(parse_config_text(both, "test"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("summary prefers agg rows and reports the best point") {
  const fs::path dir = scratch_dir("silofed_summary");
  const fs::path csv = dir / "results.csv";
  std::ofstream(csv) << ResultRow::header() << "\n"
                     << "local,0,2,1e-05,1,final,0.8,0.71,1.9\n"
                     << "local,0,2,1e-05,2,final,0.8,0.93,1.9\n"
                     << "local,0,2,1e-05,agg,final,0.8,0.82,1.9\n"
                     << "mrmtl,0.5,2,1e-05,1,final,0.9,0.88,1.9\n";
  std::ostringstream out;
  emit_summary(csv.string(), out);
  const std::string table = out.str();
  // the agg row (0.82) shadows the better per-seed row (0.93)
  CHECK(table.find("0.82") != std::string::npos);
  CHECK(table.find("0.93") == std::string::npos);
  CHECK(table.find("mrmtl") != std::string::npos);

  // minimized direction flips the winner
  std::ostringstream min_out;
  emit_summary(csv.string(), min_out, /*maximize=*/false);
  CHECK(min_out.str().find("0.82") != std::string::npos);

  // malformed csv errors carry the line number
  std::ofstream(csv, std::ios::trunc) << ResultRow::header() << "\n"
                                      << "local,0,2,1e-05,1,final,0.8\n";
  CHECK_THROWS_WITH_AS(emit_summary(csv.string(), out), doctest::Contains(":2"), FormatError);

  CHECK_THROWS_AS(emit_summary((dir / "absent.csv").string(), out), FormatError);
  fs::remove_all(dir);
}
