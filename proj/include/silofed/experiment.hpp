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

#ifndef SILOFED_EXPERIMENT_HPP_
#define SILOFED_EXPERIMENT_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "silofed/datasets.hpp"
#include "silofed/federation.hpp"
#include "silofed/mean_estimation.hpp"

namespace silofed::experiment {

enum class Kind { kFederated, kMeanEstimation, kTuningStudy };

struct DatasetSpec {
  std::string generator;  // heterogeneous_linear | clustered | mean_estimation | csv
  std::uint64_t seed = 1;
  int silos = 2;
  int train_per_silo = 1;
  int test_per_silo = 0;  // 0 -> generator default
  int dim = 1;
  double tau2 = 0.0;
  double label_noise = 0.0;
  datasets::TaskSpec task = datasets::TaskSpec::regression();
  datasets::ClusterSpec cluster;
  std::string csv_dir;
  meanest::MeanEstProblem problem;  // generator == mean_estimation
};

struct SweepAxes {
  std::vector<fed::Method> methods;
  std::vector<double> epsilons;  // +inf marks a non-private point
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  int version = 1;
  Kind kind = Kind::kFederated;
  std::string output = "results.csv";
  bool report_intermediate = false;

  DatasetSpec dataset;          // federated
  fed::TrainerConfig trainer;   // federated (method/lambda/budgets filled per point)
  double delta = 1e-5;

  meanest::MeanEstProblem problem;  // mean_estimation / tuning_study
  double problem_epsilon = 1.0;     // budget the problem's dp noise derives from
  long trials = 0;
  std::uint64_t study_seed = 0;
  std::vector<accounting::TnbParams> tnb;  // tuning_study

  SweepAxes sweep;
};

// Parses and fully validates a JSON experiment file. Unknown keys are
// rejected by name and location; defaults are filled in.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& source);

struct ResultRow {
  std::string method;
  double lambda = 0.0;
  double epsilon = 0.0;  // +inf -> printed as "inf"
  double delta = 0.0;
  std::string seed;      // integer, or "agg" for the across-seed mean
  std::string round;     // integer, "final", or "error"
  double train_metric = 0.0;
  double test_metric = 0.0;
  double realized_epsilon = 0.0;

  static std::string header();
  std::string to_csv() const;
};

struct SweepOutcome {
  std::vector<ResultRow> rows;
  int failures = 0;  // points that errored (recorded as round="error" rows)
  std::string csv_path;
};

// Executes the cartesian sweep and writes the CSV under out_dir. Deterministic
// in (config, seed_offset) regardless of worker count; rows appear in config
// order. seed_offset shifts every sweep seed (SILOFED_SEED_OFFSET).
SweepOutcome run_sweep(const ExperimentConfig& config, const std::string& out_dir,
                       int workers, std::int64_t seed_offset, std::ostream& log);

// Per-method best row (preferring agg rows) printed as a table.
// `maximize` selects the metric direction (accuracy vs MSE).
void emit_summary(const std::string& csv_path, std::ostream& out, bool maximize = true);

}  // namespace silofed::experiment

#endif  // SILOFED_EXPERIMENT_HPP_
