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

#ifndef SILOFED_DATASETS_HPP_
#define SILOFED_DATASETS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "silofed/mean_estimation.hpp"

namespace silofed::datasets {

enum class Task { kClassification, kRegression };

struct TaskSpec {
  Task kind = Task::kRegression;
  int num_classes = 2;  // classification only

  static TaskSpec regression() { return {Task::kRegression, 0}; }
  static TaskSpec classification(int num_classes = 2) {
    return {Task::kClassification, num_classes};
  }
  bool is_classification() const { return kind == Task::kClassification; }
};

// One silo's examples: n x d feature matrix (row major) and n labels
// (class index for classification, real target for regression).
struct SiloDataset {
  std::string silo_id;
  int dim = 0;
  std::vector<double> features;
  std::vector<double> labels;

  int size() const { return static_cast<int>(labels.size()); }
  std::span<const double> row(int i) const {
    return {features.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
};

void validate_silo(const SiloDataset& silo, const TaskSpec& task);

struct FederationData {
  std::vector<SiloDataset> train;
  std::vector<SiloDataset> test;
  TaskSpec task;

  int num_silos() const { return static_cast<int>(train.size()); }
  int dim() const { return train.empty() ? 0 : train.front().dim; }
};

void validate_federation(const FederationData& data);

struct ClusterSpec {
  int num_clusters = 1;             // G >= 1, must divide K
  double intra_silo_mask_rate = 0;  // fraction of feature coordinates zeroed per silo
};

// Silo weight vectors drawn around a shared meta weight: w_k = theta + N(0, tau2 I).
// Features are N(0, I); regression labels w_k.x + N(0, noise^2); classification
// labels 1{w_k.x >= 0} flipped with probability `noise`.
FederationData gen_heterogeneous_linear(int silos, int train_per_silo, int dim, double tau2,
                                        double label_noise, TaskSpec task, std::uint64_t seed,
                                        int test_per_silo = 0);

// G well-separated clusters: pairwise-orthogonal cluster weight vectors of
// norm sqrt(dim), silos assigned to clusters in contiguous blocks of K/G, and
// a fixed per-silo random mask zeroing an intra_silo_mask_rate fraction of
// feature coordinates. Labels are noiseless 1{w_g.x_masked >= 0}.
FederationData gen_clustered(int silos, int train_per_silo, int dim, const ClusterSpec& spec,
                             std::uint64_t seed, int test_per_silo = 0);

// The scalar mean-estimation generative model materialized as datasets:
// one constant feature, labels x_{k,i} = w_k + N(0, sigma^2).
FederationData gen_mean_estimation(const meanest::MeanEstProblem& problem, std::uint64_t seed);

// Loads `<silo_id>_train.csv` / `<silo_id>_test.csv` pairs from a directory.
// Rows are `label,feature1,...,featureD`, no header.
FederationData load_csv_silos(const std::string& directory, TaskSpec task);

// Per-silo shuffled split of single-pool silo data into train/test.
FederationData train_test_split(const std::vector<SiloDataset>& pools, TaskSpec task,
                                double test_fraction, std::uint64_t seed);

}  // namespace silofed::datasets

#endif  // SILOFED_DATASETS_HPP_
