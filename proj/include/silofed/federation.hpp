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

#ifndef SILOFED_FEDERATION_HPP_
#define SILOFED_FEDERATION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "silofed/accounting.hpp"
#include "silofed/datasets.hpp"
#include "silofed/dp_sgd.hpp"
#include "silofed/models.hpp"

namespace silofed::fed {

enum class Method {
  kLocal,
  kFedAvg,
  kMrMtl,
  kDitto,
  kFinetune,
  kIfca,
  kIfcaMrMtl,
};

std::string method_name(Method method);
Method method_from_name(const std::string& name);

struct TrainerConfig {
  Method method = Method::kLocal;
  int rounds = 1;  // T

  double lambda = 0.0;                    // MR-MTL / Ditto / IFCA+MR-MTL
  double finetune_switch_fraction = 0.5;  // fraction of rounds spent on FedAvg
  int clusters = 1;                       // G
  double eps_select_fraction = 0.03;      // per-selection-round share of epsilon
  double cluster_rounds_fraction = 0.1;   // IFCA: fraction of rounds that select
  double precondition_fraction = 0.1;     // IFCA+MR-MTL: initial clustering fraction

  // Per-silo sample-level targets. Empty -> non-private (zero noise, exact
  // selection). A single entry broadcasts to every silo.
  std::vector<accounting::PrivacyBudget> budgets;

  double clip = 1.0;
  double sampling_rate = 1.0;
  double learning_rate = 0.1;
  bool weighted_aggregation = true;
  models::LossKind loss = models::LossKind::squared_error();

  // 0 records the final round only; otherwise every `record_every` rounds.
  int record_every = 0;

  bool is_private() const { return !budgets.empty(); }
  accounting::PrivacyBudget budget_of(int silo) const;
};

void validate_trainer_config(const TrainerConfig& config, int num_silos);

// Per-silo execution plan: DP-SGD noise plus any private-selection schedule.
struct SiloPlan {
  dpsgd::DpSgdConfig dp;
  int dp_steps_total = 0;        // DP-SGD compositions over the whole run
  int selection_rounds = 0;      // exponential-mechanism invocations
  double eps_select = 0.0;       // per-selection budget (0 when unused)
};

// Calibrates every silo's noise so that all DP-SGD steps plus all selection
// events fit inside its (epsilon_k, delta_k). Local, FedAvg and MR-MTL share
// identical plans at equal budgets; Ditto doubles the step count; IFCA adds
// the selection overhead.
std::vector<SiloPlan> plan_privacy(const TrainerConfig& config,
                                   const std::vector<int>& silo_sizes);

// Recomputes the (epsilon at delta) actually spent by a plan from the
// composed RDP curve; the partial form accounts only the first
// `rounds_completed` of `rounds_total` rounds.
double realized_epsilon(const SiloPlan& plan, const accounting::PrivacyBudget& budget);
double realized_epsilon_partial(const SiloPlan& plan, const accounting::PrivacyBudget& budget,
                                int rounds_completed, int rounds_total);

struct FederationState {
  std::vector<models::LinearModel> personalized;    // w_k
  models::LinearModel mean_model;                   // MR-MTL average
  models::LinearModel global_model;                 // FedAvg / Ditto / finetune
  std::vector<models::LinearModel> cluster_models;  // IFCA centroids
  std::vector<int> assignments;                     // last selected cluster per silo
  int round = 0;                                    // rounds completed
};

FederationState init_state(const TrainerConfig& config, const datasets::FederationData& data,
                           std::uint64_t seed);

// One training round; reads config.method. RNG streams are keyed by
// (seed, silo, round), so silo epochs are order-independent.
void run_round(FederationState& state, const TrainerConfig& config,
               const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
               std::uint64_t seed);

// Error rate of each candidate on the local training split, plus Gumbel noise
// of scale 2*Delta/eps_select with Delta = 1/(n-1); returns the noisy argmin.
// eps_select = 0 selects exactly (lowest index wins ties).
int private_cluster_select(const std::vector<models::LinearModel>& candidates,
                           const models::LossKind& loss, const datasets::SiloDataset& local_data,
                           double eps_select, Rng& rng);

// The model silo k is evaluated with under the configured method.
const models::LinearModel& silo_model(const FederationState& state, const TrainerConfig& config,
                                      int silo);

// Sum_k n_k^test metric_k / sum_k n_k^test. Metric is accuracy for
// classification, MSE for regression.
double evaluate_federation(const FederationState& state, const TrainerConfig& config,
                           const std::vector<datasets::SiloDataset>& split);

struct RoundRecord {
  int round = 0;
  double train_metric = 0.0;  // weighted across silos
  double test_metric = 0.0;
  double realized_eps = 0.0;  // max over silos of the spend so far; 0 if non-private
  std::vector<double> silo_train_metric;
  std::vector<double> silo_test_metric;
};

struct RunReport {
  std::vector<RoundRecord> history;    // recorded rounds, final always last
  double final_train_metric = 0.0;
  double final_test_metric = 0.0;
  std::vector<double> silo_test_metric;
  std::vector<double> realized_eps;    // empty for non-private runs
  std::vector<int> assignments;
};

// Runs `config.rounds` rounds of the selected method. Deterministic in
// (config, data, seed). Throws if the recomputed spend exceeds any budget.
RunReport run(const TrainerConfig& config, const datasets::FederationData& data,
              std::uint64_t seed);

}  // namespace silofed::fed

#endif  // SILOFED_FEDERATION_HPP_
