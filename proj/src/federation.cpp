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

#include "silofed/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "silofed/errors.hpp"

namespace silofed::fed {

namespace {

// RNG stream tags; every (silo, round) pair owns independent substreams.
constexpr std::uint64_t kStreamTrain = 0;
constexpr std::uint64_t kStreamSecondEpoch = 1;
constexpr std::uint64_t kStreamSelect = 2;
constexpr std::uint64_t kStreamInit = 0x696e6974;

int rounds_from_fraction(double fraction, int total) {
  const int r = static_cast<int>(std::lround(fraction * total));
  return std::clamp(r, 0, total);
}

std::vector<double> aggregation_weights(const TrainerConfig& config,
                                        const std::vector<int>& sizes,
                                        const std::vector<int>& members) {
  std::vector<double> weights(members.size());
  if (config.weighted_aggregation) {
    double total = 0.0;
    for (int k : members) total += sizes[k];
    for (std::size_t i = 0; i < members.size(); ++i) weights[i] = sizes[members[i]] / total;
  } else {
    std::fill(weights.begin(), weights.end(), 1.0 / members.size());
  }
  return weights;
}

void axpy(std::vector<double>& acc, double a, const std::vector<double>& x,
          const std::vector<double>& minus_y) {
  for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += a * (x[j] - minus_y[j]);
}

std::vector<int> all_silos(int count) {
  std::vector<int> idx(count);
  for (int k = 0; k < count; ++k) idx[k] = k;
  return idx;
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::kLocal: return "local";
    case Method::kFedAvg: return "fedavg";
    case Method::kMrMtl: return "mrmtl";
    case Method::kDitto: return "ditto";
    case Method::kFinetune: return "finetune";
    case Method::kIfca: return "ifca";
    case Method::kIfcaMrMtl: return "ifca_mrmtl";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "local") return Method::kLocal;
  if (name == "fedavg") return Method::kFedAvg;
  if (name == "mrmtl") return Method::kMrMtl;
  if (name == "ditto") return Method::kDitto;
  if (name == "finetune") return Method::kFinetune;
  if (name == "ifca") return Method::kIfca;
  if (name == "ifca_mrmtl") return Method::kIfcaMrMtl;
  throw ParameterError("unknown method '" + name + "'");
}

accounting::PrivacyBudget TrainerConfig::budget_of(int silo) const {
  if (budgets.empty()) throw ParameterError("non-private config has no budget");
  return budgets.size() == 1 ? budgets.front() : budgets.at(silo);
}

namespace {

void validate_fractions(const TrainerConfig& config) {
  if (config.finetune_switch_fraction < 0.0 || config.finetune_switch_fraction > 1.0 ||
      config.cluster_rounds_fraction < 0.0 || config.cluster_rounds_fraction > 1.0 ||
      config.precondition_fraction < 0.0 || config.precondition_fraction > 1.0) {
    throw ParameterError("round fractions must lie in [0, 1]");
  }
  if (config.eps_select_fraction <= 0.0 || config.eps_select_fraction >= 1.0) {
    throw ParameterError("eps_select_fraction must lie in (0, 1)");
  }
}

}  // namespace

void validate_trainer_config(const TrainerConfig& config, int num_silos) {
  if (config.rounds < 1) throw ParameterError("need at least 1 round");
  if (config.lambda < 0.0) throw ParameterError("lambda must be >= 0");
  if (config.clusters < 1) throw ParameterError("need at least 1 cluster");
  if (num_silos < 2) throw ParameterError("need at least 2 silos");
  validate_fractions(config);
  if (!config.budgets.empty() && config.budgets.size() != 1 &&
      config.budgets.size() != static_cast<std::size_t>(num_silos)) {
    throw ParameterError("budgets must be one shared entry or one per silo");
  }
  for (const auto& b : config.budgets) accounting::validate_budget(b);
  dpsgd::DpSgdConfig probe{config.clip, 0.0, config.sampling_rate, config.learning_rate};
  dpsgd::validate_config(probe);
}

std::vector<SiloPlan> plan_privacy(const TrainerConfig& config,
                                   const std::vector<int>& silo_sizes) {
  validate_trainer_config(config, static_cast<int>(silo_sizes.size()));
  const dpsgd::DpSgdConfig base{config.clip, 0.0, config.sampling_rate, config.learning_rate};
  const int steps_per_round = base.steps_per_round();

  int epochs_factor = 1;
  if (config.method == Method::kDitto) epochs_factor = 2;  // global + personal epoch
  int selection_rounds = 0;
  if (config.method == Method::kIfca) {
    selection_rounds = rounds_from_fraction(config.cluster_rounds_fraction, config.rounds);
  } else if (config.method == Method::kIfcaMrMtl) {
    selection_rounds = rounds_from_fraction(config.precondition_fraction, config.rounds);
  }

  std::vector<SiloPlan> plans;
  plans.reserve(silo_sizes.size());
  for (std::size_t k = 0; k < silo_sizes.size(); ++k) {
    if (silo_sizes[k] < 1) throw ParameterError("every silo needs at least one example");
    SiloPlan plan;
    plan.dp = base;
    plan.dp_steps_total = epochs_factor * config.rounds * steps_per_round;
    plan.selection_rounds = selection_rounds;
    if (config.is_private()) {
      const accounting::PrivacyBudget budget = config.budget_of(static_cast<int>(k));
      accounting::RdpCurve overhead;
      const accounting::RdpCurve* overhead_ptr = nullptr;
      if (selection_rounds > 0) {
        plan.eps_select = config.eps_select_fraction * budget.epsilon;
        overhead = accounting::rdp_scale(accounting::em_selection_curve(plan.eps_select),
                                         selection_rounds);
        overhead_ptr = &overhead;
      }
      try {
        plan.dp.noise_multiplier = accounting::calibrate_noise_multiplier(
            budget, plan.dp_steps_total, config.sampling_rate, overhead_ptr);
      } catch (const CalibrationError& e) {
        throw InfeasiblePlanError("silo " + std::to_string(k) + ": " + e.what());
      }
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

namespace {

double realized_epsilon_for(const SiloPlan& plan, const accounting::PrivacyBudget& budget,
                            int dp_steps, int selections) {
  accounting::RdpCurve curve = accounting::RdpCurve::zero(accounting::standard_orders());
  if (plan.dp.noise_multiplier > 0.0 && dp_steps > 0) {
    curve = accounting::subsampled_gaussian_curve(
        {plan.dp.sampling_rate, plan.dp.noise_multiplier, dp_steps});
  }
  if (selections > 0 && plan.eps_select > 0.0) {
    curve = accounting::rdp_add(
        curve,
        accounting::rdp_scale(accounting::em_selection_curve(plan.eps_select), selections));
  }
  return accounting::rdp_to_approx_dp(curve, budget.delta).epsilon;
}

}  // namespace

double realized_epsilon(const SiloPlan& plan, const accounting::PrivacyBudget& budget) {
  return realized_epsilon_for(plan, budget, plan.dp_steps_total, plan.selection_rounds);
}

double realized_epsilon_partial(const SiloPlan& plan, const accounting::PrivacyBudget& budget,
                                int rounds_completed, int rounds_total) {
  if (rounds_total < 1 || rounds_completed < 0 || rounds_completed > rounds_total) {
    throw ParameterError("invalid round counts for partial accounting");
  }
  const int steps_per_round = plan.dp_steps_total / rounds_total;
  return realized_epsilon_for(plan, budget, steps_per_round * rounds_completed,
                              std::min(plan.selection_rounds, rounds_completed));
}

FederationState init_state(const TrainerConfig& config, const datasets::FederationData& data,
                           std::uint64_t seed) {
  datasets::validate_federation(data);
  validate_trainer_config(config, data.num_silos());
  const int dim = data.dim();
  const int outputs = models::output_count(config.loss, data.task);

  FederationState state;
  state.personalized.assign(data.num_silos(), models::LinearModel::zeros(dim, outputs));
  state.mean_model = models::LinearModel::zeros(dim, outputs);
  state.global_model = models::LinearModel::zeros(dim, outputs);
  state.assignments.assign(data.num_silos(), 0);
  state.cluster_models.assign(config.clusters, models::LinearModel::zeros(dim, outputs));
  if ((config.method == Method::kIfca || config.method == Method::kIfcaMrMtl) &&
      config.clusters > 1) {
    const auto draw_set = [&](int candidate) {
      std::vector<models::LinearModel> set(config.clusters,
                                           models::LinearModel::zeros(dim, outputs));
      for (int g = 0; g < config.clusters; ++g) {
        // Distinct small random inits break the cluster symmetry.
        Rng rng(derive_seed(seed, kStreamInit, candidate, g));
        for (double& w : set[g].weights) w = 1e-2 * rng.normal();
        for (double& b : set[g].bias) b = 1e-2 * rng.normal();
      }
      return set;
    };
    state.cluster_models = draw_set(0);
    if (!config.is_private() && config.clusters <= data.num_silos()) {
      // Random inits frequently hand two clusters the same argmin model, and
      // that collision is a stable fixed point of the selection dynamics.
      // Without privacy constraints the data may steer the init: train every
      // silo for one noiseless probe epoch and seed the cluster models with
      // farthest-point anchors among the probe models. Private runs keep the
      // random draw, since a data-dependent init would have to be budgeted.
      std::vector<std::vector<double>> probes(data.num_silos());
      const dpsgd::DpSgdConfig probe_dp{config.clip, 0.0, 1.0, config.learning_rate};
      for (int k = 0; k < data.num_silos(); ++k) {
        Rng rng(derive_seed(seed, kStreamInit, 0xbeef, k));
        probes[k] = models::flatten(dpsgd::run_local_epoch(
            models::LinearModel::zeros(dim, outputs), config.loss, data.train[k], probe_dp, rng));
      }
      const auto distance = [&](int a, int b) {
        double d = 0.0;
        for (std::size_t j = 0; j < probes[a].size(); ++j) {
          const double diff = probes[a][j] - probes[b][j];
          d += diff * diff;
        }
        return d;
      };
      std::vector<int> anchors{0};
      while (static_cast<int>(anchors.size()) < config.clusters) {
        int farthest = -1;
        double farthest_gap = -1.0;
        for (int k = 0; k < data.num_silos(); ++k) {
          double gap = std::numeric_limits<double>::infinity();
          for (int a : anchors) gap = std::min(gap, distance(k, a));
          if (gap > farthest_gap) {
            farthest_gap = gap;
            farthest = k;
          }
        }
        anchors.push_back(farthest);
      }
      for (int g = 0; g < config.clusters; ++g) {
        state.cluster_models[g] = models::unflatten(probes[anchors[g]], dim, outputs);
      }
    }
  }
  return state;
}

int private_cluster_select(const std::vector<models::LinearModel>& candidates,
                           const models::LossKind& loss, const datasets::SiloDataset& local_data,
                           double eps_select, Rng& rng) {
  if (candidates.empty()) throw ParameterError("no cluster candidates");
  if (local_data.size() < 2) {
    throw ParameterError("selection sensitivity 1/(n-1) is undefined for n < 2");
  }
  if (eps_select < 0.0) throw ParameterError("selection epsilon must be >= 0");
  if (eps_select > 0.0 && loss.kind == models::LossKind::kSquaredError) {
    throw ParameterError("private selection scores error rates; regression is unsupported");
  }
  const double sensitivity = 1.0 / (local_data.size() - 1.0);
  const double scale = eps_select > 0.0 ? 2.0 * sensitivity / eps_select : 0.0;

  int best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < candidates.size(); ++g) {
    double score = models::evaluate(candidates[g], loss, local_data).error;
    if (scale > 0.0) score -= scale * rng.gumbel();
    if (score < best_score) {
      best_score = score;
      best = static_cast<int>(g);
    }
  }
  return best;
}

namespace {

void fedavg_round(FederationState& state, const TrainerConfig& config,
                  const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
                  std::uint64_t seed) {
  const int num_silos = data.num_silos();
  std::vector<int> sizes(num_silos);
  for (int k = 0; k < num_silos; ++k) sizes[k] = data.train[k].size();
  const auto weights = aggregation_weights(config, sizes, all_silos(num_silos));

  std::vector<double> next = models::flatten(state.global_model);
  const std::vector<double> prev = next;
  for (int k = 0; k < num_silos; ++k) {
    Rng rng(derive_seed(seed, k, state.round, kStreamTrain));
    const models::LinearModel trained =
        dpsgd::run_local_epoch(state.global_model, config.loss, data.train[k], plans[k].dp, rng);
    axpy(next, weights[k], models::flatten(trained), prev);
  }
  state.global_model =
      models::unflatten(next, state.global_model.dim, state.global_model.outputs);
}

void local_round(FederationState& state, const TrainerConfig& config,
                 const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
                 std::uint64_t seed) {
  for (int k = 0; k < data.num_silos(); ++k) {
    Rng rng(derive_seed(seed, k, state.round, kStreamTrain));
    state.personalized[k] = dpsgd::run_local_epoch(state.personalized[k], config.loss,
                                                   data.train[k], plans[k].dp, rng);
  }
}

void mrmtl_round(FederationState& state, const TrainerConfig& config,
                 const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
                 std::uint64_t seed) {
  const int num_silos = data.num_silos();
  std::vector<int> sizes(num_silos);
  for (int k = 0; k < num_silos; ++k) sizes[k] = data.train[k].size();
  const auto weights = aggregation_weights(config, sizes, all_silos(num_silos));

  // Regularize toward last round's mean; the pull enters every per-example
  // gradient before clipping.
  const std::vector<double> reference = models::flatten(state.mean_model);
  const dpsgd::ProxTerm prox{config.lambda, &reference};

  std::vector<double> next_mean = reference;
  for (int k = 0; k < num_silos; ++k) {
    Rng rng(derive_seed(seed, k, state.round, kStreamTrain));
    const std::vector<double> before = models::flatten(state.personalized[k]);
    state.personalized[k] = dpsgd::run_local_epoch(state.personalized[k], config.loss,
                                                   data.train[k], plans[k].dp, rng, nullptr, prox);
    axpy(next_mean, weights[k], models::flatten(state.personalized[k]), before);
  }
  state.mean_model =
      models::unflatten(next_mean, state.mean_model.dim, state.mean_model.outputs);
}

void ditto_round(FederationState& state, const TrainerConfig& config,
                 const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
                 std::uint64_t seed) {
  const int num_silos = data.num_silos();
  std::vector<int> sizes(num_silos);
  for (int k = 0; k < num_silos; ++k) sizes[k] = data.train[k].size();
  const auto weights = aggregation_weights(config, sizes, all_silos(num_silos));

  // Both epochs see the global model the server sent this round.
  const std::vector<double> reference = models::flatten(state.global_model);
  const dpsgd::ProxTerm prox{config.lambda, &reference};

  std::vector<double> next_global = reference;
  for (int k = 0; k < num_silos; ++k) {
    Rng global_rng(derive_seed(seed, k, state.round, kStreamTrain));
    const models::LinearModel trained = dpsgd::run_local_epoch(
        state.global_model, config.loss, data.train[k], plans[k].dp, global_rng);
    axpy(next_global, weights[k], models::flatten(trained), reference);

    Rng personal_rng(derive_seed(seed, k, state.round, kStreamSecondEpoch));
    state.personalized[k] =
        dpsgd::run_local_epoch(state.personalized[k], config.loss, data.train[k], plans[k].dp,
                               personal_rng, nullptr, prox);
  }
  state.global_model =
      models::unflatten(next_global, state.global_model.dim, state.global_model.outputs);
}

int finetune_fedavg_rounds(const TrainerConfig& config) {
  return rounds_from_fraction(config.finetune_switch_fraction, config.rounds);
}

void finetune_round(FederationState& state, const TrainerConfig& config,
                    const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
                    std::uint64_t seed) {
  const int switch_round = finetune_fedavg_rounds(config);
  if (state.round < switch_round) {
    fedavg_round(state, config, data, plans, seed);
    return;
  }
  if (state.round == switch_round) {
    for (auto& model : state.personalized) model = state.global_model;
  }
  local_round(state, config, data, plans, seed);
}

void cluster_aggregate(FederationState& state, const TrainerConfig& config,
                       const std::vector<int>& sizes,
                       const std::vector<std::vector<double>>& trained_flat) {
  for (int g = 0; g < static_cast<int>(state.cluster_models.size()); ++g) {
    std::vector<int> members;
    for (int k = 0; k < static_cast<int>(state.assignments.size()); ++k) {
      if (state.assignments[k] == g) members.push_back(k);
    }
    if (members.empty()) continue;  // centroid carries over unchanged
    const auto weights = aggregation_weights(config, sizes, members);
    std::vector<double> next = models::flatten(state.cluster_models[g]);
    const std::vector<double> prev = next;
    for (std::size_t i = 0; i < members.size(); ++i) {
      axpy(next, weights[i], trained_flat[members[i]], prev);
    }
    state.cluster_models[g] =
        models::unflatten(next, state.cluster_models[g].dim, state.cluster_models[g].outputs);
  }
}

void ifca_round(FederationState& state, const TrainerConfig& config,
                const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
                std::uint64_t seed, bool selecting) {
  const int num_silos = data.num_silos();
  std::vector<int> sizes(num_silos);
  for (int k = 0; k < num_silos; ++k) sizes[k] = data.train[k].size();

  std::vector<std::vector<double>> trained_flat(num_silos);
  for (int k = 0; k < num_silos; ++k) {
    int g = state.assignments[k];
    if (selecting) {
      Rng select_rng(derive_seed(seed, k, state.round, kStreamSelect));
      g = private_cluster_select(state.cluster_models, config.loss, data.train[k],
                                 plans[k].eps_select, select_rng);
      state.assignments[k] = g;
    }
    Rng rng(derive_seed(seed, k, state.round, kStreamTrain));
    const models::LinearModel trained = dpsgd::run_local_epoch(
        state.cluster_models[g], config.loss, data.train[k], plans[k].dp, rng);
    state.personalized[k] = trained;
    trained_flat[k] = models::flatten(trained);
  }
  cluster_aggregate(state, config, sizes, trained_flat);
}

void ifca_mrmtl_round(FederationState& state, const TrainerConfig& config,
                      const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
                      std::uint64_t seed) {
  const int precondition = plans.front().selection_rounds;
  if (state.round < precondition) {
    ifca_round(state, config, data, plans, seed, /*selecting=*/true);
    return;
  }
  // Mean-regularized rounds toward the frozen cluster assignment's centroid;
  // deltas are taken against the centroid so it tracks its members' mean.
  const int num_silos = data.num_silos();
  std::vector<int> sizes(num_silos);
  for (int k = 0; k < num_silos; ++k) sizes[k] = data.train[k].size();

  std::vector<std::vector<double>> references(state.cluster_models.size());
  for (std::size_t g = 0; g < state.cluster_models.size(); ++g) {
    references[g] = models::flatten(state.cluster_models[g]);
  }
  std::vector<std::vector<double>> trained_flat(num_silos);
  for (int k = 0; k < num_silos; ++k) {
    const dpsgd::ProxTerm prox{config.lambda, &references[state.assignments[k]]};
    Rng rng(derive_seed(seed, k, state.round, kStreamTrain));
    state.personalized[k] = dpsgd::run_local_epoch(state.personalized[k], config.loss,
                                                   data.train[k], plans[k].dp, rng, nullptr, prox);
    trained_flat[k] = models::flatten(state.personalized[k]);
  }
  // Centroid g moves to the weighted mean of its members' personalized models.
  for (int g = 0; g < static_cast<int>(state.cluster_models.size()); ++g) {
    std::vector<int> members;
    for (int k = 0; k < num_silos; ++k) {
      if (state.assignments[k] == g) members.push_back(k);
    }
    if (members.empty()) continue;
    const auto weights = aggregation_weights(config, sizes, members);
    std::vector<double> next = references[g];
    for (std::size_t i = 0; i < members.size(); ++i) {
      axpy(next, weights[i], trained_flat[members[i]], references[g]);
    }
    state.cluster_models[g] =
        models::unflatten(next, state.cluster_models[g].dim, state.cluster_models[g].outputs);
  }
}

}  // namespace

void run_round(FederationState& state, const TrainerConfig& config,
               const datasets::FederationData& data, const std::vector<SiloPlan>& plans,
               std::uint64_t seed) {
  if (plans.size() != static_cast<std::size_t>(data.num_silos())) {
    throw ParameterError("need one plan per silo");
  }
  switch (config.method) {
    case Method::kLocal:
      local_round(state, config, data, plans, seed);
      break;
    case Method::kFedAvg:
      fedavg_round(state, config, data, plans, seed);
      break;
    case Method::kMrMtl:
      mrmtl_round(state, config, data, plans, seed);
      break;
    case Method::kDitto:
      ditto_round(state, config, data, plans, seed);
      break;
    case Method::kFinetune:
      finetune_round(state, config, data, plans, seed);
      break;
    case Method::kIfca:
      ifca_round(state, config, data, plans, seed,
                 /*selecting=*/state.round < plans.front().selection_rounds);
      break;
    case Method::kIfcaMrMtl:
      ifca_mrmtl_round(state, config, data, plans, seed);
      break;
  }
  ++state.round;
}

const models::LinearModel& silo_model(const FederationState& state, const TrainerConfig& config,
                                      int silo) {
  switch (config.method) {
    case Method::kLocal:
    case Method::kMrMtl:
    case Method::kDitto:
      return state.personalized[silo];
    case Method::kFedAvg:
      return state.global_model;
    case Method::kFinetune:
      return state.round > finetune_fedavg_rounds(config) ? state.personalized[silo]
                                                          : state.global_model;
    case Method::kIfca:
      return state.cluster_models[state.assignments[silo]];
    case Method::kIfcaMrMtl: {
      // Cluster centroids during preconditioning, personalized models after.
      const int precondition = rounds_from_fraction(config.precondition_fraction, config.rounds);
      if (state.round <= precondition && state.round > 0) {
        return state.cluster_models[state.assignments[silo]];
      }
      return state.personalized[silo];
    }
  }
  return state.personalized[silo];
}

double evaluate_federation(const FederationState& state, const TrainerConfig& config,
                           const std::vector<datasets::SiloDataset>& split) {
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < split.size(); ++k) {
    const models::LinearModel& model = silo_model(state, config, static_cast<int>(k));
    const models::Evaluation eval = models::evaluate(model, config.loss, split[k]);
    const bool classification = config.loss.kind != models::LossKind::kSquaredError;
    const double metric = classification ? 1.0 - eval.error : eval.error;
    weighted += split[k].size() * metric;
    total += split[k].size();
  }
  return weighted / total;
}

RunReport run(const TrainerConfig& config, const datasets::FederationData& data,
              std::uint64_t seed) {
  datasets::validate_federation(data);
  std::vector<int> sizes(data.num_silos());
  for (int k = 0; k < data.num_silos(); ++k) sizes[k] = data.train[k].size();
  const std::vector<SiloPlan> plans = plan_privacy(config, sizes);

  FederationState state = init_state(config, data, seed);
  RunReport report;
  for (int t = 0; t < config.rounds; ++t) {
    run_round(state, config, data, plans, seed);
    const bool record = (config.record_every > 0 && (t + 1) % config.record_every == 0) ||
                        t + 1 == config.rounds;
    if (record) {
      RoundRecord rec;
      rec.round = t + 1;
      rec.train_metric = evaluate_federation(state, config, data.train);
      rec.test_metric = evaluate_federation(state, config, data.test);
      if (config.is_private()) {
        for (int k = 0; k < data.num_silos(); ++k) {
          rec.realized_eps = std::max(
              rec.realized_eps,
              realized_epsilon_partial(plans[k], config.budget_of(k), t + 1, config.rounds));
        }
      }
      const bool classification = config.loss.kind != models::LossKind::kSquaredError;
      for (int k = 0; k < data.num_silos(); ++k) {
        const auto train_eval =
            models::evaluate(silo_model(state, config, k), config.loss, data.train[k]);
        const auto test_eval =
            models::evaluate(silo_model(state, config, k), config.loss, data.test[k]);
        rec.silo_train_metric.push_back(classification ? 1.0 - train_eval.error
                                                       : train_eval.error);
        rec.silo_test_metric.push_back(classification ? 1.0 - test_eval.error : test_eval.error);
      }
      report.history.push_back(std::move(rec));
    }
  }

  report.final_train_metric = report.history.back().train_metric;
  report.final_test_metric = report.history.back().test_metric;
  report.silo_test_metric = report.history.back().silo_test_metric;
  report.assignments = state.assignments;

  if (config.is_private()) {
    report.realized_eps.resize(data.num_silos());
    for (int k = 0; k < data.num_silos(); ++k) {
      const accounting::PrivacyBudget budget = config.budget_of(k);
      report.realized_eps[k] = realized_epsilon(plans[k], budget);
      if (report.realized_eps[k] > budget.epsilon * (1.0 + 1e-9)) {
        throw std::logic_error("silo " + std::to_string(k) +
                               " spent more than its privacy budget");
      }
    }
  }
  return report;
}

}  // namespace silofed::fed
