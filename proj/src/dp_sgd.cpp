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

#include "silofed/dp_sgd.hpp"

#include <cmath>

#include "silofed/errors.hpp"

namespace silofed::dpsgd {

int DpSgdConfig::steps_per_round() const {
  return static_cast<int>(std::ceil(1.0 / sampling_rate - 1e-12));
}

void validate_config(const DpSgdConfig& config) {
  if (!(config.clip > 0.0)) throw ParameterError("clip bound must be positive");
  if (config.noise_multiplier < 0.0) throw ParameterError("noise multiplier must be >= 0");
  if (!(config.sampling_rate > 0.0) || config.sampling_rate > 1.0) {
    throw ParameterError("sampling rate must lie in (0, 1]");
  }
  if (!(config.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
}

std::vector<double> clip_to_norm(std::span<const double> gradient, double clip) {
  std::vector<double> out(gradient.begin(), gradient.end());
  clip_to_norm_inplace(out, clip);
  return out;
}

void clip_to_norm_inplace(std::span<double> gradient, double clip) {
  if (!(clip > 0.0)) throw ParameterError("clip bound must be positive");
  double norm_sq = 0.0;
  for (double g : gradient) norm_sq += g * g;
  const double norm = std::sqrt(norm_sq);
  if (norm <= clip) return;
  const double scale = clip / norm;
  for (double& g : gradient) g *= scale;
}

models::LinearModel private_step(const models::LinearModel& model, const models::LossKind& loss,
                                 const datasets::SiloDataset& data, const DpSgdConfig& config,
                                 Rng& rng, NoiseLedger* ledger, const ProxTerm& prox) {
  validate_config(config);
  if (prox.lambda < 0.0) throw ParameterError("prox strength must be >= 0");
  if (prox.lambda > 0.0 && prox.reference == nullptr) {
    throw ParameterError("prox term needs a reference point");
  }
  const int n = data.size();
  if (n == 0) throw ParameterError("empty silo dataset");

  const int params = model.parameter_count();
  std::vector<double> flat = models::flatten(model);
  if (prox.lambda > 0.0 && static_cast<int>(prox.reference->size()) != params) {
    throw ParameterError("prox reference has the wrong length");
  }

  std::vector<double> sum(params, 0.0);
  std::vector<double> grad(params);
  for (int i = 0; i < n; ++i) {
    if (config.sampling_rate < 1.0 && !rng.bernoulli(config.sampling_rate)) continue;
    models::example_gradient(model, loss, data.row(i), data.labels[i], grad);
    if (prox.lambda > 0.0) {
      for (int j = 0; j < params; ++j) {
        grad[j] += prox.lambda * (flat[j] - (*prox.reference)[j]);
      }
    }
    clip_to_norm_inplace(grad, config.clip);
    for (int j = 0; j < params; ++j) sum[j] += grad[j];
  }

  const double expected_batch = config.sampling_rate * n;
  const double noise_std = config.noise_multiplier * config.clip;
  std::vector<double> ledger_entry;
  if (ledger != nullptr) ledger_entry.resize(params);
  for (int j = 0; j < params; ++j) {
    double z = 0.0;
    if (noise_std > 0.0) z = noise_std * rng.normal();
    if (ledger != nullptr) {
      ledger_entry[j] = -config.learning_rate * z / expected_batch;
    }
    flat[j] -= config.learning_rate * (sum[j] + z) / expected_batch;
  }
  if (ledger != nullptr) ledger->steps.push_back(std::move(ledger_entry));
  return models::unflatten(flat, model.dim, model.outputs);
}

models::LinearModel run_local_epoch(const models::LinearModel& model,
                                    const models::LossKind& loss,
                                    const datasets::SiloDataset& data, const DpSgdConfig& config,
                                    Rng& rng, NoiseLedger* ledger, const ProxTerm& prox) {
  validate_config(config);
  models::LinearModel current = model;
  const int steps = config.steps_per_round();
  for (int s = 0; s < steps; ++s) {
    current = private_step(current, loss, data, config, rng, ledger, prox);
  }
  return current;
}

double random_walk_variance(const DpSgdConfig& config, int n, int rounds) {
  validate_config(config);
  if (n < 1 || rounds < 1) throw ParameterError("need n >= 1 and rounds >= 1");
  const double per_step = config.learning_rate * config.noise_multiplier * config.clip /
                          static_cast<double>(n);
  return rounds * per_step * per_step;
}

}  // namespace silofed::dpsgd
