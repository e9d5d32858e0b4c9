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

#ifndef SILOFED_DP_SGD_HPP_
#define SILOFED_DP_SGD_HPP_

#include <span>
#include <vector>

#include "silofed/datasets.hpp"
#include "silofed/models.hpp"
#include "silofed/rng.hpp"

namespace silofed::dpsgd {

struct DpSgdConfig {
  double clip = 1.0;             // per-example gradient l2 bound c > 0
  double noise_multiplier = 0;   // sigma >= 0, noise std per unit of clip
  double sampling_rate = 1.0;    // Poisson rate q in (0, 1]
  double learning_rate = 0.1;    // eta > 0

  // One pass over the data in expectation.
  int steps_per_round() const;
};

void validate_config(const DpSgdConfig& config);

// Records the model-space noise added at each step (the term the update rule
// adds beyond the clipped gradient mean). Test instrumentation; pass nullptr
// to skip at zero cost.
struct NoiseLedger {
  std::vector<std::vector<double>> steps;
};

// lambda * (w - *reference) added to every per-example gradient before
// clipping; `reference` must already be privatized, so the combined
// contribution stays within the clip bound's sensitivity.
struct ProxTerm {
  double lambda = 0.0;
  const std::vector<double>* reference = nullptr;
};

// Scales g to norm <= c; identity when already within the bound.
std::vector<double> clip_to_norm(std::span<const double> gradient, double clip);
void clip_to_norm_inplace(std::span<double> gradient, double clip);

// One DP-SGD step: Poisson-sample examples with probability q, clip
// per-example gradients to c, sum, add N(0, sigma^2 c^2 I), divide by the
// expected batch size q*n, and step by eta. An empty sampled batch still
// releases (and applies) pure noise.
models::LinearModel private_step(const models::LinearModel& model, const models::LossKind& loss,
                                 const datasets::SiloDataset& data, const DpSgdConfig& config,
                                 Rng& rng, NoiseLedger* ledger = nullptr,
                                 const ProxTerm& prox = {});

// ceil(1/q) private steps.
models::LinearModel run_local_epoch(const models::LinearModel& model,
                                    const models::LossKind& loss,
                                    const datasets::SiloDataset& data, const DpSgdConfig& config,
                                    Rng& rng, NoiseLedger* ledger = nullptr,
                                    const ProxTerm& prox = {});

// Predicted per-coordinate variance of the cumulative injected noise after
// `rounds` full-batch steps: rounds * eta^2 sigma^2 c^2 / n^2.
double random_walk_variance(const DpSgdConfig& config, int n, int rounds);

}  // namespace silofed::dpsgd

#endif  // SILOFED_DP_SGD_HPP_
