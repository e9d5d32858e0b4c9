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

#ifndef SILOFED_MEAN_ESTIMATION_HPP_
#define SILOFED_MEAN_ESTIMATION_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "silofed/accounting.hpp"

namespace silofed::meanest {

// Scalar federated mean estimation: K silos, silo centers w_k ~ N(theta, tau2),
// n samples per silo drawn N(w_k, sigma2), and a one-shot Gaussian privacy
// noise of std dp_noise added to each silo's clipped sum.
//
// The homogeneous fields (per_silo_n, data_var, dp_noise) may each be replaced
// by a per-silo vector; a field is either scalar or per-silo, never both.
struct MeanEstProblem {
  int silos = 2;             // K >= 2
  int per_silo_n = 1;        // n >= 1
  double data_var = 0.0;     // sigma^2 >= 0
  double heterogeneity = 0.0;// tau^2 >= 0
  double meta_center = 0.0;  // theta
  double clip = 0.0;         // c > 0; 0 selects the default |theta| + 6 sigma + 6 tau
  double dp_noise = 0.0;     // sigma_DP >= 0 (std of noise on the sum)

  std::optional<std::vector<int>> silo_n;
  std::optional<std::vector<double>> silo_data_var;
  std::optional<std::vector<double>> silo_dp_noise;

  bool heterogeneous() const {
    return silo_n.has_value() || silo_data_var.has_value() || silo_dp_noise.has_value();
  }
  // Effective per-silo accessors (fall back to the scalar field).
  int n_of(int k) const { return silo_n ? (*silo_n)[k] : per_silo_n; }
  double data_var_of(int k) const { return silo_data_var ? (*silo_data_var)[k] : data_var; }
  double dp_noise_of(int k) const { return silo_dp_noise ? (*silo_dp_noise)[k] : dp_noise; }
  double effective_clip() const;
};

void validate_problem(const MeanEstProblem& problem);

// Regularization strength; `infinite` marks the "federate fully" sentinel so
// downstream sweeps can special-case FedAvg instead of doing inf arithmetic.
struct OptimalLambda {
  double value = 0.0;
  bool infinite = false;
};

struct EstimatorReport {
  double lambda = 0.0;
  double alpha = 1.0;  // (K + lambda) / ((1 + lambda) K)
  double mse = 0.0;
};

// sigma_loc^2 = sigma^2/n + sigma_DP^2/n^2 (homogeneous problems only).
double local_variance(const MeanEstProblem& problem);
// Per-silo local variances; works for both parameterizations.
std::vector<double> local_variances(const MeanEstProblem& problem);

// Interpolation weight alpha = (K + lambda) / ((1 + lambda) K) in (1/K, 1].
double mrmtl_weight(double lambda, int silos);

// lambda* = sigma_loc^2 / tau^2; tau^2 = 0 yields the infinite sentinel.
OptimalLambda optimal_lambda(const MeanEstProblem& problem);

// MSE at a given lambda:
//   (1 - 1/K)(sigma_loc^2 + lambda^2 tau^2)/(lambda + 1)^2 + sigma_loc^2/K.
double error_at_lambda(const MeanEstProblem& problem, double lambda);
double error_at_lambda(const MeanEstProblem& problem, const OptimalLambda& lambda);

// MSE of the optimally regularized estimator:
//   sigma_loc^2 (sigma_loc^2 + K tau^2) / (K (sigma_loc^2 + tau^2)).
double optimal_error(const MeanEstProblem& problem);

// FedAvg error (sigma_loc^2 + (K-1) tau^2) / K, the lambda -> inf limit.
double fedavg_error(const MeanEstProblem& problem);

// Extra error of pure local estimation: (1 - 1/K) sigma_loc^4/(sigma_loc^2 + tau^2).
double gap_to_local(const MeanEstProblem& problem);

// Extra error of FedAvg: (1 - 1/K) tau^4/(sigma_loc^2 + tau^2).
double gap_to_fedavg(const MeanEstProblem& problem);

// Utility cost of privacy at a given lambda:
//   (1 - 1/K) sigma_DP^2/(n^2 (lambda+1)^2) + sigma_DP^2/(K n^2).
double dp_utility_gap(const MeanEstProblem& problem, double lambda);

// Per-silo optimum for heterogeneous local variances:
//   lambda*_k = s_k / (tau^2 + (sum_{j!=k} s_j/(K-1) - s_k)/K).
// A non-positive denominator falls back to the infinite sentinel.
OptimalLambda silo_specific_lambda(const MeanEstProblem& problem, int silo);

struct SimResult {
  double mse = 0.0;
  double std_error = 0.0;
};

// Monte Carlo realization of the generative model. Per trial: draw silo
// centers and data, form private estimates (with clipping at problem clip),
// interpolate by lambda, and average the squared estimation error over silos.
// Trials are split into fixed-size blocks with per-block substreams, so the
// result is independent of worker count. workers = 0 picks the hardware
// concurrency.
SimResult simulate(const MeanEstProblem& problem, double lambda, long trials,
                   std::uint64_t seed, int workers = 0);

// One data pass shared across a whole lambda grid (common random numbers).
std::vector<SimResult> simulate_grid(const MeanEstProblem& problem,
                                     std::span<const double> lambdas, long trials,
                                     std::uint64_t seed, int workers = 0);

struct TuningStudyConfig {
  std::vector<double> lambda_grid;
  std::vector<accounting::TnbParams> tnb;   // one adjusted column per entry
  accounting::PrivacyBudget budget;         // per-silo target the noise is derived from
  long trials = 0;                          // 0 -> closed-form errors
  std::uint64_t seed = 0;
  int workers = 0;
};

struct TuningStudyRow {
  double lambda = 0.0;
  double mse_nonprivate = 0.0;
  double mse_private = 0.0;
  std::vector<double> mse_private_tuned;  // aligned with config.tnb
};

struct TuningStudy {
  std::vector<accounting::TnbParams> tnb;
  double sigma_dp = 0.0;                 // unadjusted one-shot noise std
  std::vector<double> sigma_dp_tuned;    // per TNB parameterization
  std::vector<TuningStudyRow> rows;
};

// Error of varying lambda with and without privacy, plus privacy re-budgeted
// for best-of-h tuning: the one-shot Gaussian release is re-calibrated so that
// its tuning_rdp_cost converts back to the same (epsilon, delta).
TuningStudy tuning_cost_study(const MeanEstProblem& problem, const TuningStudyConfig& config);

// CSV with header lambda,mse_nonprivate,mse_private,mse_private_tuned_eta<eta>...
std::string tuning_study_csv(const TuningStudy& study);

}  // namespace silofed::meanest

#endif  // SILOFED_MEAN_ESTIMATION_HPP_
