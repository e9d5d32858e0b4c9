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

#ifndef SILOFED_ACCOUNTING_HPP_
#define SILOFED_ACCOUNTING_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "silofed/rng.hpp"

namespace silofed::accounting {

// An (epsilon, delta) differential privacy target.
struct PrivacyBudget {
  double epsilon = 0.0;  // > 0, nats
  double delta = 0.0;    // in (0, 1)
};

void validate_budget(const PrivacyBudget& budget);

// Renyi privacy loss eps(alpha) tabulated over an ascending grid of orders
// alpha > 1. Curves produced by this module are non-negative and
// non-decreasing in alpha; composition is pointwise addition.
struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> eps;

  static RdpCurve zero(std::span<const double> orders);
  bool same_grid(const RdpCurve& other) const;
};

// Integer orders 2..64 plus {128, 256, 512}: covers the regimes where the
// approximate-DP conversion minimum lands for eps in [0.1, 10], delta >= 1e-8.
const std::vector<double>& standard_orders();

// One Poisson-subsampled Gaussian release repeated `steps` times.
struct SubsampledGaussianEvent {
  double sampling_rate = 1.0;    // q in [0, 1]
  double noise_multiplier = 0.0; // sigma > 0, noise std per unit of clip norm
  int steps = 1;                 // >= 1
};

// Truncated negative binomial parameters (eta > -1, gamma in (0, 1)).
struct TnbParams {
  double eta = 0.0;
  double gamma = 0.5;
};

void validate_tnb(const TnbParams& params);

// Noise std for a one-shot Gaussian release of a value with l2 bound `clip`:
// clip * sqrt(2 ln(1.25/delta)) / epsilon.
double gaussian_sigma_for_budget(double clip, const PrivacyBudget& budget);

// Gaussian mechanism RDP: eps(alpha) = alpha / (2 sigma^2), any alpha > 1.
double rdp_gaussian(double noise_multiplier, double order);

// Tight RDP of one Poisson-subsampled Gaussian release at integer order
// alpha >= 2, via the binomial expansion
//   eps(alpha) = log( sum_k C(alpha,k) (1-q)^(alpha-k) q^k
//                     exp(k(k-1)/(2 sigma^2)) ) / (alpha - 1).
// Reduces to rdp_gaussian at q = 1 and to 0 at q = 0.
double rdp_subsampled_gaussian(double sampling_rate, double noise_multiplier, int order);

// Curve for `event.steps` compositions of the subsampled Gaussian over the
// given grid (all orders must be integral).
RdpCurve subsampled_gaussian_curve(const SubsampledGaussianEvent& event,
                                   std::span<const double> orders = standard_orders());

// Pointwise sum; all curves must share one grid. Empty input -> zero curve on
// the standard grid.
RdpCurve rdp_compose(const std::vector<RdpCurve>& curves);

RdpCurve rdp_scale(const RdpCurve& curve, double factor);
RdpCurve rdp_add(const RdpCurve& a, const RdpCurve& b);

struct DpConversion {
  double epsilon = 0.0;     // clamped at 0
  double best_order = 0.0;  // grid order attaining the minimum
};

// Approximate-DP conversion: min over the grid of
//   eps(alpha) + log(1/(alpha delta))/(alpha - 1) + log(1 - 1/alpha).
DpConversion rdp_to_approx_dp(const RdpCurve& curve, double delta);

// Smallest noise multiplier (within [1e-2, 1e4]) such that `steps` subsampled
// Gaussian releases, composed with `overhead` if given, convert to at most
// target.epsilon at target.delta. Bisection on log(sigma), 60 iterations,
// snapped up so the returned value never exceeds the budget.
double calibrate_noise_multiplier(const PrivacyBudget& target, int steps,
                                  double sampling_rate,
                                  const RdpCurve* overhead = nullptr);

// Exponential-mechanism curve from its eps_select^2/8 zCDP bound:
// eps(alpha) = (eps_select^2 / 8) * alpha.
RdpCurve em_selection_curve(double eps_select,
                            std::span<const double> orders = standard_orders());

// Truncated negative binomial over h >= 1. Both the eta != 0 and eta = 0
// branches of the pmf and of E[h] are supported.
double tnb_pmf(const TnbParams& params, int h);
double tnb_mean(const TnbParams& params);
std::pair<double, double> tnb_pmf_and_mean(const TnbParams& params, int h);

// Inverse-CDF sample; deterministic given the generator state.
int tnb_sample(const TnbParams& params, Rng& rng);

// gamma such that tnb_mean({eta, gamma}) equals expected_h (E[h] is strictly
// decreasing in gamma).
double tnb_gamma_for_mean(double eta, double expected_h);

// RDP of a best-of-h tuning procedure over a base mechanism, h drawn from the
// TNB distribution: for every alpha1 in the grid,
//   eps~(alpha1) = eps(alpha1)
//                + min_alpha2 [ (1+eta)(1 - 1/alpha2) eps(alpha2)
//                               + (1+eta) log(1/gamma) / alpha2 ]
//                + log E[h] / (alpha1 - 1),
// with alpha2 ranging over the same grid. Dominates the base pointwise.
RdpCurve tuning_rdp_cost(const RdpCurve& base, const TnbParams& params);

}  // namespace silofed::accounting

#endif  // SILOFED_ACCOUNTING_HPP_
