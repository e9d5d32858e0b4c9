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

#include "silofed/accounting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "silofed/errors.hpp"

namespace silofed::accounting {

namespace {

constexpr double kSigmaLo = 1e-2;
constexpr double kSigmaHi = 1e4;
constexpr int kBisectIters = 60;

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_sum_exp(const std::vector<double>& log_terms) {
  const double m = *std::max_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : log_terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace

void validate_budget(const PrivacyBudget& budget) {
  if (!(budget.epsilon > 0.0) || !std::isfinite(budget.epsilon)) {
    throw ParameterError("privacy budget requires epsilon > 0, got " +
                         std::to_string(budget.epsilon));
  }
  if (!(budget.delta > 0.0) || !(budget.delta < 1.0)) {
    throw ParameterError("privacy budget requires delta in (0, 1), got " +
                         std::to_string(budget.delta));
  }
}

void validate_tnb(const TnbParams& params) {
  if (!(params.eta > -1.0) || !std::isfinite(params.eta)) {
    throw ParameterError("TNB eta must be > -1");
  }
  if (!(params.gamma > 0.0) || !(params.gamma < 1.0)) {
    throw ParameterError("TNB gamma must lie strictly inside (0, 1)");
  }
}

RdpCurve RdpCurve::zero(std::span<const double> orders) {
  RdpCurve c;
  c.orders.assign(orders.begin(), orders.end());
  c.eps.assign(orders.size(), 0.0);
  return c;
}

bool RdpCurve::same_grid(const RdpCurve& other) const {
  return orders == other.orders;
}

const std::vector<double>& standard_orders() {
  static const std::vector<double> grid = [] {
    std::vector<double> g;
    for (int a = 2; a <= 64; ++a) g.push_back(a);
    g.push_back(128.0);
    g.push_back(256.0);
    g.push_back(512.0);
    return g;
  }();
  return grid;
}

double gaussian_sigma_for_budget(double clip, const PrivacyBudget& budget) {
  if (!(clip > 0.0)) throw ParameterError("clip bound must be positive");
  validate_budget(budget);
  return clip * std::sqrt(2.0 * std::log(1.25 / budget.delta)) / budget.epsilon;
}

double rdp_gaussian(double noise_multiplier, double order) {
  if (!(noise_multiplier > 0.0)) {
    throw ParameterError("Gaussian RDP requires noise multiplier > 0");
  }
  if (!(order > 1.0)) throw ParameterError("RDP order must exceed 1");
  return order / (2.0 * noise_multiplier * noise_multiplier);
}

double rdp_subsampled_gaussian(double sampling_rate, double noise_multiplier, int order) {
  if (order < 2) throw ParameterError("subsampled Gaussian RDP needs integer order >= 2");
  if (!(noise_multiplier > 0.0)) {
    throw ParameterError("subsampled Gaussian RDP requires noise multiplier > 0");
  }
  if (sampling_rate < 0.0 || sampling_rate > 1.0) {
    throw ParameterError("sampling rate must lie in [0, 1]");
  }
  if (sampling_rate == 0.0) return 0.0;
  if (sampling_rate == 1.0) return rdp_gaussian(noise_multiplier, order);

  const double log_q = std::log(sampling_rate);
  const double log_1mq = std::log1p(-sampling_rate);
  const double inv_2s2 = 0.5 / (noise_multiplier * noise_multiplier);
  std::vector<double> log_terms;
  log_terms.reserve(order + 1);
  for (int k = 0; k <= order; ++k) {
    log_terms.push_back(log_binomial(order, k) + (order - k) * log_1mq + k * log_q +
                        static_cast<double>(k) * (k - 1.0) * inv_2s2);
  }
  // The sum is >= 1 (it is an expectation of exp(...) >= 1), so this stays
  // non-negative up to rounding; clamp the rounding.
  return std::max(0.0, log_sum_exp(log_terms) / (order - 1.0));
}

RdpCurve subsampled_gaussian_curve(const SubsampledGaussianEvent& event,
                                   std::span<const double> orders) {
  if (event.steps < 1) throw ParameterError("event step count must be >= 1");
  RdpCurve curve;
  curve.orders.assign(orders.begin(), orders.end());
  curve.eps.reserve(orders.size());
  for (double a : orders) {
    const int ia = static_cast<int>(a);
    if (static_cast<double>(ia) != a) {
      throw ParameterError("subsampled Gaussian curve needs an integer order grid");
    }
    curve.eps.push_back(event.steps *
                        rdp_subsampled_gaussian(event.sampling_rate, event.noise_multiplier, ia));
  }
  return curve;
}

RdpCurve rdp_compose(const std::vector<RdpCurve>& curves) {
  if (curves.empty()) return RdpCurve::zero(standard_orders());
  RdpCurve out = curves.front();
  for (std::size_t i = 1; i < curves.size(); ++i) {
    if (!out.same_grid(curves[i])) {
      throw ParameterError("cannot compose RDP curves over mismatched order grids");
    }
    for (std::size_t j = 0; j < out.eps.size(); ++j) out.eps[j] += curves[i].eps[j];
  }
  return out;
}

RdpCurve rdp_scale(const RdpCurve& curve, double factor) {
  if (factor < 0.0) throw ParameterError("RDP scale factor must be non-negative");
  RdpCurve out = curve;
  for (double& e : out.eps) e *= factor;
  return out;
}

RdpCurve rdp_add(const RdpCurve& a, const RdpCurve& b) { return rdp_compose({a, b}); }

DpConversion rdp_to_approx_dp(const RdpCurve& curve, double delta) {
  if (curve.orders.empty()) throw ParameterError("cannot convert an empty RDP curve");
  if (!(delta > 0.0) || !(delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  double best = std::numeric_limits<double>::infinity();
  double best_order = curve.orders.front();
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double a = curve.orders[i];
    const double candidate =
        curve.eps[i] + std::log(1.0 / (a * delta)) / (a - 1.0) + std::log1p(-1.0 / a);
    if (candidate < best) {
      best = candidate;
      best_order = a;
    }
  }
  return {std::max(0.0, best), best_order};
}

double calibrate_noise_multiplier(const PrivacyBudget& target, int steps,
                                  double sampling_rate, const RdpCurve* overhead) {
  validate_budget(target);
  if (steps < 1) throw ParameterError("calibration needs steps >= 1");
  if (!(sampling_rate > 0.0) || sampling_rate > 1.0) {
    throw ParameterError("calibration needs sampling rate in (0, 1]");
  }
  if (overhead != nullptr && overhead->orders != standard_orders()) {
    throw ParameterError("overhead curve must use the standard order grid");
  }

  const auto spent = [&](double sigma) {
    RdpCurve curve = subsampled_gaussian_curve({sampling_rate, sigma, steps});
    if (overhead != nullptr) curve = rdp_add(curve, *overhead);
    return rdp_to_approx_dp(curve, target.delta).epsilon;
  };

  if (spent(kSigmaHi) > target.epsilon) {
    throw CalibrationError("target epsilon " + std::to_string(target.epsilon) +
                           " unreachable with noise multiplier <= 1e4");
  }
  if (spent(kSigmaLo) <= target.epsilon) return kSigmaLo;

  double lo = std::log(kSigmaLo);  // spent(lo) > epsilon
  double hi = std::log(kSigmaHi);  // spent(hi) <= epsilon
  for (int i = 0; i < kBisectIters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (spent(std::exp(mid)) <= target.epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::exp(hi);  // snap to the feasible side
}

RdpCurve em_selection_curve(double eps_select, std::span<const double> orders) {
  if (!(eps_select > 0.0)) throw ParameterError("selection epsilon must be positive");
  const double rho = eps_select * eps_select / 8.0;
  RdpCurve curve;
  curve.orders.assign(orders.begin(), orders.end());
  curve.eps.reserve(orders.size());
  for (double a : orders) curve.eps.push_back(rho * a);
  return curve;
}

double tnb_pmf(const TnbParams& params, int h) {
  validate_tnb(params);
  if (h < 1) throw ParameterError("TNB support starts at h = 1");
  const double gamma = params.gamma;
  const double eta = params.eta;
  if (eta == 0.0) {
    return std::pow(1.0 - gamma, h) / (h * std::log(1.0 / gamma));
  }
  double prod = 1.0;
  for (int l = 0; l < h; ++l) prod *= (l + eta) / (l + 1.0);
  return std::pow(1.0 - gamma, h) / (std::pow(gamma, -eta) - 1.0) * prod;
}

double tnb_mean(const TnbParams& params) {
  validate_tnb(params);
  const double gamma = params.gamma;
  const double eta = params.eta;
  if (eta == 0.0) {
    return (1.0 / gamma - 1.0) / std::log(1.0 / gamma);
  }
  return eta * (1.0 - gamma) / (gamma * (1.0 - std::pow(gamma, eta)));
}

std::pair<double, double> tnb_pmf_and_mean(const TnbParams& params, int h) {
  return {tnb_pmf(params, h), tnb_mean(params)};
}

int tnb_sample(const TnbParams& params, Rng& rng) {
  validate_tnb(params);
  const double u = rng.uniform();
  // Walk the pmf via its recurrence f(h+1) = f(h)(1-gamma)(h+eta)/(h+1).
  double f = tnb_pmf(params, 1);
  double cdf = f;
  int h = 1;
  while (cdf < u) {
    f *= (1.0 - params.gamma) * (h + params.eta) / (h + 1.0);
    cdf += f;
    ++h;
    if (f < 1e-300) break;  // beyond double resolution; u ~ 1 rounding
  }
  return h;
}

double tnb_gamma_for_mean(double eta, double expected_h) {
  if (!(expected_h >= 1.0)) throw ParameterError("TNB mean is at least 1");
  if (!(eta > -1.0)) throw ParameterError("TNB eta must be > -1");
  // E[h] decreases from +inf (gamma -> 0) to 1 (gamma -> 1); bisect.
  double lo = 1e-12, hi = 1.0 - 1e-12;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (tnb_mean({eta, mid}) > expected_h) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

RdpCurve tuning_rdp_cost(const RdpCurve& base, const TnbParams& params) {
  validate_tnb(params);
  if (base.orders.empty()) throw ParameterError("tuning cost needs a non-empty base curve");
  for (double a : base.orders) {
    if (!(a > 1.0)) throw ParameterError("tuning cost needs all orders > 1");
  }

  const double log_inv_gamma = std::log(1.0 / params.gamma);
  const double one_plus_eta = 1.0 + params.eta;
  double inner = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < base.orders.size(); ++j) {
    const double a2 = base.orders[j];
    inner = std::min(inner, one_plus_eta * (1.0 - 1.0 / a2) * base.eps[j] +
                                one_plus_eta * log_inv_gamma / a2);
  }

  const double log_mean = std::log(tnb_mean(params));
  RdpCurve out;
  out.orders = base.orders;
  out.eps.reserve(base.eps.size());
  for (std::size_t i = 0; i < base.orders.size(); ++i) {
    out.eps.push_back(base.eps[i] + inner + log_mean / (base.orders[i] - 1.0));
  }
  return out;
}

}  // namespace silofed::accounting
