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

#include "silofed/mean_estimation.hpp"

#include <cmath>
#include <doctest.h>

#include "silofed/errors.hpp"
#include "silofed/rng.hpp"

using namespace silofed;
using namespace silofed::meanest;

namespace {

// The reference configuration used across the closed-form examples:
// sigma_DP calibrated for (eps=1, delta=1e-5) at clip 1.
MeanEstProblem reference_problem() {
  MeanEstProblem p;
  p.silos = 10;
  p.per_silo_n = 100;
  p.data_var = 1.0;
  p.heterogeneity = 0.01;
  p.meta_center = 0.0;
  p.dp_noise = accounting::gaussian_sigma_for_budget(1.0, {1.0, 1e-5});
  return p;
}

MeanEstProblem random_problem(Rng& rng) {
  MeanEstProblem p;
  p.silos = 3 + static_cast<int>(rng.below(10));
  p.per_silo_n = 20 + static_cast<int>(rng.below(180));
  p.data_var = rng.uniform(0.1, 4.0);
  p.heterogeneity = rng.uniform(0.001, 1.0);
  p.meta_center = rng.uniform(-2.0, 2.0);
  p.dp_noise = rng.uniform(0.0, 30.0);
  return p;
}

}  // namespace

TEST_CASE("local variance combines sampling and privacy noise") {
  MeanEstProblem p;
  p.silos = 2;

  p.per_silo_n = 100;
  p.data_var = 1.0;
  p.dp_noise = 0.0;
  CHECK(local_variance(p) == doctest::Approx(0.01).epsilon(1e-15));

  p.per_silo_n = 10;
  p.data_var = 0.0;
  p.dp_noise = 5.0;
  CHECK(local_variance(p) == doctest::Approx(0.25).epsilon(1e-15));

  const MeanEstProblem ref = reference_problem();
  CHECK(local_variance(ref) == doctest::Approx(0.0123472).epsilon(1e-5));
}

TEST_CASE("interpolation weight endpoints") {
  CHECK(mrmtl_weight(0.0, 10) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mrmtl_weight(1e12, 10) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(mrmtl_weight(3.0, 10) == doctest::Approx(13.0 / 40.0).epsilon(1e-15));
  CHECK_THROWS_AS(mrmtl_weight(-0.1, 10), ParameterError);
  CHECK_THROWS_AS(mrmtl_weight(0.0, 1), ParameterError);
}

TEST_CASE("optimal lambda is the variance ratio") {
  MeanEstProblem p;
  p.silos = 4;
  p.per_silo_n = 10;
  p.data_var = 0.5;
  p.heterogeneity = local_variance(p);
  const OptimalLambda star = optimal_lambda(p);
  CHECK_FALSE(star.infinite);
  CHECK(star.value == doctest::Approx(1.0).epsilon(1e-12));

  const MeanEstProblem ref = reference_problem();
  CHECK(optimal_lambda(ref).value == doctest::Approx(1.23472).epsilon(1e-5));

  // more privacy noise -> federate more
  double prev = 0.0;
  for (double dp : {0.0, 5.0, 10.0, 40.0}) {
    MeanEstProblem q = ref;
    q.dp_noise = dp;
    const double lambda = optimal_lambda(q).value;
    CHECK(lambda >= prev);
    if (dp > 0.0) CHECK(lambda > prev);
    prev = lambda;
  }

  MeanEstProblem flat = ref;
  flat.heterogeneity = 0.0;
  CHECK(optimal_lambda(flat).infinite);
}

TEST_CASE("error curve endpoints and the identity chain") {
  const MeanEstProblem ref = reference_problem();
  const double s_loc = local_variance(ref);

  CHECK(error_at_lambda(ref, 0.0) == doctest::Approx(s_loc).epsilon(1e-12));
  CHECK(error_at_lambda(ref, 1e9) == doctest::Approx(fedavg_error(ref)).epsilon(1e-6));
  CHECK(optimal_error(ref) == doctest::Approx(0.006207).epsilon(1e-4));
  CHECK(error_at_lambda(ref, optimal_lambda(ref).value) ==
        doctest::Approx(optimal_error(ref)).epsilon(1e-12));

  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const MeanEstProblem p = random_problem(rng);
    const OptimalLambda star = optimal_lambda(p);
    REQUIRE_FALSE(star.infinite);
    const double at_star = error_at_lambda(p, star.value);
    const double best = optimal_error(p);
    CHECK(at_star == doctest::Approx(best).epsilon(1e-12));

    // gap identities
    const double e_fed = fedavg_error(p);
    CHECK(gap_to_local(p) == doctest::Approx(error_at_lambda(p, 0.0) - best).epsilon(1e-12));
    CHECK(gap_to_fedavg(p) == doctest::Approx(e_fed - best).epsilon(1e-12));

    // the optimum is a minimum over a lambda grid
    for (double lambda : {0.0, star.value / 2.0, star.value * 2.0, 1e3}) {
      CHECK(error_at_lambda(p, lambda) >= best - 1e-15);
    }
  }
}

TEST_CASE("gap formulas at hand-computed points") {
  MeanEstProblem p;
  p.silos = 2;
  p.per_silo_n = 1;
  p.data_var = 0.0;
  p.heterogeneity = 1.0;
  p.dp_noise = 1.0;  // sigma_loc^2 = 1
  REQUIRE(local_variance(p) == doctest::Approx(1.0));
  CHECK(gap_to_local(p) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(gap_to_fedavg(p) == doctest::Approx(0.25).epsilon(1e-12));

  MeanEstProblem noiseless = p;
  noiseless.dp_noise = 0.0;
  CHECK(gap_to_local(noiseless) == 0.0);

  MeanEstProblem homogeneous = p;
  homogeneous.heterogeneity = 0.0;
  CHECK(gap_to_fedavg(homogeneous) == 0.0);
  CHECK(optimal_error(homogeneous) ==
        doctest::Approx(local_variance(homogeneous) / p.silos).epsilon(1e-12));

  const MeanEstProblem ref = reference_problem();
  CHECK(gap_to_local(ref) == doctest::Approx(0.006140).epsilon(1e-3));
  CHECK(gap_to_fedavg(ref) == doctest::Approx(0.0040273).epsilon(1e-4));
  CHECK(fedavg_error(ref) == doctest::Approx(0.0102347).epsilon(1e-4));

  // large-K limit of the optimal error
  MeanEstProblem big = ref;
  big.silos = 100000;
  const double s_loc = local_variance(big);
  const double limit = s_loc * big.heterogeneity / (s_loc + big.heterogeneity);
  CHECK(optimal_error(big) == doctest::Approx(limit).epsilon(1e-3));
}

TEST_CASE("privacy utility gap") {
  const MeanEstProblem ref = reference_problem();
  const double n = ref.per_silo_n;
  const double dp2 = ref.dp_noise * ref.dp_noise;

  CHECK(dp_utility_gap(ref, 0.0) == doctest::Approx(dp2 / (n * n)).epsilon(1e-12));
  CHECK(dp_utility_gap(ref, 1e9) ==
        doctest::Approx(dp2 / (ref.silos * n * n)).epsilon(1e-6));

  // exact difference of private and non-private error curves
  MeanEstProblem nonprivate = ref;
  nonprivate.dp_noise = 0.0;
  for (double lambda : {0.0, 0.3, 1.0, 5.0, 100.0}) {
    CHECK(dp_utility_gap(ref, lambda) ==
          doctest::Approx(error_at_lambda(ref, lambda) - error_at_lambda(nonprivate, lambda))
              .epsilon(1e-12));
  }

  // strictly decreasing in lambda
  double prev = dp_utility_gap(ref, 0.0);
  for (int i = 1; i <= 100; ++i) {
    const double gap = dp_utility_gap(ref, 0.1 * i);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("gap monotonicity under growing local variance") {
  // raising sigma_loc^2 (e.g. more privacy noise) widens the gap to local
  // training and narrows the gap to fedavg
  MeanEstProblem p;
  p.silos = 8;
  p.per_silo_n = 50;
  p.data_var = 1.0;
  p.heterogeneity = 0.05;
  double prev_local = -1.0, prev_fedavg = 1e300, prev_lambda = -1.0;
  for (double dp : {0.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
    p.dp_noise = dp;
    const double to_local = gap_to_local(p);
    const double to_fedavg = gap_to_fedavg(p);
    CHECK(to_local > prev_local);
    CHECK(to_fedavg < prev_fedavg);
    const double star = optimal_lambda(p).value;
    CHECK(star > prev_lambda);
    prev_local = to_local;
    prev_fedavg = to_fedavg;
    prev_lambda = star;
  }
}

TEST_CASE("error curve is unimodal in lambda") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const MeanEstProblem p = random_problem(rng);
    double prev = error_at_lambda(p, 0.0);
    int sign_changes = 0;
    int last_sign = 0;
    for (int i = 1; i <= 200; ++i) {
      const double lambda = 0.05 * i;
      const double e = error_at_lambda(p, lambda);
      const int sign = e > prev ? 1 : (e < prev ? -1 : last_sign);
      if (last_sign != 0 && sign != last_sign) ++sign_changes;
      last_sign = sign;
      prev = e;
    }
    CHECK(sign_changes <= 1);
  }
}

TEST_CASE("silo-specific lambda") {
  // uniform variances reduce to the shared optimum
  MeanEstProblem p = reference_problem();
  p.silo_dp_noise = std::vector<double>(p.silos, p.dp_noise);
  const double shared = optimal_lambda(reference_problem()).value;
  for (int k = 0; k < p.silos; ++k) {
    const OptimalLambda lk = silo_specific_lambda(p, k);
    REQUIRE_FALSE(lk.infinite);
    CHECK(lk.value == doctest::Approx(shared).epsilon(1e-12));
  }

  // a noisier silo should conform harder than the homogeneous value
  MeanEstProblem outlier;
  outlier.silos = 5;
  outlier.per_silo_n = 50;
  outlier.data_var = 1.0;
  outlier.heterogeneity = 0.05;
  outlier.silo_dp_noise = std::vector<double>{15.0, 5.0, 5.0, 5.0, 5.0};
  const auto s = local_variances(outlier);
  const OptimalLambda noisy = silo_specific_lambda(outlier, 0);
  REQUIRE_FALSE(noisy.infinite);
  CHECK(noisy.value > s[0] / outlier.heterogeneity);
  const OptimalLambda quiet = silo_specific_lambda(outlier, 1);
  CHECK(quiet.value < noisy.value);

  // extreme outlier trips the federate-fully sentinel
  MeanEstProblem extreme = outlier;
  extreme.heterogeneity = 1e-6;
  (*extreme.silo_dp_noise)[0] = 4000.0;
  CHECK(silo_specific_lambda(extreme, 0).infinite);
}

TEST_CASE("Monte Carlo simulator agrees with the closed forms") {
  // noiseless local data: lambda = 0 reproduces the silo centers exactly
  MeanEstProblem clean;
  clean.silos = 5;
  clean.per_silo_n = 3;
  clean.data_var = 0.0;
  clean.heterogeneity = 0.25;
  clean.meta_center = 1.0;
  const SimResult exact = simulate(clean, 0.0, 500, 99);
  CHECK(exact.mse == doctest::Approx(0.0).epsilon(1e-12));

  // lambda 0, no privacy: the sample-mean variance sigma^2/n
  MeanEstProblem plain;
  plain.silos = 6;
  plain.per_silo_n = 40;
  plain.data_var = 1.0;
  plain.heterogeneity = 0.3;
  plain.meta_center = -0.5;
  const SimResult base = simulate(plain, 0.0, 20000, 7);
  CHECK(std::abs(base.mse - plain.data_var / plain.per_silo_n) <= 3.0 * base.std_error);

  // reference configuration near its optimum
  const MeanEstProblem ref = reference_problem();
  const double star = optimal_lambda(ref).value;
  const SimResult at_star = simulate(ref, star, 20000, 13);
  CHECK(std::abs(at_star.mse - optimal_error(ref)) <= 3.0 * at_star.std_error);

  // worker count must not change the result
  const SimResult one_worker = simulate(ref, star, 5000, 13, 1);
  const SimResult two_workers = simulate(ref, star, 5000, 13, 2);
  CHECK(one_worker.mse == two_workers.mse);
  CHECK(one_worker.std_error == two_workers.std_error);

  CHECK_THROWS_AS(simulate(ref, -1.0, 10, 0), ParameterError);
  CHECK_THROWS_AS(simulate(ref, 1.0, 0, 0), ParameterError);
}

TEST_CASE("tuning cost study") {
  MeanEstProblem p;
  p.silos = 10;
  p.per_silo_n = 100;
  p.data_var = 1.0;
  p.heterogeneity = 0.01;
  p.clip = 1.0;

  TuningStudyConfig config;
  config.lambda_grid = {0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0};
  config.budget = {1.0, 1e-5};
  config.tnb = {accounting::TnbParams{1.0, accounting::tnb_gamma_for_mean(1.0, 10.0)},
                accounting::TnbParams{0.0, accounting::tnb_gamma_for_mean(0.0, 10.0)},
                accounting::TnbParams{-0.33, accounting::tnb_gamma_for_mean(-0.33, 10.0)}};

  const TuningStudy study = tuning_cost_study(p, config);
  REQUIRE(study.rows.size() == config.lambda_grid.size());
  REQUIRE(study.sigma_dp_tuned.size() == 3);

  for (const auto& row : study.rows) {
    CHECK(row.mse_private >= row.mse_nonprivate);
    for (double tuned : row.mse_private_tuned) CHECK(tuned >= row.mse_private);
    // larger eta pays a larger tuning premium at equal E[h]
    CHECK(row.mse_private_tuned[0] >= row.mse_private_tuned[1]);
    CHECK(row.mse_private_tuned[1] >= row.mse_private_tuned[2]);
  }

  // E[h] -> 1 still dominates the untuned private curve
  TuningStudyConfig nearly_one = config;
  nearly_one.tnb = {accounting::TnbParams{1.0, 0.999}};
  const TuningStudy tiny = tuning_cost_study(p, nearly_one);
  for (const auto& row : tiny.rows) {
    CHECK(row.mse_private_tuned[0] > row.mse_private);
  }

  // Monte Carlo mode shares randomness across columns
  TuningStudyConfig mc = config;
  mc.tnb = {config.tnb[0]};
  mc.trials = 4000;
  mc.seed = 3;
  const TuningStudy sim = tuning_cost_study(p, mc);
  int dominated = 0;
  for (const auto& row : sim.rows) {
    if (row.mse_private_tuned[0] >= row.mse_private) ++dominated;
  }
  CHECK(dominated == static_cast<int>(sim.rows.size()));

  const std::string csv = tuning_study_csv(study);
  CHECK(csv.rfind("lambda,mse_nonprivate,mse_private,mse_private_tuned_eta1,"
                  "mse_private_tuned_eta0,mse_private_tuned_eta-0.33\n", 0) == 0);

  TuningStudyConfig empty = config;
  empty.lambda_grid.clear();
  CHECK_THROWS_AS(tuning_cost_study(p, empty), ParameterError);
}

TEST_CASE("problem validation") {
  MeanEstProblem p;
  p.silos = 1;
  CHECK_THROWS_AS(validate_problem(p), ParameterError);
  p.silos = 3;
  p.per_silo_n = 0;
  CHECK_THROWS_AS(validate_problem(p), ParameterError);
  p.per_silo_n = 5;
  p.data_var = -1.0;
  CHECK_THROWS_AS(validate_problem(p), ParameterError);
  p.data_var = 1.0;
  p.silo_n = std::vector<int>{1, 2};  // wrong length
  CHECK_THROWS_AS(validate_problem(p), ParameterError);
  p.silo_n = std::vector<int>{1, 2, 3};
  CHECK_NOTHROW(validate_problem(p));
}
