// Copyright 2026 The weakfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "weakfb/chaos.hpp"
#include "weakfb/errors.hpp"
#include "weakfb/rng.hpp"

namespace weakfb {
namespace {

TEST(Chaos, LeastSquaresRecoversLine) {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 3, 5, 7};
  const LinearFit f = least_squares(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
  EXPECT_THROW(least_squares({1, 1}, {0, 1}), ValidationError);
}

TEST(Chaos, LyapunovFitOfSyntheticExponential) {
  DivergenceSeries s;
  s.initial_separation = 1e-8;
  for (int i = 0; i <= 200; ++i) {
    const double t = 0.1 * i;
    s.times.push_back(t);
    s.separations.push_back(std::min(1.0, 1e-8 * std::exp(0.8 * t)));
  }
  const LyapunovFit f = finite_time_lyapunov(s);
  ASSERT_TRUE(f.growth_found);
  EXPECT_NEAR(f.lambda, 0.8, 1e-10);
  EXPECT_GE(f.t0, std::log(10.0) / 0.8 - 0.1);
}

TEST(Chaos, FlatSeriesHasNoGrowth) {
  DivergenceSeries s;
  s.initial_separation = 1e-3;
  for (int i = 0; i < 10; ++i) {
    s.times.push_back(i);
    s.separations.push_back(1e-3);
  }
  EXPECT_FALSE(finite_time_lyapunov(s).growth_found);
}

TEST(Chaos, PerturbationHitsRequestedSeparation) {
  Rng rng(4);
  const DensityMatrix rho = DensityMatrix::pure(random_pure_state(2, rng));
  for (const auto metric : {SeparationMetric::trace_distance, SeparationMetric::infidelity}) {
    for (double s : {1e-6, 1e-3, 0.2}) {
      const DensityMatrix p = perturb_state(rho, s, metric, rng);
      EXPECT_NEAR(separation(rho, p, metric) / s, 1.0, 1e-6);
    }
  }
}

TEST(Chaos, InfidelityMetricForPureStates) {
  const DensityMatrix a = DensityMatrix::pure(bloch_ket(0.0, 0.0));
  const DensityMatrix b = DensityMatrix::pure(bloch_ket(std::acos(0.0), 0.0));
  EXPECT_NEAR(separation(a, b, SeparationMetric::infidelity), 0.5, 1e-15);
  EXPECT_EQ(parse_metric("infidelity"), SeparationMetric::infidelity);
  EXPECT_THROW(parse_metric("nope"), ValidationError);
}

TEST(Chaos, LinearFlowPreservesOverlap) {
  Rng rng(6);
  const Vector a = random_pure_state(2, rng);
  const Vector b = random_pure_state(2, rng);
  const Matrix h0 = 0.9 * Observable::pauli_x().matrix() - 0.3 * Observable::pauli_y().matrix();
  EXPECT_LT(linear_invariance_check(a, b, h0, 50.0), 1e-12);
}

TEST(Chaos, LinearTopDoesNotSeparate) {
  Rng rng(8);
  const DensityMatrix rho = DensityMatrix::pure(random_pure_state(2, rng));
  const DivergenceSeries s = trajectory_divergence(rho, 1e-2, kicked_nonlinear_top(0.0), 30.0);
  for (double v : s.separations) EXPECT_NEAR(v / 1e-2, 1.0, 1e-10);
}

TEST(Chaos, KickedTopSeparatesExponentially) {
  Rng rng(10);
  const DensityMatrix rho = DensityMatrix::pure(random_pure_state(2, rng));
  DivergenceOptions opts;
  opts.seed = 3;
  const DivergenceSeries s = trajectory_divergence(rho, 1e-8, kicked_nonlinear_top(3.0), 40.0, 0.01, opts);
  EXPECT_TRUE(s.lyapunov_fit.growth_found);
  EXPECT_GT(s.lyapunov_fit.lambda, 0.1);
  EXPECT_GT(*std::max_element(s.separations.begin(), s.separations.end()), 1e-2);
}

TEST(Chaos, MicroscopeThresholdValidation) {
  const DensityMatrix a = DensityMatrix::pure(bloch_ket(1.0, 0.5));
  const DensityMatrix b = DensityMatrix::pure(bloch_ket(1.001, 0.5));
  EXPECT_THROW(schrodinger_microscope(a, b, kicked_nonlinear_top(3.0), 1e-6, 10.0), ValidationError);
  EXPECT_THROW(schrodinger_microscope(a, b, kicked_nonlinear_top(3.0), 1.5, 10.0), ValidationError);
  const MicroscopeResult r = schrodinger_microscope(a, b, kicked_nonlinear_top(3.0), 0.2, 40.0);
  ASSERT_TRUE(r.t_detect.has_value());
  EXPECT_GT(*r.t_detect, 0.0);
}

TEST(Chaos, BootstrapIntervalBracketsMean) {
  std::vector<double> v;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) v.push_back(1.0 + 0.1 * rng.normal());
  const BootstrapInterval ci = bootstrap_mean_ci(v, 7);
  EXPECT_LT(ci.low, ci.mean);
  EXPECT_GT(ci.high, ci.mean);
  EXPECT_NEAR(ci.high - ci.low, 2 * 1.96 * 0.1 / std::sqrt(50.0), 0.02);
  const BootstrapInterval again = bootstrap_mean_ci(v, 7);
  EXPECT_EQ(ci.low, again.low);
}

TEST(Chaos, EnsembleIsThreadCountIndependent) {
  const FeedbackPolicy p = kicked_nonlinear_top(3.0);
  const LyapunovEnsemble a = lyapunov_ensemble(p, 4, 1e-6, 20.0, 0.01, 5, 1);
  const LyapunovEnsemble b = lyapunov_ensemble(p, 4, 1e-6, 20.0, 0.01, 5, 3);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.ci_low, b.ci_low);
}

}  // namespace
}  // namespace weakfb
