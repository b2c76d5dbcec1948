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

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "weakfb/feedback.hpp"

// Sensitivity of closed-loop trajectories to their initial conditions.
namespace weakfb {

enum class SeparationMetric {
  trace_distance,
  /// 1 - tr(rho rho'), which is 1 - |<phi|phi'>|^2 for pure states.
  infidelity,
};

std::string_view to_string(SeparationMetric metric);
SeparationMetric parse_metric(std::string_view name);

double separation(const DensityMatrix& a, const DensityMatrix& b, SeparationMetric metric);

/// Largest value the metric can take; fits stop at a tenth of it.
inline constexpr double kMetricSaturation = 1.0;

struct LyapunovFit {
  double lambda = 0.0;
  double t0 = 0.0;
  double t1 = 0.0;
  double r_squared = 0.0;
  /// False when no window with at least three samples was found; lambda is 0.
  bool growth_found = false;
  std::size_t points = 0;
};

struct DivergenceSeries {
  std::vector<double> times;
  std::vector<double> separations;
  SeparationMetric metric = SeparationMetric::trace_distance;
  double initial_separation = 0.0;
  LyapunovFit lyapunov_fit;
};

struct DivergenceOptions {
  SeparationMetric metric = SeparationMetric::trace_distance;
  std::uint64_t seed = 0;
  std::size_t sample_every = 1;
  /// Finite-N closed loop instead of the exact flow. Both trajectories see
  /// independent measurement noise.
  std::optional<FeedbackMeasurement> stochastic;
};

/// rho' = W rho W^dag with W = exp(-i theta G) for a random traceless
/// Hermitian G, theta chosen by bisection so that separation(rho, rho') = s.
DensityMatrix perturb_state(const DensityMatrix& rho, double s, SeparationMetric metric, Rng& rng);

/// Runs rho0 and a perturbed copy at separation s under the same policy.
DivergenceSeries trajectory_divergence(const DensityMatrix& rho0, double s, const FeedbackPolicy& policy,
                                       double t_final, double dt = kDefaultStep,
                                       const DivergenceOptions& options = {});

/// Same, for an explicit pair of initial states.
DivergenceSeries divergence_between(const DensityMatrix& a, const DensityMatrix& b, const FeedbackPolicy& policy,
                                    double t_final, double dt = kDefaultStep,
                                    const DivergenceOptions& options = {});

/// Least-squares slope of ln(separation) against t over the samples with
/// 10 s <= separation < 0.1 * saturation, where s is the initial separation.
LyapunovFit finite_time_lyapunov(const DivergenceSeries& series);
/// Same over an explicit separation band [lo, hi).
LyapunovFit finite_time_lyapunov(const DivergenceSeries& series, double lo, double hi);

/// max_t | |<phi(t)|phi'(t)>| - |<phi0|phi0'>| | for kets propagated by
/// exp(-i H0 dt) step by step.
double linear_invariance_check(const Vector& phi0, const Vector& phi0_prime, const Matrix& h0, double t_final,
                               double dt = kDefaultStep);

struct MicroscopeResult {
  std::optional<double> t_detect;
  DivergenceSeries series;
};

/// First time the separation of the two trajectories reaches `threshold`.
MicroscopeResult schrodinger_microscope(const DensityMatrix& rho_a, const DensityMatrix& rho_b,
                                        const FeedbackPolicy& policy, double threshold, double t_max,
                                        double dt = kDefaultStep, const DivergenceOptions& options = {});

struct MicroscopeScaling {
  std::vector<double> s0;
  /// Mean detection time per s0 over the repeats; NaN if any repeat never
  /// reached the threshold.
  std::vector<double> t_detect;
  /// Affine fit t = slope * ln(threshold / s0) + intercept over detected points.
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t detected = 0;
};

/// Detection times over several initial separations. Repeat r draws its
/// perturbation direction from derive_seed(seed, r) and reuses it for every
/// s0, so only the magnitude changes along a repeat. Detection times are
/// multiples of the kick period for kicked policies; averaging repeats
/// smooths that quantization.
MicroscopeScaling microscope_scaling(const DensityMatrix& rho0, const FeedbackPolicy& policy,
                                     const std::vector<double>& s0, double threshold, double t_max,
                                     double dt, std::uint64_t seed, std::size_t repeats = 1,
                                     std::size_t threads = 1);

struct LyapunovEnsemble {
  std::vector<LyapunovFit> fits;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t positive = 0;
};

/// Divergence fits for `pairs` random pure initial states (one derived seed
/// per pair) with a percentile bootstrap CI of the mean exponent.
LyapunovEnsemble lyapunov_ensemble(const FeedbackPolicy& policy, std::size_t pairs, double s, double t_final,
                                   double dt, std::uint64_t seed, std::size_t threads = 1,
                                   std::size_t sample_every = 1);

struct BootstrapInterval {
  double mean;
  double low;
  double high;
};

/// Percentile bootstrap of the sample mean.
BootstrapInterval bootstrap_mean_ci(const std::vector<double>& values, std::uint64_t seed,
                                    std::size_t resamples = 2000, double level = 0.95);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = slope x + intercept; needs two distinct x.
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace weakfb
