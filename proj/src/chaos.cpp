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

#include "weakfb/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "weakfb/parallel.hpp"
#include "weakfb/rng.hpp"

namespace weakfb {

std::string_view to_string(SeparationMetric metric) {
  return metric == SeparationMetric::trace_distance ? "trace_distance" : "infidelity";
}

SeparationMetric parse_metric(std::string_view name) {
  if (name == "trace_distance" || name == "trace") return SeparationMetric::trace_distance;
  if (name == "infidelity" || name == "overlap") return SeparationMetric::infidelity;
  throw ValidationError("unknown separation metric '" + std::string(name) + "'");
}

double separation(const DensityMatrix& a, const DensityMatrix& b, SeparationMetric metric) {
  if (metric == SeparationMetric::trace_distance) return trace_distance(a, b);
  const double overlap = (a.matrix() * b.matrix()).trace().real();
  return std::max(0.0, 1.0 - overlap);
}

namespace {

Matrix random_generator(int d, Rng& rng) {
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = Complex(rng.normal(), rng.normal());
  }
  Matrix g = 0.5 * (a + a.adjoint());
  g -= (g.trace() / static_cast<double>(d)) * Matrix::Identity(d, d);
  return g / g.norm();
}

}  // namespace

DensityMatrix perturb_state(const DensityMatrix& rho, double s, SeparationMetric metric, Rng& rng) {
  if (!(s >= 0.0) || s >= kMetricSaturation) throw ValidationError("perturbation size must lie in [0, 1)");
  if (s == 0.0) return rho;
  const int d = rho.dim();
  for (int attempt = 0; attempt < 16; ++attempt) {
    const Matrix g = random_generator(d, rng);
    auto rotated = [&](double theta) {
      const Matrix w = unitary_propagator(g, theta);
      return DensityMatrix::from_trusted(hermitize(w * rho.matrix() * w.adjoint()));
    };
    auto gap = [&](double theta) { return separation(rho, rotated(theta), metric) - s; };

    double hi = 1e-3;
    while (gap(hi) < 0.0 && hi < std::numbers::pi) hi *= 2.0;
    if (gap(hi) < 0.0) continue;  // generator nearly commutes with rho
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-17 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gap(mid) < 0.0 ? lo : hi) = mid;
    }
    return rotated(hi);
  }
  throw NumericalError("could not perturb the state to the requested separation (is it maximally mixed?)");
}

DivergenceSeries divergence_between(const DensityMatrix& a, const DensityMatrix& b, const FeedbackPolicy& policy,
                                    double t_final, double dt, const DivergenceOptions& options) {
  if (a.dim() != b.dim()) throw DimensionError("divergence_between: dimension mismatch");
  Trajectory ta;
  Trajectory tb;
  if (options.stochastic) {
    ta = closed_loop_trajectory(a, policy, *options.stochastic, t_final, dt, derive_seed(options.seed, 1),
                                options.sample_every);
    tb = closed_loop_trajectory(b, policy, *options.stochastic, t_final, dt, derive_seed(options.seed, 2),
                                options.sample_every);
  } else if (policy.kind() == PolicyKind::hamiltonian_map && policy.is_linear()) {
    ta = propagate_linear(a, policy, t_final, dt, options.sample_every);
    tb = propagate_linear(b, policy, t_final, dt, options.sample_every);
  } else {
    IntegratorOptions io;
    io.sample_every = options.sample_every;
    ta = integrate_nls(a, policy, t_final, dt, io);
    tb = integrate_nls(b, policy, t_final, dt, io);
  }
  DivergenceSeries series;
  series.metric = options.metric;
  series.times = ta.times;
  series.separations.reserve(ta.states.size());
  for (std::size_t i = 0; i < ta.states.size(); ++i) {
    series.separations.push_back(separation(ta.states[i], tb.states[i], options.metric));
  }
  series.initial_separation = series.separations.front();
  series.lyapunov_fit = finite_time_lyapunov(series);
  return series;
}

DivergenceSeries trajectory_divergence(const DensityMatrix& rho0, double s, const FeedbackPolicy& policy,
                                       double t_final, double dt, const DivergenceOptions& options) {
  Rng rng(options.seed);
  const DensityMatrix other = perturb_state(rho0, s, options.metric, rng);
  return divergence_between(rho0, other, policy, t_final, dt, options);
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("least_squares needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("least_squares needs two distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

LyapunovFit finite_time_lyapunov(const DivergenceSeries& series) {
  return finite_time_lyapunov(series, 10.0 * series.initial_separation, 0.1 * kMetricSaturation);
}

LyapunovFit finite_time_lyapunov(const DivergenceSeries& series, double lo, double hi) {
  LyapunovFit fit;
  if (series.times.size() != series.separations.size()) throw ValidationError("malformed divergence series");
  if (!(lo > 0.0) || !(hi > lo)) return fit;
  std::size_t begin = series.separations.size();
  for (std::size_t i = 0; i < series.separations.size(); ++i) {
    if (series.separations[i] >= lo) {
      begin = i;
      break;
    }
  }
  std::vector<double> t;
  std::vector<double> logs;
  for (std::size_t i = begin; i < series.separations.size() && series.separations[i] < hi; ++i) {
    if (series.separations[i] > 0.0) {
      t.push_back(series.times[i]);
      logs.push_back(std::log(series.separations[i]));
    }
  }
  if (t.size() < 3 || t.front() == t.back()) return fit;
  const LinearFit ls = least_squares(t, logs);
  fit.lambda = ls.slope;
  fit.r_squared = ls.r_squared;
  fit.t0 = t.front();
  fit.t1 = t.back();
  fit.points = t.size();
  fit.growth_found = true;
  return fit;
}

double linear_invariance_check(const Vector& phi0, const Vector& phi0_prime, const Matrix& h0, double t_final,
                               double dt) {
  if (phi0.size() != phi0_prime.size() || phi0.size() != h0.rows()) {
    throw DimensionError("linear_invariance_check: dimension mismatch");
  }
  if (hermiticity_error(h0) > kAlgebraicTol) throw ValidationError("H0 must be Hermitian");
  if (!(dt > 0.0) || !(t_final >= 0.0)) throw ValidationError("need dt > 0 and t_final >= 0");
  const auto steps = static_cast<std::size_t>(std::llround(t_final / dt));
  const Matrix u = unitary_propagator(h0, dt);
  Vector a = phi0 / phi0.norm();
  Vector b = phi0_prime / phi0_prime.norm();
  const double start = std::abs(pure_overlap(a, b));
  double worst = 0.0;
  for (std::size_t n = 0; n < steps; ++n) {
    a = u * a;
    b = u * b;
    worst = std::max(worst, std::abs(std::abs(pure_overlap(a, b)) - start));
  }
  return worst;
}

MicroscopeResult schrodinger_microscope(const DensityMatrix& rho_a, const DensityMatrix& rho_b,
                                        const FeedbackPolicy& policy, double threshold, double t_max, double dt,
                                        const DivergenceOptions& options) {
  const double s0 = separation(rho_a, rho_b, options.metric);
  if (!(threshold > s0) || threshold > kMetricSaturation) {
    throw ValidationError("threshold must lie in (s0, 1]");
  }
  MicroscopeResult result;
  result.series = divergence_between(rho_a, rho_b, policy, t_max, dt, options);
  for (std::size_t i = 0; i < result.series.times.size(); ++i) {
    if (result.series.separations[i] >= threshold) {
      result.t_detect = result.series.times[i];
      break;
    }
  }
  return result;
}

MicroscopeScaling microscope_scaling(const DensityMatrix& rho0, const FeedbackPolicy& policy,
                                     const std::vector<double>& s0, double threshold, double t_max, double dt,
                                     std::uint64_t seed, std::size_t repeats, std::size_t threads) {
  if (repeats == 0) throw ValidationError("microscope_scaling needs at least one repeat");
  MicroscopeScaling out;
  out.s0 = s0;
  const std::size_t jobs = s0.size() * repeats;
  const std::vector<double> raw = parallel_map<double>(jobs, threads, [&](std::size_t job) {
    const std::size_t i = job / repeats;
    Rng rng(derive_seed(seed, job % repeats));
    const DensityMatrix other = perturb_state(rho0, s0[i], SeparationMetric::trace_distance, rng);
    const MicroscopeResult r = schrodinger_microscope(rho0, other, policy, threshold, t_max, dt);
    return r.t_detect ? *r.t_detect : std::numeric_limits<double>::quiet_NaN();
  });
  out.t_detect.assign(s0.size(), 0.0);
  for (std::size_t i = 0; i < s0.size(); ++i) {
    for (std::size_t r = 0; r < repeats; ++r) out.t_detect[i] += raw[i * repeats + r];
    out.t_detect[i] /= static_cast<double>(repeats);
  }
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < s0.size(); ++i) {
    if (std::isfinite(out.t_detect[i])) {
      x.push_back(std::log(threshold / s0[i]));
      y.push_back(out.t_detect[i]);
    }
  }
  out.detected = x.size();
  if (x.size() >= 2) {
    const LinearFit fit = least_squares(x, y);
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.r_squared = fit.r_squared;
  }
  return out;
}

LyapunovEnsemble lyapunov_ensemble(const FeedbackPolicy& policy, std::size_t pairs, double s, double t_final,
                                   double dt, std::uint64_t seed, std::size_t threads, std::size_t sample_every) {
  if (pairs == 0) throw ValidationError("lyapunov_ensemble needs at least one pair");
  LyapunovEnsemble out;
  out.fits = parallel_map<LyapunovFit>(pairs, threads, [&](std::size_t i) {
    const std::uint64_t pair_seed = derive_seed(seed, i);
    Rng rng(pair_seed);
    const DensityMatrix rho0 = DensityMatrix::pure(random_pure_state(policy.dim(), rng));
    DivergenceOptions opts;
    opts.seed = derive_seed(pair_seed, 1);
    opts.sample_every = sample_every;
    return trajectory_divergence(rho0, s, policy, t_final, dt, opts).lyapunov_fit;
  });
  std::vector<double> lambdas;
  for (const auto& f : out.fits) {
    lambdas.push_back(f.lambda);
    if (f.lambda > 0.0) ++out.positive;
  }
  const BootstrapInterval ci = bootstrap_mean_ci(lambdas, derive_seed(seed, pairs));
  out.mean = ci.mean;
  out.ci_low = ci.low;
  out.ci_high = ci.high;
  return out;
}

BootstrapInterval bootstrap_mean_ci(const std::vector<double>& values, std::uint64_t seed, std::size_t resamples,
                                    double level) {
  if (values.empty()) throw ValidationError("bootstrap needs at least one value");
  if (!(level > 0.0 && level < 1.0) || resamples < 2) throw ValidationError("bad bootstrap settings");
  const std::size_t n = values.size();
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += values[pick(rng.engine())];
    m = acc / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - level);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(k);
    return k + 1 < resamples ? means[k] * (1.0 - frac) + means[k + 1] * frac : means[k];
  };
  return BootstrapInterval{mean, quantile(tail), quantile(1.0 - tail)};
}

}  // namespace weakfb
