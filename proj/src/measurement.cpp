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

#include "weakfb/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "weakfb/rng.hpp"

namespace weakfb {

namespace {

constexpr int kMaxOutcomeRetries = 100;
constexpr double kDensityFloor = 1e-300;
constexpr std::size_t kMaxSumConfigurations = 2'000'000;

double povm_prefactor(double delta) {
  return 1.0 / (std::pow(2.0 * std::numbers::pi, 0.25) * std::sqrt(delta));
}

std::vector<double> eigenspace_weights(const DensityMatrix& rho, const Observable& a) {
  std::vector<double> p;
  p.reserve(a.eigenspaces().size());
  for (const auto& space : a.eigenspaces()) {
    p.push_back(std::max(0.0, (space.projector * rho.matrix()).trace().real()));
  }
  return p;
}

std::vector<DampingFactor> damping_table(const Observable& a, double delta) {
  std::vector<DampingFactor> table;
  for (const auto& s1 : a.eigenspaces()) {
    for (const auto& s2 : a.eigenspaces()) {
      table.push_back({s1.value, s2.value, exact_damping_factor(s1.value, s2.value, delta)});
    }
  }
  return table;
}

void finish_record(MeasurementRecord& rec, const DensityMatrix& rho) {
  rec.perturbation_norm = sup_distance(rec.post_state, rho);
  rec.perturbation_trace = trace_distance(rec.post_state, rho);
}

// sum_{a,a'} w(a, a') P_a rho P_a'
Matrix weight_blocks(const Matrix& rho, const Observable& a,
                     const std::function<double(double, double)>& weight) {
  const auto& spaces = a.eigenspaces();
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& s1 : spaces) {
    for (const auto& s2 : spaces) {
      const double w = weight(s1.value, s2.value);
      if (w != 0.0) out += w * (s1.projector * rho * s2.projector);
    }
  }
  return out;
}

// Distribution of the eigenvalue sum over `draws` i.i.d. systems as
// (log probability, sum) pairs, by enumerating occupation numbers.
std::vector<std::pair<double, double>> sum_distribution(const Observable& a, std::span<const double> p,
                                                        int draws) {
  std::vector<std::pair<double, double>> out;
  const auto& spaces = a.eigenspaces();
  const int k = static_cast<int>(spaces.size());
  std::vector<int> counts(k, 0);
  std::function<void(int, int)> recurse = [&](int idx, int remaining) {
    if (out.size() > kMaxSumConfigurations) {
      throw ValidationError("selective collective state: too many eigenvalue-sum configurations");
    }
    if (idx == k - 1) {
      counts[idx] = remaining;
      double logw = std::lgamma(draws + 1.0);
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        if (counts[i] > 0) {
          if (p[i] <= 0.0) return;
          logw += counts[i] * std::log(p[i]);
        }
        logw -= std::lgamma(counts[i] + 1.0);
        sum += counts[i] * spaces[i].value;
      }
      out.emplace_back(logw, sum);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[idx] = c;
      recurse(idx + 1, remaining - c);
    }
  };
  recurse(0, draws);
  return out;
}

}  // namespace

void WeakMeasurementConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw ValidationError("measurement width delta must be finite and >= 0");
  }
  if (n_systems < 1) throw ValidationError("n_systems must be >= 1");
}

double MeasurementRecord::damping(double a, double a_prime) const {
  for (const auto& f : damping_factors) {
    if (std::abs(f.a - a) <= 1e-9 && std::abs(f.a_prime - a_prime) <= 1e-9) return f.factor;
  }
  throw ValidationError("eigenvalue pair not present in measurement record");
}

double exact_damping_factor(double a, double a_prime, double delta) {
  const double diff = a - a_prime;
  if (diff == 0.0) return 1.0;
  if (delta == 0.0) return 0.0;
  return std::exp(-diff * diff / (8.0 * delta * delta));
}

double quoted_damping_factor(double a, double a_prime, double delta) {
  const double diff = a - a_prime;
  if (diff == 0.0) return 1.0;
  if (delta == 0.0) return 0.0;
  return std::exp(-diff * diff / (2.0 * delta * delta));
}

Matrix gaussian_povm_element(double mu, const WeakMeasurementConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(mu)) throw ValidationError("POVM outcome must be finite");
  if (cfg.delta == 0.0) throw ValidationError("Gaussian POVM needs delta > 0");
  const double c = povm_prefactor(cfg.delta);
  const int d = cfg.observable.dim();
  Matrix out = Matrix::Zero(d, d);
  for (const auto& space : cfg.observable.eigenspaces()) {
    const double x = space.value - mu;
    out += (c * std::exp(-x * x / (4.0 * cfg.delta * cfg.delta))) * space.projector;
  }
  return out;
}

double outcome_density(const DensityMatrix& rho, double mu, const WeakMeasurementConfig& cfg) {
  const Matrix e = gaussian_povm_element(mu, cfg);
  return (e * rho.matrix() * e.adjoint()).trace().real();
}

DensityMatrix averaged_channel(const DensityMatrix& rho, const Observable& a, double delta) {
  if (rho.dim() != a.dim()) throw DimensionError("averaged_channel: dimension mismatch");
  if (!(delta >= 0.0)) throw ValidationError("averaged_channel: delta must be >= 0");
  if (std::isinf(delta)) return rho;
  const Matrix out = weight_blocks(rho.matrix(), a, [delta](double x, double y) {
    return exact_damping_factor(x, y, delta);
  });
  return DensityMatrix::from_trusted(out);
}

MeasurementRecord single_weak_measure(const DensityMatrix& rho, const WeakMeasurementConfig& cfg,
                                      std::uint64_t seed) {
  cfg.validate();
  if (rho.dim() != cfg.observable.dim()) throw DimensionError("single_weak_measure: dimension mismatch");
  Rng rng(seed);
  const auto p = eigenspace_weights(rho, cfg.observable);
  const auto& spaces = cfg.observable.eigenspaces();

  MeasurementRecord rec;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxOutcomeRetries) {
      throw NumericalError("single_weak_measure: outcome density underflowed on every draw");
    }
    const double a = spaces[rng.categorical(p)].value;
    const double mu = a + cfg.delta * rng.normal();
    if (cfg.selective && cfg.delta > 0.0 && !(outcome_density(rho, mu, cfg) > kDensityFloor)) continue;
    rec.outcome = mu;
    rec.sampled_eigenvalues = {a};
    break;
  }

  if (cfg.selective) {
    if (cfg.delta == 0.0) {
      // Projective limit: collapse onto the drawn eigenspace.
      for (const auto& space : spaces) {
        if (space.value == rec.sampled_eigenvalues.front()) {
          Matrix m = space.projector * rho.matrix() * space.projector;
          rec.post_state = DensityMatrix::from_trusted(m / m.trace().real());
        }
      }
    } else {
      const Matrix e = gaussian_povm_element(rec.outcome, cfg);
      Matrix m = e * rho.matrix() * e.adjoint();
      rec.post_state = DensityMatrix::from_trusted(m / m.trace().real());
    }
  } else {
    rec.post_state = averaged_channel(rho, cfg.observable, cfg.delta);
  }
  rec.damping_factors = damping_table(cfg.observable, cfg.delta);
  finish_record(rec, rho);
  return rec;
}

double sample_collective_outcome(const DensityMatrix& rho, const WeakMeasurementConfig& cfg, Rng& rng) {
  const auto p = eigenspace_weights(rho, cfg.observable);
  const auto& spaces = cfg.observable.eigenspaces();
  double sum = 0.0;
  for (int l = 0; l < cfg.n_systems; ++l) sum += spaces[rng.categorical(p)].value;
  const double z = rng.normal();
  return (sum + cfg.delta * z) / cfg.n_systems;
}

MeasurementRecord collective_weak_measure(const DensityMatrix& rho, const WeakMeasurementConfig& cfg,
                                          std::uint64_t seed) {
  cfg.validate();
  if (rho.dim() != cfg.observable.dim()) {
    throw DimensionError("collective_weak_measure: dimension mismatch");
  }
  Rng rng(seed);
  const auto p = eigenspace_weights(rho, cfg.observable);
  const auto& spaces = cfg.observable.eigenspaces();

  MeasurementRecord rec;
  rec.sampled_eigenvalues.reserve(cfg.n_systems);
  double sum = 0.0;
  for (int l = 0; l < cfg.n_systems; ++l) {
    const double a = spaces[rng.categorical(p)].value;
    rec.sampled_eigenvalues.push_back(a);
    sum += a;
  }
  const double z = rng.normal();
  rec.outcome = (sum + cfg.delta * z) / cfg.n_systems;

  if (cfg.selective && cfg.delta > 0.0) {
    // Condition system 1 on the collective outcome, tracing the other N-1.
    const auto dist = sum_distribution(cfg.observable, p, cfg.n_systems - 1);
    const double target = cfg.n_systems * rec.outcome;
    const double inv = 1.0 / (4.0 * cfg.delta * cfg.delta);
    double log_max = -std::numeric_limits<double>::infinity();
    for (const auto& s1 : spaces) {
      for (const auto& [logw, s] : dist) {
        const double x = s1.value + s - target;
        log_max = std::max(log_max, logw - 2.0 * x * x * inv);
      }
    }
    const Matrix m = weight_blocks(rho.matrix(), cfg.observable, [&](double a, double b) {
      double acc = 0.0;
      for (const auto& [logw, s] : dist) {
        const double x = a + s - target;
        const double y = b + s - target;
        acc += std::exp(logw - (x * x + y * y) * inv - log_max);
      }
      return acc;
    });
    const double tr = m.trace().real();
    if (!(tr > 0.0)) throw NumericalError("collective_weak_measure: conditioned state underflowed");
    rec.post_state = DensityMatrix::from_trusted(m / tr);
  } else {
    rec.post_state = averaged_channel(rho, cfg.observable, cfg.delta);
    if (cfg.selective) {
      // delta = 0: the sum is read exactly; condition on it.
      const auto dist = sum_distribution(cfg.observable, p, cfg.n_systems - 1);
      const Matrix m = weight_blocks(rho.matrix(), cfg.observable, [&](double a, double b) {
        if (a != b) return 0.0;
        double acc = 0.0;
        for (const auto& [logw, s] : dist) {
          if (std::abs(a + s - sum) <= 1e-9 * std::max(1.0, std::abs(sum))) acc += std::exp(logw);
        }
        return acc;
      });
      rec.post_state = DensityMatrix::from_trusted(m / m.trace().real());
    }
  }
  rec.damping_factors = damping_table(cfg.observable, cfg.delta);
  finish_record(rec, rho);
  return rec;
}

double estimator_accuracy(const WeakMeasurementConfig& cfg, const DensityMatrix& rho) {
  cfg.validate();
  const double n = cfg.n_systems;
  const double spread = std_dev(rho, cfg.observable);
  return std::sqrt(cfg.delta * cfg.delta / (n * n) + spread * spread / n);
}

double worst_case_accuracy(const WeakMeasurementConfig& cfg) {
  cfg.validate();
  const double n = cfg.n_systems;
  const double spread = cfg.observable.half_range();
  return std::sqrt(cfg.delta * cfg.delta / (n * n) + spread * spread / n);
}

double perturbation_size(const WeakMeasurementConfig& cfg, const DensityMatrix& rho) {
  cfg.validate();
  if (cfg.delta == 0.0) {
    throw ValidationError("perturbation_size is undefined for delta = 0 (projective measurement)");
  }
  const double spread = std_dev(rho, cfg.observable);
  return spread * spread / (2.0 * cfg.delta * cfg.delta);
}

namespace {

DensityMatrix mean_state(std::span<const DensityMatrix> states) {
  if (states.empty()) throw ValidationError("average_state_estimate needs at least one state");
  const int d = states.front().dim();
  Matrix acc = Matrix::Zero(d, d);
  for (const auto& s : states) {
    if (s.dim() != d) throw DimensionError("average_state_estimate: states differ in dimension");
    acc += s.matrix();
  }
  return DensityMatrix::from_trusted(acc / static_cast<double>(states.size()));
}

}  // namespace

MeasurementRecord average_state_estimate(std::span<const DensityMatrix> states,
                                         const WeakMeasurementConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const DensityMatrix rho_bar = mean_state(states);
  if (rho_bar.dim() != cfg.observable.dim()) {
    throw DimensionError("average_state_estimate: observable dimension mismatch");
  }
  if (static_cast<int>(states.size()) != cfg.n_systems) {
    throw ValidationError("average_state_estimate: cfg.n_systems must equal the number of states");
  }
  Rng rng(seed);
  const auto& spaces = cfg.observable.eigenspaces();
  MeasurementRecord rec;
  rec.sampled_eigenvalues.reserve(states.size());
  double sum = 0.0;
  for (const auto& s : states) {
    const auto p = eigenspace_weights(s, cfg.observable);
    const double a = spaces[rng.categorical(p)].value;
    rec.sampled_eigenvalues.push_back(a);
    sum += a;
  }
  rec.outcome = (sum + cfg.delta * rng.normal()) / cfg.n_systems;
  rec.post_state = averaged_channel(rho_bar, cfg.observable, cfg.delta);
  rec.damping_factors = damping_table(cfg.observable, cfg.delta);
  finish_record(rec, rho_bar);
  return rec;
}

double average_state_accuracy(std::span<const DensityMatrix> states, const WeakMeasurementConfig& cfg) {
  cfg.validate();
  const DensityMatrix rho_bar = mean_state(states);
  const double n = static_cast<double>(states.size());
  const double mean = expectation(rho_bar, cfg.observable);
  double dispersion = 0.0;
  for (const auto& s : states) {
    const double m = expectation(s, cfg.observable);
    dispersion += (m - mean) * (m - mean);
  }
  dispersion /= n;
  const double spread = std_dev(rho_bar, cfg.observable);
  const double variance = cfg.delta * cfg.delta / (n * n) + std::max(0.0, spread * spread - dispersion) / n;
  return std::sqrt(variance);
}

}  // namespace weakfb
