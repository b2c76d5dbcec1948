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
#include <span>
#include <vector>

#include "weakfb/linalg.hpp"

// Gaussian quasi-projection measurements on one system and collective
// measurements on N identical systems.
//
// The single-system POVM element for outcome mu is
//   A_mu = (2 pi)^(-1/4) Delta^(-1/2) sum_a exp(-(a - mu)^2 / (4 Delta^2)) P_a
// over the distinct eigenvalues a of the observable (P_a the eigenprojector).
// Averaging A_mu rho A_mu over mu multiplies <a|rho|a'> by
// exp(-(a - a')^2 / (8 Delta^2)); see exact_damping_factor().
namespace weakfb {

struct WeakMeasurementConfig {
  /// Readout width Delta. Zero means noiseless readout of the eigenvalue sum;
  /// it is accepted by the sampling and accuracy routines but has no POVM.
  double delta = 1.0;
  int n_systems = 1;
  Observable observable = Observable::pauli_z();
  /// Report the outcome-conditioned state instead of the mu-averaged one.
  bool selective = false;

  void validate() const;
};

struct DampingFactor {
  double a;
  double a_prime;
  double factor;
};

struct MeasurementRecord {
  double outcome = 0.0;
  DensityMatrix post_state = DensityMatrix::maximally_mixed(1);
  std::vector<DampingFactor> damping_factors;
  std::vector<double> sampled_eigenvalues;
  /// sup_distance(post_state, input)
  double perturbation_norm = 0.0;
  double perturbation_trace = 0.0;

  /// Factor for the eigenvalue pair (a, a'); 1 when they coincide.
  double damping(double a, double a_prime) const;
};

/// exp(-(a - a')^2 / (8 Delta^2)), the exact mu-integral of the kernel.
double exact_damping_factor(double a, double a_prime, double delta);
/// exp(-(a - a')^2 / (2 Delta^2)), the constant quoted alongside the model.
double quoted_damping_factor(double a, double a_prime, double delta);

Matrix gaussian_povm_element(double mu, const WeakMeasurementConfig& cfg);

/// Outcome probability density tr(A_mu rho A_mu).
double outcome_density(const DensityMatrix& rho, double mu, const WeakMeasurementConfig& cfg);

/// Non-selective channel: integral of A_mu rho A_mu over mu, in closed form.
DensityMatrix averaged_channel(const DensityMatrix& rho, const Observable& a, double delta);

MeasurementRecord single_weak_measure(const DensityMatrix& rho, const WeakMeasurementConfig& cfg,
                                      std::uint64_t seed);

/// Outcome mu = (sum_l a_l + Delta z) / N with a_l ~ p_a i.i.d. and z ~ N(0,1),
/// the outcome law of the N-system POVM on rho^(x)N.
MeasurementRecord collective_weak_measure(const DensityMatrix& rho, const WeakMeasurementConfig& cfg,
                                          std::uint64_t seed);

/// Same law without materializing a record; used by Monte Carlo loops.
double sample_collective_outcome(const DensityMatrix& rho, const WeakMeasurementConfig& cfg, Rng& rng);

/// sqrt(Delta^2 / N^2 + DeltaA^2 / N)
double estimator_accuracy(const WeakMeasurementConfig& cfg, const DensityMatrix& rho);
/// Accuracy with DeltaA replaced by the observable's half range, which bounds
/// the accuracy over all states.
double worst_case_accuracy(const WeakMeasurementConfig& cfg);

/// DeltaA^2 / (2 Delta^2). Throws for Delta = 0 (projective regime).
double perturbation_size(const WeakMeasurementConfig& cfg, const DensityMatrix& rho);

/// Inhomogeneous ensemble rho_1 (x) ... (x) rho_N. The outcome estimates
/// tr(rho_bar A) with variance
///   Delta^2/N^2 + (1/N) [DeltaA(rho_bar)^2 - (1/N) sum_i (abar_i - abar)^2],
/// i.e. the homogeneous formula evaluated at rho_bar minus the dispersion of
/// the per-system means. post_state is the averaged channel on rho_bar.
MeasurementRecord average_state_estimate(std::span<const DensityMatrix> states,
                                         const WeakMeasurementConfig& cfg, std::uint64_t seed);
double average_state_accuracy(std::span<const DensityMatrix> states, const WeakMeasurementConfig& cfg);

// --- tomography ---

struct TomographyResult {
  DensityMatrix estimate = DensityMatrix::maximally_mixed(1);
  /// Linear-inversion matrix before positivity projection.
  Matrix raw_estimate;
  std::vector<double> outcomes;
  std::vector<MeasurementRecord> records;
};

/// Rejects sets that together with I fail to span the Hermitian matrices.
void check_informationally_complete(std::span<const Observable> observables);

/// Hermitian unit-trace matrix X with tr(X O_k) = expectations[k].
Matrix linear_inversion(std::span<const Observable> observables, std::span<const double> expectations);

/// Clip negative eigenvalues to zero and renormalize.
DensityMatrix project_to_state(const Matrix& hermitian);

/// One collective measurement per observable (seeds derived per index),
/// followed by linear inversion and projection. The n_systems and delta of
/// cfg apply to every observable; cfg.observable is ignored.
TomographyResult weak_tomography(const DensityMatrix& rho_true, std::span<const Observable> observables,
                                 const WeakMeasurementConfig& cfg, std::uint64_t seed);

/// Reconstruction from exact expectations (delta = 0, no back-action).
TomographyResult exact_tomography(const DensityMatrix& rho_true, std::span<const Observable> observables);

}  // namespace weakfb
