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
#include <vector>

#include "weakfb/linalg.hpp"

// Explicit measurement mechanism: N systems coupled to one continuous pointer
// through gamma * (A_1 + ... + A_N) * P, so that |a_1..a_N>|q> maps to
// |a_1..a_N>|q + (a_1 + ... + a_N) gamma t>.
//
// The pointer lives on a uniform symmetric grid q_k = (k - (M-1)/2) dq.
// Translations are applied in momentum space and are exact for band-limited
// wave packets.
namespace weakfb {

class Rng;

struct GridSpec {
  std::size_t points = 2048;
  /// Grid covers [-half_extent, half_extent).
  double half_extent = 16.0;

  double spacing() const { return 2.0 * half_extent / static_cast<double>(points); }
  double position(std::size_t k) const;
};

/// Grid of `points` sized to 8 * width plus the largest coupling shift.
GridSpec auto_grid(double width, double max_shift, std::size_t points = 2048);

struct PointerState {
  GridSpec grid;
  Vector amplitudes;
  double width = 1.0;

  double norm() const;
  double mean_position() const;
  double position_std() const;
};

/// psi(q) proportional to exp(-q^2 / (4 width^2)), normalized on the grid.
PointerState make_gaussian_pointer(double width, const GridSpec& grid);
/// Uniform packet of total length `length` (variance length^2 / 12).
PointerState make_square_pointer(double length, const GridSpec& grid);

/// psi(q - shift) by spectral translation.
Vector translate(const Vector& amplitudes, double shift, double spacing);

/// Discrete int psi(q) conj(psi(q + shift)) dq.
Complex pointer_overlap(const PointerState& pointer, double shift);
/// exp(-shift^2 / (8 width^2)): the Gaussian packet overlap in closed form.
double gaussian_overlap(double shift, double width);
/// exp(-shift^2 / (2 width^2)): the constant quoted alongside the model.
double quoted_pointer_damping(double shift, double width);

struct CouplingConfig {
  double gamma_t = 1.0;
  Observable observable = Observable::pauli_z();
  int n_systems = 1;
  std::size_t entry_cap = kDefaultEntryCap;

  void validate() const;
};

/// One eigen-index tuple of the N systems and its pointer branch.
struct Branch {
  std::vector<int> indices;
  double eigenvalue_sum = 0.0;
  std::size_t pointer = 0;
};

/// Joint system-pointer state after coupling, stored as branches over
/// eigen-index tuples. With product input rho^(x)N the joint density is
///   sum_{t,t'} prod_l rho_{t_l t'_l} |t><t'| (x) |psi_{S(t)}><psi_{S(t')}|
/// with rho in the observable's eigenbasis and psi_S = psi(q - S gamma t).
class JointState {
 public:
  JointState(const DensityMatrix& rho_single, const CouplingConfig& cfg, const PointerState& pointer);

  int n_systems() const { return cfg_.n_systems; }
  const CouplingConfig& coupling() const { return cfg_; }
  const PointerState& initial_pointer() const { return pointer_; }
  /// Single-system state in the observable's eigenbasis.
  const Matrix& rho_eigenbasis() const { return rho_eig_; }
  const std::vector<Branch>& branches() const { return branches_; }
  /// Distinct translated pointers, indexed by Branch::pointer.
  const std::vector<Vector>& pointer_branches() const { return shifted_; }
  const std::vector<double>& pointer_shifts() const { return shifts_; }

  /// Probability weight prod_l rho_{t_l t_l} of a branch.
  double branch_weight(const Branch& b) const;
  /// Total norm: sum of branch weights times branch pointer norms.
  double norm() const;

 private:
  CouplingConfig cfg_;
  PointerState pointer_;
  Matrix rho_eig_;
  std::vector<Branch> branches_;
  std::vector<Vector> shifted_;
  std::vector<double> shifts_;
};

JointState couple_and_evolve(const DensityMatrix& rho_single, const CouplingConfig& cfg,
                             const PointerState& pointer);

struct PointerMarginal {
  GridSpec grid;
  /// Probability density on the grid; sum(density) * dq = 1.
  std::vector<double> density;

  double mean() const;
  double variance() const;
  /// Probability mass inside [lo, hi).
  double mass(double lo, double hi) const;
};

PointerMarginal pointer_marginal(const JointState& joint);

struct Readout {
  double position;
  /// position / (N gamma t); NaN when gamma t = 0.
  double estimate;
  std::size_t branch;
  std::size_t grid_index;
};

/// Sample a pointer position from the marginal (branch, then grid cell).
Readout sample_readout(const JointState& joint, Rng& rng);

/// Reduced state of system `index`: off-diagonals multiplied by the pointer
/// overlap, computed by discrete quadrature.
DensityMatrix system_reduced(const JointState& joint, int index);

/// State of system 0 conditioned on the pointer sitting at grid cell k,
/// returned in the original basis.
DensityMatrix conditioned_system(const JointState& joint, std::size_t grid_index);

struct StrongMeasurement {
  double outcome;
  double eigenvalue;
  DensityMatrix post_state;
  /// tr(P_a post_state) for the reported eigenvalue a.
  double fidelity;
  /// False when width >= 0.1 * gap * gamma t: branches overlap.
  bool resolved;
};

/// Single-system projective limit: sample a readout with a narrow pointer and
/// report the nearest eigenvalue and the collapsed state.
StrongMeasurement strong_limit_measure(const DensityMatrix& rho, const Observable& a, double gamma_t,
                                       double width, std::uint64_t seed, std::size_t grid_points = 4096);

/// Same, reusing a prepared joint state (for repeated trials).
StrongMeasurement strong_limit_measure(const JointState& joint, Rng& rng);

// --- several pointers ---

struct Probe {
  Observable observable = Observable::pauli_z();
  double gamma_t = 0.1;
  double width = 1.0;
};

struct MultiProbeConfig {
  std::vector<Probe> probes;
  std::size_t grid_points = 128;
  std::size_t entry_cap = std::size_t{1} << 23;

  void validate() const;
};

struct ProbeReadout {
  /// Sampled pointer position / (N gamma t).
  double estimate;
  double exact_mean;
  double exact_std;
  /// sqrt(Delta_l^2/N^2 + DeltaA_l^2/N) with Delta_l = width / gamma t.
  double accuracy;
  /// (gamma t * half_range / width)^2
  double epsilon;
  bool degenerate;
};

struct MultiProbeResult {
  std::vector<ProbeReadout> readouts;
  DensityMatrix reduced_state = DensityMatrix::maximally_mixed(1);
};

/// Exact simultaneous coupling of every probe to all N systems. The
/// evolution is diagonal in the pointer momenta, where it acts on each system
/// as u(p) = exp(-i sum_l gamma_l t p_l O_l); the joint state is built in
/// momentum space and transformed to positions for the readouts.
MultiProbeResult multi_probe_measure(const DensityMatrix& rho, const MultiProbeConfig& cfg, int n_systems,
                                     std::uint64_t seed);

/// The probes applied one after another as independent averaged channels.
DensityMatrix sequential_probe_channels(const DensityMatrix& rho, const MultiProbeConfig& cfg);

}  // namespace weakfb
