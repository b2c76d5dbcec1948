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
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "weakfb/linalg.hpp"
#include "weakfb/measurement.hpp"

// Closed-loop dynamics of the single-system state when every system is
// measured weakly and then acted on with an estimate-dependent operation.
namespace weakfb {

enum class PolicyKind { unitary_map, hamiltonian_map, eigen_map, channel_map };

std::string_view to_string(PolicyKind kind);

struct PolicyParameter {
  std::string name;
  double value;
};

/// State-dependent control law. Exactly one of the maps is populated,
/// according to kind(). Hamiltonian policies may carry an instantaneous
/// kick applied every kick_period() time units.
class FeedbackPolicy {
 public:
  using UnitaryFn = std::function<UnitaryOp(const DensityMatrix&)>;
  using HamiltonianFn = std::function<Matrix(const DensityMatrix&)>;
  using StateFn = std::function<DensityMatrix(const DensityMatrix&)>;

  static FeedbackPolicy unitary_map(std::string id, int dim, UnitaryFn fn);
  static FeedbackPolicy hamiltonian_map(std::string id, int dim, HamiltonianFn fn);
  static FeedbackPolicy eigen_map(std::string id, int dim, StateFn fn);
  static FeedbackPolicy channel_map(std::string id, int dim, StateFn fn);

  PolicyKind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  int dim() const { return dim_; }
  const std::vector<PolicyParameter>& parameters() const { return parameters_; }
  /// Pitch of the grid the estimate is rounded to before evaluation; 0 = none.
  double discrimination() const { return discrimination_; }
  /// True when the induced dynamics is linear in rho (catalog metadata).
  bool is_linear() const { return linear_; }

  UnitaryOp unitary(const DensityMatrix& rho) const;
  /// Hermitian to kAlgebraicTol; rejects anything else.
  Matrix hamiltonian(const DensityMatrix& rho) const;
  /// eigen_map outputs are checked for isospectrality, channel_map outputs
  /// for validity.
  DensityMatrix map_state(const DensityMatrix& rho) const;

  bool has_kick() const { return static_cast<bool>(kick_); }
  double kick_period() const { return kick_period_; }
  UnitaryOp kick(const DensityMatrix& rho) const;

  FeedbackPolicy with_parameters(std::vector<PolicyParameter> params) const;
  FeedbackPolicy with_discrimination(double pitch) const;
  FeedbackPolicy with_kick(UnitaryFn kick, double period) const;
  FeedbackPolicy with_linear(bool linear) const;

  /// The same law in a rotated frame: H'(rho) = V H(V^dag rho V) V^dag, and
  /// likewise for every other map and the kick.
  FeedbackPolicy conjugated(const UnitaryOp& v) const;

  /// Unitary map rho -> exp(-i H(rho) dt) for a Hamiltonian policy.
  FeedbackPolicy as_unitary_map(double dt) const;

 private:
  FeedbackPolicy() = default;

  PolicyKind kind_ = PolicyKind::unitary_map;
  std::string id_;
  int dim_ = 0;
  std::vector<PolicyParameter> parameters_;
  double discrimination_ = 0.0;
  bool linear_ = false;
  UnitaryFn unitary_;
  HamiltonianFn hamiltonian_;
  StateFn state_map_;
  UnitaryFn kick_;
  double kick_period_ = 0.0;
};

// --- policy library ---

FeedbackPolicy identity_policy(int dim);
/// H(rho) = H0, a linear Hamiltonian.
FeedbackPolicy constant_hamiltonian(Matrix h0, std::string id = "constant_hamiltonian");
/// H(rho) = sum_i g_i tr(rho sigma_i) sigma_i on a qubit.
FeedbackPolicy mean_field_bloch(double gx, double gy, double gz);
/// Precession H0 = (beta / (2 period)) sigma_x, so each period rotates the
/// Bloch vector by beta about x, followed at t = period, 2 period, ... by the
/// kick exp(-i k tr(rho sigma_z) sigma_z). k = 0 is linear.
FeedbackPolicy kicked_nonlinear_top(double k, double period = 1.0, double beta = 1.5707963267948966);
/// U(rho) takes the dominant eigenvector of rho to `target` along the
/// geodesic in their common plane; identity when they already agree.
FeedbackPolicy rotate_to_target(const Vector& target);
/// U(rho) = exp(-i (angle / 2) tr(rho sigma_z) sigma_x): a Bloch rotation
/// about x by angle * <sigma_z>.
FeedbackPolicy z_conditioned_flip(double angle = 1.5707963267948966);
/// f(rho) = diag(ascending eigenvalues of rho).
FeedbackPolicy eigenbasis_to_computational(int dim);
/// f(rho) = U rho U^dag for fixed U.
FeedbackPolicy fixed_conjugation(const UnitaryOp& u);
/// g(rho) = sigma for every rho.
FeedbackPolicy reset_to_state(const DensityMatrix& sigma);
FeedbackPolicy kraus_policy(const KrausChannel& channel, std::string id = "kraus");

struct PolicyParameterSpec {
  std::string name;
  double default_value;
  double min;
  double max;
  std::string doc;
};

struct PolicySpec {
  std::string id;
  PolicyKind kind;
  std::string description;
  std::vector<PolicyParameterSpec> parameters;
};

/// Catalog addressable by id from the command line.
const std::vector<PolicySpec>& builtin_policies();

/// Builds a catalog policy; unset parameters take their defaults. Throws
/// ValidationError for unknown ids, unknown parameter names, or values
/// outside the documented range.
FeedbackPolicy make_policy(std::string_view id, const std::map<std::string, double>& params = {});

// --- closed loop ---

struct FeedbackMeasurement {
  std::vector<Observable> tomography_set;
  int n_systems = 1;
  double delta = 1.0;
  /// Exact estimates and no back-action: the N -> infinity limit.
  bool exact_estimates = false;

  static FeedbackMeasurement exact(int dim);
  static FeedbackMeasurement weak(int dim, int n_systems, double delta);
  void validate() const;
};

/// Round generalized Bloch coordinates tr(rho G_k) to multiples of `pitch`
/// and project back onto the states. pitch = 0 returns rho.
DensityMatrix quantize_estimate(const DensityMatrix& rho, double pitch);

struct StateEstimate {
  DensityMatrix estimate;
  /// rho + Delta rho: the true state after the measurement back-action.
  DensityMatrix perturbed;
  std::vector<MeasurementRecord> records;
  /// sup_distance(perturbed, rho)
  double perturbation_norm;
  /// (d^2 - 1) DeltaA_max^2 / (2 Delta^2) with DeltaA_max the half range of
  /// the widest observable; bounds perturbation_norm.
  double perturbation_budget;
};

/// Tomography on the ensemble, plus the averaged back-action of every
/// measurement applied in sequence.
StateEstimate estimate_state(const DensityMatrix& rho, const FeedbackMeasurement& meas, std::uint64_t seed);

struct FeedbackStepResult {
  DensityMatrix next;
  StateEstimate measurement;
  DensityMatrix quantized_estimate;
  UnitaryOp applied;
};

/// rho' = U(q(rho_hat)) (rho + Delta rho) U(q(rho_hat))^dag
FeedbackStepResult feedback_step(const DensityMatrix& rho, const FeedbackPolicy& policy,
                                 const FeedbackMeasurement& meas, std::uint64_t seed);

/// rho' = U(rho) rho U(rho)^dag, without quantization.
DensityMatrix ideal_feedback_step(const DensityMatrix& rho, const FeedbackPolicy& policy);

DensityMatrix apply_eigen_map(const DensityMatrix& rho, const FeedbackPolicy& policy);
DensityMatrix apply_channel_map(const DensityMatrix& rho, const FeedbackPolicy& policy);

// --- trajectories ---

struct StepDiagnostics {
  double trace_error = 0.0;
  /// Asymmetry before re-Hermitization.
  double hermiticity_error = 0.0;
  /// max_k |lambda_k(t) - lambda_k(0)| over sorted eigenvalues.
  double eigenvalue_drift = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<MeasurementRecord> records;
  std::string policy_id;
  std::uint64_t seed = 0;
  double dt = 0.0;
};

inline constexpr double kDefaultStep = 0.01;

struct IntegratorOptions {
  /// Store every k-th step (t = 0 and the final step are always stored).
  std::size_t sample_every = 1;
  /// Abort when eigenvalue drift exceeds this rate times max(t, 1).
  double max_drift_rate = 1e-6;
  /// Require dt * ||H(rho)|| <= this at every step. A violation by the initial
  /// state is a ValidationError, a later one a NumericalError.
  double max_step_norm = 0.1;
};

/// d rho / dt = -i [H(rho), rho] by classical fourth-order Runge-Kutta with
/// per-step re-Hermitization and trace renormalization; kicks are applied
/// at multiples of the kick period.
Trajectory integrate_nls(const DensityMatrix& rho0, const FeedbackPolicy& policy, double t_final,
                         double dt = kDefaultStep, const IntegratorOptions& options = {});

/// Exact step-by-step flow rho -> U rho U^dag, U = exp(-i H dt), plus kicks,
/// for Hamiltonian policies flagged is_linear() (H independent of rho).
/// Agrees with integrate_nls up to its truncation error but is unitary to
/// rounding, which the linear null tests rely on.
Trajectory propagate_linear(const DensityMatrix& rho0, const FeedbackPolicy& policy, double t_final,
                            double dt = kDefaultStep, std::size_t sample_every = 1);

/// One measure-then-act cycle per dt with U = exp(-i H(rho_hat) dt), kicks
/// delivered as extra cycles with the kick unitary. Exact estimates give a
/// first-order splitting of integrate_nls.
Trajectory closed_loop_trajectory(const DensityMatrix& rho0, const FeedbackPolicy& policy,
                                  const FeedbackMeasurement& meas, double t_final, double dt,
                                  std::uint64_t seed, std::size_t sample_every = 1);

// --- steering ---

struct SteeringOptions {
  int max_iterations = 4;
  /// Stop once the estimated infidelity 1 - <target|rho_hat|target> is at most this.
  double tolerance = 1e-12;
  /// Estimates with purity below 1 - purity_slack raise purity_warning.
  double purity_slack = 1e-6;
};

struct SteeringResult {
  Trajectory trajectory;
  std::vector<UnitaryOp> applied;
  DensityMatrix initial_state;
  DensityMatrix final_state;
  double final_infidelity;
  double estimated_infidelity;
  int iterations;
  bool converged;
  bool purity_warning;
};

/// Repeated weak estimate and rotation of the dominant estimated eigenvector
/// onto `target`.
SteeringResult drive_to_target(const DensityMatrix& initial, const Vector& target,
                               const FeedbackMeasurement& meas, std::uint64_t seed,
                               const SteeringOptions& options = {});

/// Applies the recorded unitaries' inverses in reverse order.
DensityMatrix undo_steering(const SteeringResult& result);

}  // namespace weakfb
