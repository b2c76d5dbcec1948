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

#include "weakfb/feedback.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "weakfb/rng.hpp"

namespace weakfb {

void FeedbackMeasurement::validate() const {
  if (tomography_set.empty()) throw ValidationError("feedback measurement needs a tomography set");
  check_informationally_complete(tomography_set);
  if (exact_estimates) return;
  if (n_systems < 1) throw ValidationError("n_systems must be >= 1");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ValidationError("delta must be finite and >= 0");
}

FeedbackMeasurement FeedbackMeasurement::exact(int dim) {
  FeedbackMeasurement m;
  m.tomography_set = gell_mann_basis(dim);
  m.n_systems = 1;
  m.delta = 0.0;
  m.exact_estimates = true;
  return m;
}

FeedbackMeasurement FeedbackMeasurement::weak(int dim, int n_systems, double delta) {
  FeedbackMeasurement m;
  m.tomography_set = gell_mann_basis(dim);
  m.n_systems = n_systems;
  m.delta = delta;
  m.exact_estimates = false;
  m.validate();
  return m;
}

DensityMatrix quantize_estimate(const DensityMatrix& rho, double pitch) {
  if (!(pitch >= 0.0) || !std::isfinite(pitch)) throw ValidationError("quantization pitch must be >= 0");
  if (pitch == 0.0) return rho;
  const int d = rho.dim();
  Matrix out = Matrix::Identity(d, d) / static_cast<double>(d);
  for (const auto& g : gell_mann_basis(d)) {
    const double c = expectation(rho, g);
    out += 0.5 * (pitch * std::round(c / pitch)) * g.matrix();
  }
  return project_to_state(out);
}

StateEstimate estimate_state(const DensityMatrix& rho, const FeedbackMeasurement& meas, std::uint64_t seed) {
  meas.validate();
  if (meas.tomography_set.front().dim() != rho.dim()) throw DimensionError("tomography set/state dimension mismatch");
  if (meas.exact_estimates) return StateEstimate{rho, rho, {}, 0.0, 0.0};

  WeakMeasurementConfig cfg;
  cfg.delta = meas.delta;
  cfg.n_systems = meas.n_systems;
  TomographyResult tomo = weak_tomography(rho, meas.tomography_set, cfg, seed);

  DensityMatrix perturbed = rho;
  double widest = 0.0;
  for (const auto& obs : meas.tomography_set) {
    perturbed = averaged_channel(perturbed, obs, meas.delta);
    widest = std::max(widest, obs.half_range());
  }
  const int d = rho.dim();
  const double budget = meas.delta > 0.0
                            ? (d * d - 1) * widest * widest / (2.0 * meas.delta * meas.delta)
                            : std::numeric_limits<double>::infinity();
  const double norm = sup_distance(perturbed, rho);
  return StateEstimate{tomo.estimate, perturbed, std::move(tomo.records), norm, budget};
}

FeedbackStepResult feedback_step(const DensityMatrix& rho, const FeedbackPolicy& policy,
                                 const FeedbackMeasurement& meas, std::uint64_t seed) {
  if (policy.kind() != PolicyKind::unitary_map) {
    throw ValidationError("feedback_step needs a unitary_map policy, got " + std::string(to_string(policy.kind())));
  }
  StateEstimate est = estimate_state(rho, meas, seed);
  DensityMatrix q = policy.discrimination() > 0.0 ? quantize_estimate(est.estimate, policy.discrimination())
                                                  : est.estimate;
  UnitaryOp u = policy.unitary(q);
  DensityMatrix next = apply_unitary(est.perturbed, u);
  return FeedbackStepResult{std::move(next), std::move(est), std::move(q), std::move(u)};
}

DensityMatrix ideal_feedback_step(const DensityMatrix& rho, const FeedbackPolicy& policy) {
  return apply_unitary(rho, policy.unitary(rho));
}

DensityMatrix apply_eigen_map(const DensityMatrix& rho, const FeedbackPolicy& policy) {
  if (policy.kind() != PolicyKind::eigen_map) throw ValidationError("apply_eigen_map needs an eigen_map policy");
  return policy.map_state(rho);
}

DensityMatrix apply_channel_map(const DensityMatrix& rho, const FeedbackPolicy& policy) {
  if (policy.kind() != PolicyKind::channel_map) throw ValidationError("apply_channel_map needs a channel_map policy");
  return policy.map_state(rho);
}

// --- trajectories ---

namespace {

std::size_t step_count(double t_final, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ValidationError("t_final must be finite and >= 0");
  const double n = std::round(t_final / dt);
  if (std::abs(n * dt - t_final) > 1e-9 * std::max(1.0, t_final)) {
    throw ValidationError("t_final must be an integer multiple of dt");
  }
  return static_cast<std::size_t>(n);
}

// Steps between kicks, or 0 when the policy has none.
std::size_t kick_stride(const FeedbackPolicy& policy, double dt) {
  if (!policy.has_kick()) return 0;
  const double n = std::round(policy.kick_period() / dt);
  if (n < 1.0 || std::abs(n * dt - policy.kick_period()) > 1e-9 * policy.kick_period()) {
    throw ValidationError("kick period must be an integer multiple of dt");
  }
  return static_cast<std::size_t>(n);
}

Matrix nls_rhs(const FeedbackPolicy& policy, const Matrix& x) {
  const Matrix h = policy.hamiltonian(DensityMatrix::from_trusted(hermitize(x)));
  return Complex(0.0, -1.0) * (h * x - x * h);
}

double spectral_norm(const Matrix& h) {
  return hermitian_eigenvalues(h).cwiseAbs().maxCoeff();
}

StepDiagnostics diagnose(const Matrix& raw, const RealVector& spectrum0, RealVector* spectrum) {
  StepDiagnostics diag;
  diag.hermiticity_error = hermiticity_error(raw);
  diag.trace_error = std::abs(raw.trace() - Complex(1.0, 0.0));
  *spectrum = hermitian_eigenvalues(hermitize(raw));
  diag.eigenvalue_drift = (*spectrum - spectrum0).cwiseAbs().maxCoeff();
  return diag;
}

Matrix normalized(const Matrix& raw) {
  Matrix m = hermitize(raw);
  return m / m.trace().real();
}

}  // namespace

Trajectory integrate_nls(const DensityMatrix& rho0, const FeedbackPolicy& policy, double t_final, double dt,
                         const IntegratorOptions& options) {
  if (policy.kind() != PolicyKind::hamiltonian_map) throw ValidationError("integrate_nls needs a hamiltonian_map policy");
  if (rho0.dim() != policy.dim()) throw DimensionError("integrate_nls: state/policy dimension mismatch");
  if (options.sample_every == 0) throw ValidationError("sample_every must be >= 1");
  const std::size_t steps = step_count(t_final, dt);
  const std::size_t stride = kick_stride(policy, dt);

  Trajectory traj;
  traj.policy_id = policy.id();
  traj.dt = dt;
  traj.times.push_back(0.0);
  traj.states.push_back(rho0);
  traj.diagnostics.push_back({});

  const RealVector spectrum0 = rho0.eigenvalues();
  RealVector spectrum;
  Matrix rho = rho0.matrix();
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    const Matrix h = policy.hamiltonian(DensityMatrix::from_trusted(rho));
    if (dt * spectral_norm(h) > options.max_step_norm) {
      std::ostringstream msg;
      msg << "step size too large at t = " << t << ": dt * ||H|| = " << dt * spectral_norm(h) << " > "
          << options.max_step_norm;
      // At t = dt the bound depends only on the inputs.
      if (n == 1) throw ValidationError(msg.str());
      throw NumericalError(msg.str());
    }
    const Complex ih(0.0, -1.0);
    const Matrix k1 = ih * (h * rho - rho * h);
    const Matrix k2 = nls_rhs(policy, rho + 0.5 * dt * k1);
    const Matrix k3 = nls_rhs(policy, rho + 0.5 * dt * k2);
    const Matrix k4 = nls_rhs(policy, rho + dt * k3);
    const Matrix raw = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    StepDiagnostics diag = diagnose(raw, spectrum0, &spectrum);
    rho = normalized(raw);
    if (stride != 0 && n % stride == 0) {
      const Matrix k = policy.kick(DensityMatrix::from_trusted(rho)).matrix();
      rho = normalized(k * rho * k.adjoint());
    }
    if (diag.eigenvalue_drift > options.max_drift_rate * std::max(t, 1.0)) {
      std::ostringstream msg;
      msg << "eigenvalue drift " << diag.eigenvalue_drift << " at t = " << t << " exceeds "
          << options.max_drift_rate << " per unit time (dt = " << dt << ")";
      throw NumericalError(msg.str());
    }
    if (n % options.sample_every == 0 || n == steps) {
      traj.times.push_back(t);
      traj.states.push_back(DensityMatrix::from_trusted(rho));
      traj.diagnostics.push_back(diag);
    }
  }
  return traj;
}

Trajectory propagate_linear(const DensityMatrix& rho0, const FeedbackPolicy& policy, double t_final, double dt,
                            std::size_t sample_every) {
  if (policy.kind() != PolicyKind::hamiltonian_map || !policy.is_linear()) {
    throw ValidationError("propagate_linear needs a linear hamiltonian_map policy, '" + policy.id() + "' is not");
  }
  if (rho0.dim() != policy.dim()) throw DimensionError("propagate_linear: state/policy dimension mismatch");
  if (sample_every == 0) throw ValidationError("sample_every must be >= 1");
  const std::size_t steps = step_count(t_final, dt);
  const std::size_t stride = kick_stride(policy, dt);

  Trajectory traj;
  traj.policy_id = policy.id();
  traj.dt = dt;
  traj.times.push_back(0.0);
  traj.states.push_back(rho0);
  traj.diagnostics.push_back({});

  const RealVector spectrum0 = rho0.eigenvalues();
  RealVector spectrum;
  const Matrix u = unitary_propagator(policy.hamiltonian(rho0), dt);
  Matrix rho = rho0.matrix();
  for (std::size_t n = 1; n <= steps; ++n) {
    Matrix raw = u * rho * u.adjoint();
    if (stride != 0 && n % stride == 0) {
      const Matrix k = policy.kick(DensityMatrix::from_trusted(hermitize(raw))).matrix();
      raw = k * raw * k.adjoint();
    }
    StepDiagnostics diag = diagnose(raw, spectrum0, &spectrum);
    rho = normalized(raw);
    if (n % sample_every == 0 || n == steps) {
      traj.times.push_back(static_cast<double>(n) * dt);
      traj.states.push_back(DensityMatrix::from_trusted(rho));
      traj.diagnostics.push_back(diag);
    }
  }
  return traj;
}

Trajectory closed_loop_trajectory(const DensityMatrix& rho0, const FeedbackPolicy& policy,
                                  const FeedbackMeasurement& meas, double t_final, double dt,
                                  std::uint64_t seed, std::size_t sample_every) {
  if (policy.kind() != PolicyKind::hamiltonian_map) {
    throw ValidationError("closed_loop_trajectory needs a hamiltonian_map policy");
  }
  if (rho0.dim() != policy.dim()) throw DimensionError("closed_loop_trajectory: state/policy dimension mismatch");
  if (sample_every == 0) throw ValidationError("sample_every must be >= 1");
  meas.validate();
  const std::size_t steps = step_count(t_final, dt);
  const std::size_t stride = kick_stride(policy, dt);

  Trajectory traj;
  traj.policy_id = policy.id();
  traj.seed = seed;
  traj.dt = dt;
  traj.times.push_back(0.0);
  traj.states.push_back(rho0);
  traj.diagnostics.push_back({});

  const RealVector spectrum0 = rho0.eigenvalues();
  RealVector spectrum;
  DensityMatrix rho = rho0;
  for (std::size_t n = 1; n <= steps; ++n) {
    const bool sampled = n % sample_every == 0 || n == steps;
    StateEstimate est = estimate_state(rho, meas, derive_seed(seed, 2 * n));
    DensityMatrix q = policy.discrimination() > 0.0 ? quantize_estimate(est.estimate, policy.discrimination())
                                                    : est.estimate;
    const Matrix u = unitary_propagator(policy.hamiltonian(q), dt);
    Matrix raw = u * est.perturbed.matrix() * u.adjoint();
    if (sampled) {
      for (auto& r : est.records) traj.records.push_back(std::move(r));
    }

    if (stride != 0 && n % stride == 0) {
      StateEstimate kick_est =
          estimate_state(DensityMatrix::from_trusted(normalized(raw)), meas, derive_seed(seed, 2 * n + 1));
      DensityMatrix kq = policy.discrimination() > 0.0
                             ? quantize_estimate(kick_est.estimate, policy.discrimination())
                             : kick_est.estimate;
      const Matrix k = policy.kick(kq).matrix();
      raw = k * kick_est.perturbed.matrix() * k.adjoint();
    }
    StepDiagnostics diag = diagnose(raw, spectrum0, &spectrum);
    rho = DensityMatrix::from_trusted(normalized(raw));
    if (sampled) {
      traj.times.push_back(static_cast<double>(n) * dt);
      traj.states.push_back(rho);
      traj.diagnostics.push_back(diag);
    }
  }
  return traj;
}

// --- steering ---

SteeringResult drive_to_target(const DensityMatrix& initial, const Vector& target, const FeedbackMeasurement& meas,
                               std::uint64_t seed, const SteeringOptions& options) {
  if (target.size() != initial.dim()) throw DimensionError("target/state dimension mismatch");
  if (options.max_iterations < 0) throw ValidationError("max_iterations must be >= 0");
  meas.validate();
  const Vector t = target / target.norm();
  const FeedbackPolicy policy = rotate_to_target(t);

  SteeringResult result{Trajectory{}, {}, initial, initial, 0.0, 0.0, 0, false, false};
  result.trajectory.policy_id = policy.id();
  result.trajectory.seed = seed;
  result.trajectory.dt = 1.0;
  result.trajectory.times.push_back(0.0);
  result.trajectory.states.push_back(initial);
  result.trajectory.diagnostics.push_back({});

  DensityMatrix rho = initial;
  result.estimated_infidelity = 1.0 - fidelity_with_pure(initial, t);
  for (int it = 0; it < options.max_iterations; ++it) {
    StateEstimate est = estimate_state(rho, meas, derive_seed(seed, static_cast<std::uint64_t>(it)));
    rho = est.perturbed;
    result.estimated_infidelity = 1.0 - fidelity_with_pure(est.estimate, t);
    if (est.estimate.purity() < 1.0 - options.purity_slack) result.purity_warning = true;
    for (auto& r : est.records) result.trajectory.records.push_back(std::move(r));
    if (result.estimated_infidelity <= options.tolerance) {
      result.converged = true;
      break;
    }
    const UnitaryOp u = policy.unitary(est.estimate);
    rho = apply_unitary(rho, u);
    result.applied.push_back(u);
    ++result.iterations;
    result.trajectory.times.push_back(static_cast<double>(result.iterations));
    result.trajectory.states.push_back(rho);
    result.trajectory.diagnostics.push_back(
        {std::abs(rho.matrix().trace().real() - 1.0), hermiticity_error(rho.matrix()), 0.0});
  }
  result.final_state = rho;
  result.final_infidelity = std::max(0.0, 1.0 - fidelity_with_pure(rho, t));
  return result;
}

DensityMatrix undo_steering(const SteeringResult& result) {
  DensityMatrix rho = result.final_state;
  for (auto it = result.applied.rbegin(); it != result.applied.rend(); ++it) rho = apply_unitary(rho, it->adjoint());
  return rho;
}

}  // namespace weakfb
