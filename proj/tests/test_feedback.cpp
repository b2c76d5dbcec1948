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

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "weakfb/errors.hpp"
#include "weakfb/feedback.hpp"
#include "weakfb/rng.hpp"

namespace weakfb {
namespace {

using testing::mat;
using testing::max_abs;
using testing::oracles;

Matrix pauli(char c) { return Observable::named(std::string(1, c)).matrix(); }

TEST(Integrator, LinearHamiltonianMatchesExactPropagator) {
  const Matrix h0 = 0.5 * pauli('x') + 0.2 * pauli('z');
  const DensityMatrix rho0 = DensityMatrix::pure(bloch_ket(1.0, 0.3));
  const Trajectory traj = integrate_nls(rho0, constant_hamiltonian(h0), 10.0, 0.01);
  const Matrix u = unitary_propagator(h0, 10.0);
  EXPECT_LT(max_abs(traj.states.back().matrix() - u * rho0.matrix() * u.adjoint()), 1e-8);
  EXPECT_NEAR(traj.times.back(), 10.0, 1e-12);
}

TEST(Integrator, MeanFieldMatchesReferenceSolver) {
  for (const auto& c : oracles()["mean_field"]) {
    const auto g = c["g"].get<std::vector<double>>();
    const auto r0 = c["r0"].get<std::vector<double>>();
    const auto ref = c["bloch"].get<std::vector<double>>();
    const DensityMatrix rho0 = from_bloch(Eigen::Vector3d(r0[0], r0[1], r0[2]));
    const Trajectory traj = integrate_nls(rho0, mean_field_bloch(g[0], g[1], g[2]), c["t"].get<double>(), 0.01);
    const Eigen::Vector3d r = bloch_vector(traj.states.back());
    EXPECT_LT((r - Eigen::Vector3d(ref[0], ref[1], ref[2])).norm(), 1e-8);
  }
}

TEST(Integrator, FourthOrderConvergence) {
  const auto& c = oracles()["mean_field"][1];
  const auto g = c["g"].get<std::vector<double>>();
  const auto r0 = c["r0"].get<std::vector<double>>();
  const auto ref = c["bloch"].get<std::vector<double>>();
  const DensityMatrix rho0 = from_bloch(Eigen::Vector3d(r0[0], r0[1], r0[2]));
  auto error = [&](double dt) {
    const Trajectory traj = integrate_nls(rho0, mean_field_bloch(g[0], g[1], g[2]), 5.0, dt);
    return (bloch_vector(traj.states.back()) - Eigen::Vector3d(ref[0], ref[1], ref[2])).norm();
  };
  const double ratio = error(0.0625) / error(0.03125);
  EXPECT_GT(ratio, 12.0);
  EXPECT_LT(ratio, 20.0);
}

TEST(Integrator, KickedTopMatchesReference) {
  for (const auto& c : oracles()["kicked_top"]) {
    const FeedbackPolicy p =
        kicked_nonlinear_top(c["k"].get<double>(), c["period"].get<double>(), c["beta"].get<double>());
    const DensityMatrix rho0(mat(c["rho0"]));
    const auto ref = c["bloch"].get<std::vector<double>>();
    // The kicks amplify truncation error, hence the finer step.
    const Trajectory traj = integrate_nls(rho0, p, 5.0, 0.0025);
    const Eigen::Vector3d r = bloch_vector(traj.states.back());
    EXPECT_LT((r - Eigen::Vector3d(ref[0], ref[1], ref[2])).norm(), 1e-8);
    const Trajectory exact = propagate_linear(rho0, kicked_nonlinear_top(0.0), 5.0, 0.01);
    EXPECT_EQ(exact.states.size(), 501u);
  }
}

TEST(Integrator, PreservesSpectrumAndTrace) {
  Rng rng(17);
  const DensityMatrix rho0 = random_density_matrix(2, rng);
  const Trajectory traj = integrate_nls(rho0, mean_field_bloch(0.7, 0.0, 1.1), 20.0, 0.01);
  for (const auto& d : traj.diagnostics) {
    EXPECT_LT(d.trace_error, 1e-12);
    EXPECT_LT(d.eigenvalue_drift, 1e-9);
  }
}

TEST(Integrator, RejectsOversizedStep) {
  const DensityMatrix rho0 = DensityMatrix::basis_state(2, 0);
  EXPECT_THROW(integrate_nls(rho0, constant_hamiltonian(50.0 * pauli('x')), 1.0, 0.01), ValidationError);
  EXPECT_THROW(integrate_nls(rho0, kicked_nonlinear_top(3.0, 1.0), 1.0, 0.03), ValidationError);
}

TEST(Integrator, SamplingKeepsEndpoints) {
  const DensityMatrix rho0 = DensityMatrix::basis_state(2, 0);
  IntegratorOptions opts;
  opts.sample_every = 7;
  const Trajectory traj = integrate_nls(rho0, mean_field_bloch(0, 0, 1), 1.0, 0.01, opts);
  EXPECT_DOUBLE_EQ(traj.times.front(), 0.0);
  EXPECT_NEAR(traj.times.back(), 1.0, 1e-12);
  EXPECT_EQ(traj.states.size(), traj.times.size());
}

TEST(Policies, EigenMapIsIsospectral) {
  const FeedbackPolicy p = eigenbasis_to_computational(3);
  for (int k = 0; k < 100; ++k) {
    Rng rng(derive_seed(2024, k));
    const DensityMatrix rho = random_density_matrix(3, rng);
    const DensityMatrix out = p.map_state(rho);
    EXPECT_LT((out.eigenvalues() - rho.eigenvalues()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(max_abs(out.matrix() - Matrix(out.matrix().diagonal().asDiagonal())), 1e-15);
    EXPECT_LE(out(0, 0).real(), out(1, 1).real());
  }
}

TEST(Policies, NonIsospectralEigenMapIsRejected) {
  const FeedbackPolicy bad = FeedbackPolicy::eigen_map(
      "bad", 2, [](const DensityMatrix&) { return DensityMatrix::maximally_mixed(2); });
  EXPECT_THROW(bad.map_state(DensityMatrix::basis_state(2, 0)), ValidationError);
}

TEST(Policies, NonHermitianHamiltonianIsRejected) {
  const FeedbackPolicy bad = FeedbackPolicy::hamiltonian_map("bad", 2, [](const DensityMatrix&) {
    Matrix h = Matrix::Zero(2, 2);
    h(0, 1) = 1.0;
    return h;
  });
  EXPECT_THROW(bad.hamiltonian(DensityMatrix::maximally_mixed(2)), ValidationError);
}

TEST(Policies, WitnessSeparatesMixtureFromMixedImages) {
  const FeedbackPolicy p = z_conditioned_flip(std::numbers::pi / 2);
  const DensityMatrix of_mix = ideal_feedback_step(DensityMatrix::maximally_mixed(2), p);
  const Matrix mix_of = 0.5 * (ideal_feedback_step(DensityMatrix::basis_state(2, 0), p).matrix() +
                               ideal_feedback_step(DensityMatrix::basis_state(2, 1), p).matrix());
  EXPECT_NEAR(trace_distance(of_mix, DensityMatrix(mix_of)), 0.5, 1e-15);
}

TEST(Policies, LinearPolicyCommutesWithMixing) {
  Rng rng(5);
  const FeedbackPolicy p = fixed_conjugation(random_unitary(2, rng));
  const DensityMatrix a = random_density_matrix(2, rng);
  const DensityMatrix b = random_density_matrix(2, rng);
  const DensityMatrix mix(0.3 * a.matrix() + 0.7 * b.matrix());
  const Matrix separate = 0.3 * p.map_state(a).matrix() + 0.7 * p.map_state(b).matrix();
  EXPECT_LT(max_abs(p.map_state(mix).matrix() - separate), 1e-14);
}

TEST(Policies, CatalogValidation) {
  EXPECT_NO_THROW(make_policy("kicked_top", {{"k", 2.0}}));
  EXPECT_EQ(make_policy("kicked_nonlinear_top").id(), "kicked_top");
  EXPECT_THROW(make_policy("nope"), ValidationError);
  EXPECT_THROW(make_policy("kicked_top", {{"q", 1.0}}), ValidationError);
  EXPECT_THROW(make_policy("kicked_top", {{"k", -1.0}}), ValidationError);
  EXPECT_TRUE(make_policy("kicked_top", {{"k", 0.0}}).is_linear());
  EXPECT_FALSE(make_policy("kicked_top").is_linear());
  for (const auto& spec : builtin_policies()) EXPECT_NO_THROW(make_policy(spec.id)) << spec.id;
}

TEST(Policies, ConjugatedFrameIsCovariant) {
  Rng rng(9);
  const UnitaryOp v = random_unitary(2, rng);
  const FeedbackPolicy p = mean_field_bloch(0.4, 0.9, -0.2);
  const FeedbackPolicy q = p.conjugated(v);
  const DensityMatrix rho = random_density_matrix(2, rng);
  const Matrix expected = v.matrix() * p.hamiltonian(apply_unitary(rho, v.adjoint())) * v.matrix().adjoint();
  EXPECT_LT(max_abs(q.hamiltonian(rho) - expected), 1e-14);
}

TEST(Feedback, ExactStepIsIdealStep) {
  Rng rng(1);
  const DensityMatrix rho = random_density_matrix(2, rng);
  const FeedbackPolicy p = z_conditioned_flip();
  const FeedbackStepResult r = feedback_step(rho, p, FeedbackMeasurement::exact(2), 3);
  EXPECT_LT(sup_distance(r.next, ideal_feedback_step(rho, p)), 1e-15);
}

TEST(Feedback, BackActionStaysWithinBudget) {
  Rng rng(2);
  const DensityMatrix rho = random_density_matrix(3, rng);
  const StateEstimate est = estimate_state(rho, FeedbackMeasurement::weak(3, 1000, 30.0), 4);
  EXPECT_LE(est.perturbation_norm, est.perturbation_budget);
  EXPECT_GT(est.perturbation_norm, 0.0);
}

TEST(Feedback, QuantizationRoundsCoordinates) {
  const DensityMatrix rho = from_bloch(Eigen::Vector3d(0.26, -0.11, 0.52));
  const Eigen::Vector3d r = bloch_vector(quantize_estimate(rho, 0.25));
  EXPECT_NEAR(r.x(), 0.25, 1e-14);
  EXPECT_NEAR(r.y(), 0.0, 1e-14);
  EXPECT_NEAR(r.z(), 0.5, 1e-14);
  EXPECT_LT(sup_distance(quantize_estimate(rho, 0.0), rho), 1e-15);
}

TEST(Feedback, ClosedLoopIsDeterministicPerSeed) {
  const DensityMatrix rho0 = DensityMatrix::pure(bloch_ket(1.0, 0.0));
  const FeedbackMeasurement meas = FeedbackMeasurement::weak(2, 1000, 30.0);
  const Trajectory a = closed_loop_trajectory(rho0, mean_field_bloch(0, 0, 1), meas, 0.5, 0.05, 77);
  const Trajectory b = closed_loop_trajectory(rho0, mean_field_bloch(0, 0, 1), meas, 0.5, 0.05, 77);
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i].matrix(), b.states[i].matrix());
}

TEST(Steering, ExactEstimatesReachTargetAndUndo) {
  Rng rng(3);
  const DensityMatrix in = DensityMatrix::pure(random_pure_state(2, rng));
  const Vector target = bloch_ket(0.4, 2.0);
  const SteeringResult r = drive_to_target(in, target, FeedbackMeasurement::exact(2), 0);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.final_infidelity, 1e-14);
  EXPECT_LT(sup_distance(undo_steering(r), in), 1e-14);
}

TEST(Steering, MixedInputRaisesPurityWarning) {
  const SteeringResult r = drive_to_target(from_bloch(Eigen::Vector3d(0.0, 0.0, 0.5)), bloch_ket(0.0, 0.0),
                                           FeedbackMeasurement::exact(2), 0);
  EXPECT_TRUE(r.purity_warning);
}

}  // namespace
}  // namespace weakfb
