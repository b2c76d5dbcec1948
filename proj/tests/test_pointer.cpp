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

#include "support.hpp"
#include "weakfb/errors.hpp"
#include "weakfb/measurement.hpp"
#include "weakfb/pointer.hpp"
#include "weakfb/rng.hpp"

namespace weakfb {
namespace {

using testing::mat;
using testing::max_abs;
using testing::oracles;

TEST(Pointer, GridOverlapMatchesClosedForm) {
  const PointerState p = make_gaussian_pointer(1.0, auto_grid(1.0, 3.0, 2048));
  for (double shift : {0.0, 0.5, 1.0, 2.0}) {
    EXPECT_NEAR(std::abs(pointer_overlap(p, shift)), std::exp(-shift * shift / 8.0), 1e-12);
    EXPECT_NEAR(gaussian_overlap(shift, 1.0), std::exp(-shift * shift / 8.0), 1e-15);
  }
  EXPECT_NEAR(quoted_pointer_damping(1.0, 1.0), std::exp(-0.5), 1e-15);
}

TEST(Pointer, ReducedStateMatchesReferenceChannel) {
  for (const auto& c : oracles()["channels"]) {
    const DensityMatrix rho(mat(c["rho"]));
    const Observable a(mat(c["a"]));
    const double delta = c["delta"].get<double>();
    const CouplingConfig cfg{1.0, a, 1};
    const double reach = std::max(std::abs(a.eigenvalues()[0]), std::abs(a.eigenvalues()[a.dim() - 1]));
    const JointState joint(rho, cfg, make_gaussian_pointer(delta, auto_grid(delta, reach, 2048)));
    EXPECT_LT(max_abs(system_reduced(joint, 0).matrix() - mat(c["out"])), 1e-12);
  }
}

TEST(Pointer, EverySystemSeesTheSameChannel) {
  Rng rng(8);
  const DensityMatrix rho = random_density_matrix(2, rng);
  const CouplingConfig cfg{0.5, Observable::pauli_z(), 3};
  const JointState joint(rho, cfg, make_gaussian_pointer(1.0, auto_grid(1.0, 1.5, 2048)));
  const DensityMatrix expected = averaged_channel(rho, cfg.observable, 2.0);
  for (int i = 0; i < 3; ++i) EXPECT_LT(sup_distance(system_reduced(joint, i), expected), 1e-12);
}

TEST(Pointer, MarginalMeanFollowsExpectation) {
  const DensityMatrix rho = from_bloch(Eigen::Vector3d(0.0, 0.0, 0.4));
  const CouplingConfig cfg{2.0, Observable::pauli_z(), 1};
  const JointState joint(rho, cfg, make_gaussian_pointer(1.0, auto_grid(1.0, 2.0, 2048)));
  EXPECT_NEAR(pointer_marginal(joint).mean(), 0.8, 1e-10);
}

TEST(Pointer, StrongLimitFollowsBornRule) {
  const DensityMatrix rho = from_bloch(Eigen::Vector3d(0.3, 0.0, 0.4));  // p(+1) = 0.7
  int plus = 0;
  const int trials = 2000;
  for (int k = 0; k < trials; ++k) {
    const StrongMeasurement m = strong_limit_measure(rho, Observable::pauli_z(), 20.0, 1.0, derive_seed(31, k), 1024);
    ASSERT_TRUE(m.resolved);
    EXPECT_GT(m.fidelity, 1.0 - 1e-12);
    if (m.eigenvalue > 0) ++plus;
  }
  const double sigma = std::sqrt(0.7 * 0.3 / trials);
  EXPECT_NEAR(static_cast<double>(plus) / trials, 0.7, 4.0 * sigma);
}

TEST(Pointer, OverlappingBranchesAreFlagged) {
  const StrongMeasurement m =
      strong_limit_measure(DensityMatrix::maximally_mixed(2), Observable::pauli_z(), 0.1, 1.0, 1, 1024);
  EXPECT_FALSE(m.resolved);
}

TEST(Pointer, SingleProbeSequenceIsTheAveragedChannel) {
  const DensityMatrix rho = from_bloch(Eigen::Vector3d(0.5, 0.5, 0.1));
  MultiProbeConfig cfg;
  cfg.probes = {Probe{Observable::pauli_x(), 0.4, 1.0}};
  EXPECT_LT(sup_distance(sequential_probe_channels(rho, cfg), averaged_channel(rho, Observable::pauli_x(), 2.5)),
            1e-14);
}

TEST(Pointer, CouplingValidation) {
  CouplingConfig cfg;
  cfg.n_systems = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_THROW(make_gaussian_pointer(-1.0, GridSpec{}), ValidationError);
}

}  // namespace
}  // namespace weakfb
