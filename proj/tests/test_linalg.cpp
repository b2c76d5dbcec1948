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
#include <numbers>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "weakfb/errors.hpp"
#include "weakfb/linalg.hpp"
#include "weakfb/rng.hpp"

namespace weakfb {
namespace {

using testing::mat;
using testing::max_abs;
using testing::oracles;

TEST(Rng, DerivedSeedsAreDeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(5, s));
  EXPECT_EQ(seen.size(), 1000u);
  Rng a(9);
  Rng b(9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Linalg, PropagatorMatchesReferenceExponential) {
  for (const auto& c : oracles()["propagators"]) {
    const Matrix u = unitary_propagator(mat(c["h"]), c["t"].get<double>());
    EXPECT_LT(max_abs(u - mat(c["u"])), 1e-12) << "dim " << u.rows();
  }
}

TEST(Linalg, TraceDistanceMatchesReference) {
  for (const auto& c : oracles()["trace_distances"]) {
    const double d = trace_distance(DensityMatrix(mat(c["a"])), DensityMatrix(mat(c["b"])));
    EXPECT_NEAR(d, c["value"].get<double>(), 1e-12);
  }
}

TEST(Linalg, PartialTraceMatchesReference) {
  for (const auto& c : oracles()["partial_traces"]) {
    const std::vector<int> dims = c["dims"].get<std::vector<int>>();
    const DensityMatrix red = partial_trace(DensityMatrix(mat(c["rho"])), c["keep"].get<int>(), dims);
    EXPECT_LT(max_abs(red.matrix() - mat(c["out"])), 1e-12);
  }
}

TEST(Linalg, TensorThenTraceRecoversFactors) {
  Rng rng(3);
  const std::vector<DensityMatrix> parts{random_density_matrix(2, rng), random_density_matrix(3, rng)};
  const DensityMatrix joint = tensor_product(parts);
  const std::vector<int> dims{2, 3};
  for (int k = 0; k < 2; ++k) EXPECT_LT(sup_distance(partial_trace(joint, k, dims), parts[k]), 1e-14);
}

TEST(Linalg, TensorProductRespectsEntryCap) {
  const std::vector<DensityMatrix> parts(4, DensityMatrix::maximally_mixed(2));
  EXPECT_THROW(tensor_product(parts, 100), ValidationError);
}

TEST(Linalg, DensityMatrixRejectsInvalidInput) {
  Matrix neg(2, 2);
  neg << 1.2, 0, 0, -0.2;
  EXPECT_THROW(DensityMatrix{neg}, ValidationError);
  Matrix trace(2, 2);
  trace << 0.5, 0, 0, 0.4;
  EXPECT_THROW(DensityMatrix{trace}, ValidationError);
  Matrix herm(2, 2);
  herm << 0.5, 0.1, 0.3, 0.5;
  EXPECT_THROW(DensityMatrix{herm}, ValidationError);
}

TEST(Linalg, GellMannBasisIsOrthogonalAndTraceless) {
  for (int d = 2; d <= 4; ++d) {
    const auto basis = gell_mann_basis(d);
    ASSERT_EQ(basis.size(), static_cast<std::size_t>(d * d - 1));
    for (std::size_t i = 0; i < basis.size(); ++i) {
      EXPECT_LT(std::abs(basis[i].matrix().trace()), 1e-14);
      for (std::size_t j = 0; j < basis.size(); ++j) {
        const double ip = (basis[i].matrix() * basis[j].matrix()).trace().real();
        EXPECT_NEAR(ip, i == j ? 2.0 : 0.0, 1e-13);
      }
    }
  }
}

TEST(Linalg, BlochRoundTrip) {
  const Eigen::Vector3d r(0.3, -0.2, 0.5);
  EXPECT_LT((bloch_vector(from_bloch(r)) - r).norm(), 1e-15);
  const DensityMatrix plus = DensityMatrix::pure(bloch_ket(std::numbers::pi / 2, 0.0));
  EXPECT_NEAR(bloch_vector(plus).x(), 1.0, 1e-15);
  EXPECT_THROW(from_bloch(Eigen::Vector3d(1.0, 1.0, 0.0)), ValidationError);
}

TEST(Linalg, RandomUnitaryIsUnitary) {
  Rng rng(11);
  const UnitaryOp u = random_unitary(4, rng);
  EXPECT_LT(max_abs(u.matrix() * u.matrix().adjoint() - Matrix::Identity(4, 4)), 1e-13);
}

TEST(Linalg, DominantEigenvectorOfPureState) {
  Rng rng(2);
  const Vector psi = random_pure_state(3, rng);
  EXPECT_NEAR(std::abs(pure_overlap(dominant_eigenvector(DensityMatrix::pure(psi)), psi)), 1.0, 1e-13);
}

TEST(Linalg, AmplitudeDampingChannel) {
  const DensityMatrix out = apply_kraus(DensityMatrix::basis_state(2, 1), KrausChannel::amplitude_damping(0.25));
  EXPECT_NEAR(out(0, 0).real(), 0.25, 1e-15);
  EXPECT_THROW(KrausChannel::amplitude_damping(1.5), ValidationError);
}

}  // namespace
}  // namespace weakfb
