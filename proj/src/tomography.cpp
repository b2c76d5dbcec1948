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

#include "weakfb/measurement.hpp"
#include "weakfb/rng.hpp"

namespace weakfb {

namespace {

// Orthonormal Hermitian basis {I/sqrt(d), G_k/sqrt(2)} under tr(X Y).
std::vector<Matrix> orthonormal_hermitian_basis(int d) {
  std::vector<Matrix> basis;
  basis.push_back(Matrix::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  if (d > 1) {
    for (const auto& g : gell_mann_basis(d)) basis.push_back(g.matrix() / std::sqrt(2.0));
  }
  return basis;
}

// Row 0 encodes the trace constraint, row k the k-th observable.
Eigen::MatrixXd design_matrix(std::span<const Observable> observables, int d) {
  const auto basis = orthonormal_hermitian_basis(d);
  Eigen::MatrixXd t(static_cast<Eigen::Index>(observables.size()) + 1, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t a = 0; a < basis.size(); ++a) {
    t(0, a) = basis[a].trace().real();
    for (std::size_t k = 0; k < observables.size(); ++k) {
      t(k + 1, a) = (basis[a] * observables[k].matrix()).trace().real();
    }
  }
  return t;
}

int common_dimension(std::span<const Observable> observables) {
  if (observables.empty()) throw ValidationError("tomography needs at least one observable");
  const int d = observables.front().dim();
  for (const auto& o : observables) {
    if (o.dim() != d) throw DimensionError("tomography observables differ in dimension");
  }
  return d;
}

}  // namespace

void check_informationally_complete(std::span<const Observable> observables) {
  const int d = common_dimension(observables);
  const Eigen::MatrixXd t = design_matrix(observables, d);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t);
  const auto& s = svd.singularValues();
  const double threshold = 1e-10 * std::max(1.0, s[0]);
  const auto rank = (s.array() > threshold).count();
  if (rank < static_cast<Eigen::Index>(d) * d) {
    throw ValidationError("observable set is rank deficient: together with I it does not span the "
                          "Hermitian matrices (rank " + std::to_string(rank) + " < " +
                          std::to_string(d * d) + ")");
  }
}

Matrix linear_inversion(std::span<const Observable> observables, std::span<const double> expectations) {
  if (observables.size() != expectations.size()) {
    throw ValidationError("linear_inversion: one expectation per observable required");
  }
  check_informationally_complete(observables);
  const int d = observables.front().dim();
  const Eigen::MatrixXd t = design_matrix(observables, d);
  Eigen::VectorXd rhs(t.rows());
  rhs[0] = 1.0;
  for (std::size_t k = 0; k < expectations.size(); ++k) rhs[k + 1] = expectations[k];
  const Eigen::VectorXd coeffs = t.colPivHouseholderQr().solve(rhs);
  const auto basis = orthonormal_hermitian_basis(d);
  Matrix out = Matrix::Zero(d, d);
  for (std::size_t a = 0; a < basis.size(); ++a) out += coeffs[a] * basis[a];
  return hermitize(out);
}

DensityMatrix project_to_state(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(hermitian));
  RealVector w = solver.eigenvalues().cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) throw NumericalError("project_to_state: no positive spectral weight");
  w /= total;
  const Matrix& v = solver.eigenvectors();
  return DensityMatrix::from_trusted(v * w.cast<Complex>().asDiagonal() * v.adjoint());
}

TomographyResult weak_tomography(const DensityMatrix& rho_true, std::span<const Observable> observables,
                                 const WeakMeasurementConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_informationally_complete(observables);
  if (rho_true.dim() != observables.front().dim()) throw DimensionError("weak_tomography: dimension mismatch");
  TomographyResult result;
  for (std::size_t k = 0; k < observables.size(); ++k) {
    WeakMeasurementConfig per = cfg;
    per.observable = observables[k];
    result.records.push_back(collective_weak_measure(rho_true, per, derive_seed(seed, k)));
    result.outcomes.push_back(result.records.back().outcome);
  }
  result.raw_estimate = linear_inversion(observables, result.outcomes);
  result.estimate = project_to_state(result.raw_estimate);
  return result;
}

TomographyResult exact_tomography(const DensityMatrix& rho_true, std::span<const Observable> observables) {
  check_informationally_complete(observables);
  if (rho_true.dim() != observables.front().dim()) throw DimensionError("exact_tomography: dimension mismatch");
  TomographyResult result;
  for (const auto& o : observables) result.outcomes.push_back(expectation(rho_true, o));
  result.raw_estimate = linear_inversion(observables, result.outcomes);
  result.estimate = project_to_state(result.raw_estimate);
  return result;
}

}  // namespace weakfb
