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

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "weakfb/errors.hpp"

// Dense finite-dimensional state and operator algebra. hbar = 1 everywhere.
//
// Subsystem convention: index 0 is the leftmost tensor factor, so for
// rho_0 (x) rho_1 the basis index is i0 * d1 + i1.
namespace weakfb {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kAlgebraicTol = 1e-12;
inline constexpr double kSpectralTol = 1e-10;

// Upper bound on stored complex entries (dim^2) of any dense operator.
inline constexpr std::size_t kDefaultEntryCap = std::size_t{1} << 20;

class Rng;

/// Largest |M - M^dagger| entry.
double hermiticity_error(const Matrix& m);

/// (M + M^dagger) / 2
Matrix hermitize(const Matrix& m);

/// Eigenvalues of a Hermitian matrix in ascending order.
RealVector hermitian_eigenvalues(const Matrix& m);

/// exp(-i t H) for Hermitian H, via its eigendecomposition.
Matrix unitary_propagator(const Matrix& hamiltonian, double t);

class DensityMatrix {
 public:
  /// Validates all state invariants. Asymmetry up to kSpectralTol and trace
  /// error up to kSpectralTol are accepted and then removed, so the stored
  /// matrix is Hermitian and has unit trace to kAlgebraicTol.
  explicit DensityMatrix(Matrix entries);

  static DensityMatrix pure(const Vector& psi);
  static DensityMatrix maximally_mixed(int dim);
  static DensityMatrix diagonal(std::span<const double> populations);
  static DensityMatrix basis_state(int dim, int index);

  /// For outputs of positivity-preserving maps (conjugation, Kraus sums,
  /// tensor products, partial traces). Hermiticity and trace are still
  /// guarded; the eigenvalue check is skipped.
  static DensityMatrix from_trusted(Matrix entries);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  Complex operator()(int row, int col) const { return entries_(row, col); }

  double purity() const;
  RealVector eigenvalues() const;

 private:
  struct Trusted {};
  DensityMatrix(Matrix entries, Trusted);
  Matrix entries_;
};

/// Hermitian operator with its cached spectral decomposition.
class Observable {
 public:
  /// Distinct eigenvalue with the indices (into eigenvalues()) spanning it.
  struct Eigenspace {
    double value;
    std::vector<int> indices;
    Matrix projector;
  };

  explicit Observable(Matrix entries, std::string name = {});

  static Observable pauli_x();
  static Observable pauli_y();
  static Observable pauli_z();
  /// sigma_x, sigma_y, sigma_z (also x, y, z).
  static Observable named(std::string_view name);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const std::string& name() const { return name_; }
  const Matrix& matrix() const { return entries_; }
  const RealVector& eigenvalues() const { return eigenvalues_; }
  /// Column k is the eigenvector of eigenvalues()[k].
  const Matrix& eigenvectors() const { return eigenvectors_; }
  const std::vector<Eigenspace>& eigenspaces() const { return eigenspaces_; }

  /// (a_max - a_min) / 2, the largest standard deviation any state can have.
  double half_range() const;
  /// Smallest gap between distinct eigenvalues; infinity for a multiple of I.
  double min_gap() const;

 private:
  Matrix entries_;
  std::string name_;
  RealVector eigenvalues_;
  Matrix eigenvectors_;
  std::vector<Eigenspace> eigenspaces_;
};

class UnitaryOp {
 public:
  explicit UnitaryOp(Matrix entries);
  static UnitaryOp identity(int dim);
  static UnitaryOp from_hamiltonian(const Matrix& hamiltonian, double t);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  UnitaryOp adjoint() const;
  UnitaryOp operator*(const UnitaryOp& rhs) const;

 private:
  Matrix entries_;
};

class KrausChannel {
 public:
  explicit KrausChannel(std::vector<Matrix> operators);

  static KrausChannel identity(int dim);
  /// Projectors onto the computational basis.
  static KrausChannel full_dephasing(int dim);
  static KrausChannel amplitude_damping(double probability);

  int dim() const;
  const std::vector<Matrix>& operators() const { return operators_; }

 private:
  std::vector<Matrix> operators_;
};

/// tr(rho A); fails if the imaginary residue exceeds kSpectralTol.
double expectation(const DensityMatrix& rho, const Observable& a);
double expectation(const DensityMatrix& rho, const Matrix& hermitian);

/// sqrt(tr rho A^2 - tr(rho A)^2). Radicands in [-1e-12, 0) clamp to zero.
double std_dev(const DensityMatrix& rho, const Observable& a);

DensityMatrix apply_unitary(const DensityMatrix& rho, const UnitaryOp& u);
DensityMatrix apply_kraus(const DensityMatrix& rho, const KrausChannel& channel);

DensityMatrix tensor_product(std::span<const DensityMatrix> states,
                             std::size_t entry_cap = kDefaultEntryCap);

/// Reduced state of subsystem keep_index; dims lists every factor.
DensityMatrix partial_trace(const DensityMatrix& rho_tot, int keep_index,
                            std::span<const int> dims);

/// Entrywise max |rho1 - rho2|.
double sup_distance(const DensityMatrix& rho1, const DensityMatrix& rho2);
double sup_distance(const Matrix& m1, const Matrix& m2);
/// (1/2) sum |eig(rho1 - rho2)|
double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2);
/// <phi1|phi2>
Complex pure_overlap(const Vector& phi1, const Vector& phi2);
/// <psi|rho|psi> for normalized psi.
double fidelity_with_pure(const DensityMatrix& rho, const Vector& psi);

/// Orthonormal eigenvector of the largest eigenvalue. Ties go to the lowest
/// index among the top eigenvalues in ascending order.
Vector dominant_eigenvector(const DensityMatrix& rho);

/// Bloch vector (<sx>, <sy>, <sz>) of a qubit state.
Eigen::Vector3d bloch_vector(const DensityMatrix& rho);
DensityMatrix from_bloch(const Eigen::Vector3d& r);
/// cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>
Vector bloch_ket(double theta, double phi);

/// Traceless Hermitian basis with tr(G_j G_k) = 2 delta_jk (Pauli for d=2).
std::vector<Observable> gell_mann_basis(int dim);

/// Sampling helpers. Ginibre-based states and QR-based Haar unitaries.
Vector random_pure_state(int dim, Rng& rng);
DensityMatrix random_density_matrix(int dim, Rng& rng);
UnitaryOp random_unitary(int dim, Rng& rng);

}  // namespace weakfb
