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

#include "weakfb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "weakfb/rng.hpp"

namespace weakfb {

namespace {

constexpr double kMinEigenvalue = -1e-10;

void require_square(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    std::ostringstream msg;
    msg << what << " must be a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionError(msg.str());
  }
}

void require_same_dim(int a, int b, const char* what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw DimensionError(msg.str());
  }
}

bool is_finite(const Matrix& m) { return m.allFinite(); }

// Guards trace and Hermiticity; returns the cleaned matrix.
Matrix guard_state(Matrix m) {
  require_square(m, "density matrix");
  if (!is_finite(m)) throw ValidationError("density matrix has non-finite entries");
  const double asym = hermiticity_error(m);
  if (asym > kSpectralTol) {
    std::ostringstream msg;
    msg << "density matrix is not Hermitian (asymmetry " << asym << ")";
    throw ValidationError(msg.str());
  }
  m = hermitize(m);
  const double tr = m.trace().real();
  if (std::abs(tr - 1.0) > kSpectralTol) {
    std::ostringstream msg;
    msg << "density matrix trace is " << tr << ", expected 1";
    throw ValidationError(msg.str());
  }
  m /= tr;
  return m;
}

}  // namespace

double hermiticity_error(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

RealVector hermitian_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

Matrix unitary_propagator(const Matrix& hamiltonian, double t) {
  require_square(hamiltonian, "hamiltonian");
  if (hamiltonian.rows() == 2) {
    // H = h0 I + h.sigma, exp(-i H t) = e^{-i h0 t} (cos(|h| t) I - i sin(|h| t) h.sigma / |h|)
    const Matrix h = hermitize(hamiltonian);
    const double h0 = 0.5 * (h(0, 0).real() + h(1, 1).real());
    const double hz = 0.5 * (h(0, 0).real() - h(1, 1).real());
    const double mag = std::sqrt(hz * hz + std::norm(h(0, 1)));
    const Complex global = std::polar(1.0, -t * h0);
    Matrix u = Matrix::Identity(2, 2) * std::cos(mag * t);
    if (mag > 0.0) {
      Matrix traceless = h;
      traceless(0, 0) = hz;
      traceless(1, 1) = -hz;
      u -= Complex(0.0, std::sin(mag * t) / mag) * traceless;
    }
    return global * u;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(hamiltonian));
  const RealVector& w = solver.eigenvalues();
  Vector phases(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) phases[k] = std::polar(1.0, -t * w[k]);
  const Matrix& v = solver.eigenvectors();
  return v * phases.asDiagonal() * v.adjoint();
}

// --- DensityMatrix ---------------------------------------------------------

DensityMatrix::DensityMatrix(Matrix entries) : entries_(guard_state(std::move(entries))) {
  const RealVector w = hermitian_eigenvalues(entries_);
  if (w.minCoeff() < kMinEigenvalue) {
    std::ostringstream msg;
    msg << "density matrix is not positive semidefinite (min eigenvalue " << w.minCoeff() << ")";
    throw ValidationError(msg.str());
  }
}

DensityMatrix::DensityMatrix(Matrix entries, Trusted) : entries_(guard_state(std::move(entries))) {}

DensityMatrix DensityMatrix::from_trusted(Matrix entries) {
  return DensityMatrix(std::move(entries), Trusted{});
}

DensityMatrix DensityMatrix::pure(const Vector& psi) {
  const double norm = psi.norm();
  if (psi.size() == 0 || !(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("pure state needs a non-zero finite vector");
  }
  const Vector v = psi / norm;
  return from_trusted(v * v.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  if (dim < 1) throw DimensionError("dimension must be positive");
  return from_trusted(Matrix::Identity(dim, dim) / static_cast<double>(dim));
}

DensityMatrix DensityMatrix::diagonal(std::span<const double> populations) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(populations.size()),
                          static_cast<Eigen::Index>(populations.size()));
  for (std::size_t i = 0; i < populations.size(); ++i) m(i, i) = populations[i];
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::basis_state(int dim, int index) {
  if (index < 0 || index >= dim) throw DimensionError("basis index out of range");
  Vector v = Vector::Zero(dim);
  v[index] = 1.0;
  return pure(v);
}

double DensityMatrix::purity() const { return (entries_ * entries_).trace().real(); }

RealVector DensityMatrix::eigenvalues() const { return hermitian_eigenvalues(entries_); }

// --- Observable ------------------------------------------------------------

Observable::Observable(Matrix entries, std::string name) : name_(std::move(name)) {
  require_square(entries, "observable");
  if (!is_finite(entries)) throw ValidationError("observable has non-finite entries");
  if (hermiticity_error(entries) > kSpectralTol) {
    throw ValidationError("observable is not Hermitian");
  }
  entries_ = hermitize(entries);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(entries_);
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();

  for (int k = 0; k < eigenvalues_.size(); ++k) {
    const double a = eigenvalues_[k];
    const bool joins = !eigenspaces_.empty() &&
                       std::abs(a - eigenspaces_.back().value) <= 1e-9 * std::max(1.0, std::abs(a));
    if (!joins) eigenspaces_.push_back({a, {}, Matrix::Zero(dim(), dim())});
    auto& space = eigenspaces_.back();
    space.indices.push_back(k);
    space.projector += eigenvectors_.col(k) * eigenvectors_.col(k).adjoint();
  }
  // Degenerate groups share the mean of their numerically split values.
  for (auto& space : eigenspaces_) {
    double sum = 0.0;
    for (int k : space.indices) sum += eigenvalues_[k];
    space.value = sum / static_cast<double>(space.indices.size());
  }
}

Observable Observable::pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return Observable(m, "sigma_x");
}

Observable Observable::pauli_y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return Observable(m, "sigma_y");
}

Observable Observable::pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return Observable(m, "sigma_z");
}

Observable Observable::named(std::string_view name) {
  if (name == "sigma_x" || name == "x") return pauli_x();
  if (name == "sigma_y" || name == "y") return pauli_y();
  if (name == "sigma_z" || name == "z") return pauli_z();
  throw ValidationError("unknown observable '" + std::string(name) + "'");
}

double Observable::half_range() const {
  return 0.5 * (eigenvalues_[eigenvalues_.size() - 1] - eigenvalues_[0]);
}

double Observable::min_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < eigenspaces_.size(); ++k) {
    gap = std::min(gap, eigenspaces_[k].value - eigenspaces_[k - 1].value);
  }
  return gap;
}

// --- UnitaryOp ---------------------------------------------------------------

UnitaryOp::UnitaryOp(Matrix entries) : entries_(std::move(entries)) {
  require_square(entries_, "unitary");
  const Matrix gram = entries_.adjoint() * entries_;
  const double err = (gram - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  if (!(err <= kSpectralTol)) {
    std::ostringstream msg;
    msg << "operator is not unitary (|U^dagger U - I| = " << err << ")";
    throw ValidationError(msg.str());
  }
}

UnitaryOp UnitaryOp::identity(int dim) { return UnitaryOp(Matrix::Identity(dim, dim)); }

UnitaryOp UnitaryOp::from_hamiltonian(const Matrix& hamiltonian, double t) {
  return UnitaryOp(unitary_propagator(hamiltonian, t));
}

UnitaryOp UnitaryOp::adjoint() const { return UnitaryOp(entries_.adjoint()); }

UnitaryOp UnitaryOp::operator*(const UnitaryOp& rhs) const {
  require_same_dim(dim(), rhs.dim(), "unitary product");
  return UnitaryOp(entries_ * rhs.entries_);
}

// --- KrausChannel --------------------------------------------------------------

KrausChannel::KrausChannel(std::vector<Matrix> operators) : operators_(std::move(operators)) {
  if (operators_.empty()) throw ValidationError("Kraus channel needs at least one operator");
  const auto d = operators_.front().rows();
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& k : operators_) {
    if (k.rows() != d || k.cols() != d) throw DimensionError("Kraus operators differ in shape");
    sum += k.adjoint() * k;
  }
  const double err = (sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!(err <= kSpectralTol)) {
    std::ostringstream msg;
    msg << "Kraus operators are not complete (|sum K^dagger K - I| = " << err << ")";
    throw ValidationError(msg.str());
  }
}

KrausChannel KrausChannel::identity(int dim) { return KrausChannel({Matrix::Identity(dim, dim)}); }

KrausChannel KrausChannel::full_dephasing(int dim) {
  std::vector<Matrix> ops;
  for (int k = 0; k < dim; ++k) {
    Matrix p = Matrix::Zero(dim, dim);
    p(k, k) = 1.0;
    ops.push_back(std::move(p));
  }
  return KrausChannel(std::move(ops));
}

KrausChannel KrausChannel::amplitude_damping(double probability) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("damping probability must lie in [0, 1]");
  }
  Matrix k0 = Matrix::Zero(2, 2);
  Matrix k1 = Matrix::Zero(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(1.0 - probability);
  k1(0, 1) = std::sqrt(probability);
  return KrausChannel({k0, k1});
}

int KrausChannel::dim() const { return static_cast<int>(operators_.front().rows()); }

// --- Operations ------------------------------------------------------------------

double expectation(const DensityMatrix& rho, const Matrix& hermitian) {
  require_same_dim(rho.dim(), static_cast<int>(hermitian.rows()), "expectation");
  const Complex value = (rho.matrix() * hermitian).trace();
  if (std::abs(value.imag()) > kSpectralTol) {
    throw NumericalError("expectation has a non-negligible imaginary part");
  }
  return value.real();
}

double expectation(const DensityMatrix& rho, const Observable& a) {
  return expectation(rho, a.matrix());
}

double std_dev(const DensityMatrix& rho, const Observable& a) {
  const double mean = expectation(rho, a);
  const double second = expectation(rho, Matrix(a.matrix() * a.matrix()));
  double radicand = second - mean * mean;
  if (radicand < -kAlgebraicTol) {
    throw NumericalError("negative variance: state or observable is corrupted");
  }
  radicand = std::max(radicand, 0.0);
  return std::sqrt(radicand);
}

DensityMatrix apply_unitary(const DensityMatrix& rho, const UnitaryOp& u) {
  require_same_dim(rho.dim(), u.dim(), "apply_unitary");
  return DensityMatrix::from_trusted(u.matrix() * rho.matrix() * u.matrix().adjoint());
}

DensityMatrix apply_kraus(const DensityMatrix& rho, const KrausChannel& channel) {
  require_same_dim(rho.dim(), channel.dim(), "apply_kraus");
  Matrix out = Matrix::Zero(rho.dim(), rho.dim());
  for (const auto& k : channel.operators()) out += k * rho.matrix() * k.adjoint();
  return DensityMatrix::from_trusted(std::move(out));
}

DensityMatrix tensor_product(std::span<const DensityMatrix> states, std::size_t entry_cap) {
  if (states.empty()) throw ValidationError("tensor_product needs at least one factor");
  std::size_t total = 1;
  for (const auto& s : states) {
    total *= static_cast<std::size_t>(s.dim());
    if (total * total > entry_cap) {
      throw ValidationError("tensor product exceeds the configured entry cap");
    }
  }
  Matrix acc = states.front().matrix();
  for (std::size_t f = 1; f < states.size(); ++f) {
    const Matrix& b = states[f].matrix();
    Matrix next(acc.rows() * b.rows(), acc.cols() * b.cols());
    for (Eigen::Index i = 0; i < acc.rows(); ++i) {
      for (Eigen::Index j = 0; j < acc.cols(); ++j) {
        next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = acc(i, j) * b;
      }
    }
    acc = std::move(next);
  }
  return DensityMatrix::from_trusted(std::move(acc));
}

DensityMatrix partial_trace(const DensityMatrix& rho_tot, int keep_index, std::span<const int> dims) {
  if (dims.empty()) throw DimensionError("partial_trace needs factor dimensions");
  if (keep_index < 0 || keep_index >= static_cast<int>(dims.size())) {
    throw DimensionError("partial_trace keep index out of range");
  }
  long total = 1;
  for (int d : dims) {
    if (d < 1) throw DimensionError("factor dimensions must be positive");
    total *= d;
  }
  require_same_dim(rho_tot.dim(), static_cast<int>(total), "partial_trace");
  long left = 1;
  for (int i = 0; i < keep_index; ++i) left *= dims[i];
  const long kept = dims[keep_index];
  const long right = total / (left * kept);

  const Matrix& m = rho_tot.matrix();
  Matrix out = Matrix::Zero(kept, kept);
  for (long a = 0; a < kept; ++a) {
    for (long b = 0; b < kept; ++b) {
      Complex sum = 0.0;
      for (long l = 0; l < left; ++l) {
        for (long r = 0; r < right; ++r) {
          sum += m((l * kept + a) * right + r, (l * kept + b) * right + r);
        }
      }
      out(a, b) = sum;
    }
  }
  return DensityMatrix::from_trusted(std::move(out));
}

double sup_distance(const Matrix& m1, const Matrix& m2) {
  require_same_dim(static_cast<int>(m1.rows()), static_cast<int>(m2.rows()), "sup_distance");
  return (m1 - m2).cwiseAbs().maxCoeff();
}

double sup_distance(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  return sup_distance(rho1.matrix(), rho2.matrix());
}

double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  require_same_dim(rho1.dim(), rho2.dim(), "trace_distance");
  if (rho1.dim() == 2) {
    // Traceless 2x2 difference: eigenvalues +-sqrt(p^2 + |q|^2).
    const Matrix diff = rho1.matrix() - rho2.matrix();
    const double p = 0.5 * (diff(0, 0).real() - diff(1, 1).real());
    const Complex q = 0.5 * (diff(0, 1) + std::conj(diff(1, 0)));
    return std::sqrt(p * p + std::norm(q));
  }
  const RealVector w = hermitian_eigenvalues(hermitize(rho1.matrix() - rho2.matrix()));
  return 0.5 * w.cwiseAbs().sum();
}

Complex pure_overlap(const Vector& phi1, const Vector& phi2) {
  require_same_dim(static_cast<int>(phi1.size()), static_cast<int>(phi2.size()), "pure_overlap");
  return phi1.dot(phi2);  // Eigen conjugates the left operand.
}

double fidelity_with_pure(const DensityMatrix& rho, const Vector& psi) {
  require_same_dim(rho.dim(), static_cast<int>(psi.size()), "fidelity_with_pure");
  const Vector v = psi / psi.norm();
  return (v.adjoint() * rho.matrix() * v)(0, 0).real();
}

Vector dominant_eigenvector(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rho.matrix());
  const RealVector& w = solver.eigenvalues();
  const auto top = w.size() - 1;
  auto pick = top;
  while (pick > 0 && w[top] - w[pick - 1] <= kAlgebraicTol) --pick;
  return solver.eigenvectors().col(pick);
}

Eigen::Vector3d bloch_vector(const DensityMatrix& rho) {
  if (rho.dim() != 2) throw DimensionError("bloch_vector needs a qubit state");
  const Matrix& m = rho.matrix();
  return {2.0 * m(0, 1).real(), -2.0 * m(0, 1).imag(), (m(0, 0) - m(1, 1)).real()};
}

DensityMatrix from_bloch(const Eigen::Vector3d& r) {
  Matrix m(2, 2);
  m << 0.5 * (1.0 + r.z()), Complex(0.5 * r.x(), -0.5 * r.y()),
      Complex(0.5 * r.x(), 0.5 * r.y()), 0.5 * (1.0 - r.z());
  return DensityMatrix(std::move(m));
}

Vector bloch_ket(double theta, double phi) {
  Vector v(2);
  v << std::cos(0.5 * theta), std::polar(std::sin(0.5 * theta), phi);
  return v;
}

std::vector<Observable> gell_mann_basis(int dim) {
  if (dim < 2) throw DimensionError("Gell-Mann basis needs dim >= 2");
  if (dim == 2) return {Observable::pauli_x(), Observable::pauli_y(), Observable::pauli_z()};
  std::vector<Observable> basis;
  for (int j = 0; j < dim; ++j) {
    for (int k = j + 1; k < dim; ++k) {
      Matrix sym = Matrix::Zero(dim, dim);
      sym(j, k) = sym(k, j) = 1.0;
      basis.emplace_back(sym, "gm_sym_" + std::to_string(j) + std::to_string(k));
      Matrix anti = Matrix::Zero(dim, dim);
      anti(j, k) = Complex(0, -1);
      anti(k, j) = Complex(0, 1);
      basis.emplace_back(anti, "gm_anti_" + std::to_string(j) + std::to_string(k));
    }
  }
  for (int l = 1; l < dim; ++l) {
    Matrix diag = Matrix::Zero(dim, dim);
    const double scale = std::sqrt(2.0 / (l * (l + 1.0)));
    for (int m = 0; m < l; ++m) diag(m, m) = scale;
    diag(l, l) = -l * scale;
    basis.emplace_back(diag, "gm_diag_" + std::to_string(l));
  }
  return basis;
}

Vector random_pure_state(int dim, Rng& rng) {
  Vector v(dim);
  for (int k = 0; k < dim; ++k) v[k] = Complex(rng.normal(), rng.normal());
  return v / v.norm();
}

DensityMatrix random_density_matrix(int dim, Rng& rng) {
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
  }
  Matrix m = g * g.adjoint();
  m /= m.trace().real();
  return DensityMatrix(hermitize(m));
}

UnitaryOp random_unitary(int dim, Rng& rng) {
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < dim; ++k) {
    const double mag = std::abs(r(k, k));
    if (mag > 0.0) q.col(k) *= r(k, k) / mag;
  }
  return UnitaryOp(std::move(q));
}

}  // namespace weakfb
