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

#include "weakfb/pointer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "weakfb/rng.hpp"

namespace weakfb {

namespace {

constexpr double kGuardSigmas = 8.0;

double max_abs_eigenvalue(const Observable& a) {
  const auto& w = a.eigenvalues();
  return std::max(std::abs(w[0]), std::abs(w[w.size() - 1]));
}

void check_grid(const GridSpec& grid) {
  if (grid.points < 4) throw ValidationError("pointer grid needs at least 4 points");
  if (!(grid.half_extent > 0.0) || !std::isfinite(grid.half_extent)) {
    throw ValidationError("pointer grid extent must be positive and finite");
  }
}

void check_resolution(const GridSpec& grid, double width) {
  if (grid.spacing() > 0.5 * width) {
    std::ostringstream msg;
    msg << "pointer grid too coarse: spacing " << grid.spacing() << " exceeds width/2 = " << 0.5 * width
        << "; increase the number of points";
    throw ValidationError(msg.str());
  }
}

// Angular wavenumber of DFT bin k.
double wavenumber(std::size_t k, std::size_t m, double spacing) {
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(m) * spacing);
  const auto signed_k = k < (m + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(m);
  return base * signed_k;
}

std::vector<Complex> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<Complex>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// value of eigenvector k, collapsing numerically split degenerate values.
std::vector<double> eigenspace_values(const Observable& a) {
  std::vector<double> out(a.dim());
  for (const auto& space : a.eigenspaces()) {
    for (int k : space.indices) out[k] = space.value;
  }
  return out;
}

}  // namespace

double GridSpec::position(std::size_t k) const {
  return (static_cast<double>(k) - 0.5 * (static_cast<double>(points) - 1.0)) * spacing();
}

GridSpec auto_grid(double width, double max_shift, std::size_t points) {
  if (!(width > 0.0)) throw ValidationError("pointer width must be positive");
  return GridSpec{points, kGuardSigmas * width + std::abs(max_shift)};
}

double PointerState::norm() const { return amplitudes.squaredNorm() * grid.spacing(); }

double PointerState::mean_position() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.points; ++k) acc += grid.position(k) * std::norm(amplitudes[k]);
  return acc * grid.spacing() / norm();
}

double PointerState::position_std() const {
  const double mean = mean_position();
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.points; ++k) {
    const double x = grid.position(k) - mean;
    acc += x * x * std::norm(amplitudes[k]);
  }
  return std::sqrt(acc * grid.spacing() / norm());
}

PointerState make_gaussian_pointer(double width, const GridSpec& grid) {
  if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("pointer width must be positive");
  check_grid(grid);
  if (grid.half_extent < kGuardSigmas * width) {
    throw ValidationError("pointer grid too small: extent must cover 8 widths");
  }
  check_resolution(grid, width);
  PointerState out{grid, Vector(grid.points), width};
  for (std::size_t k = 0; k < grid.points; ++k) {
    const double q = grid.position(k);
    out.amplitudes[k] = std::exp(-q * q / (4.0 * width * width));
  }
  out.amplitudes /= std::sqrt(out.norm());
  return out;
}

PointerState make_square_pointer(double length, const GridSpec& grid) {
  if (!(length > 0.0)) throw ValidationError("square pointer length must be positive");
  check_grid(grid);
  if (grid.half_extent < length) throw ValidationError("pointer grid too small for square packet");
  PointerState out{grid, Vector::Zero(grid.points), length / std::sqrt(12.0)};
  for (std::size_t k = 0; k < grid.points; ++k) {
    if (std::abs(grid.position(k)) < 0.5 * length) out.amplitudes[k] = 1.0;
  }
  if (out.amplitudes.squaredNorm() == 0.0) throw ValidationError("square packet narrower than one cell");
  out.amplitudes /= std::sqrt(out.norm());
  return out;
}

Vector translate(const Vector& amplitudes, double shift, double spacing) {
  if (shift == 0.0) return amplitudes;
  const std::size_t m = static_cast<std::size_t>(amplitudes.size());
  Eigen::FFT<double> fft;
  std::vector<Complex> spectrum;
  fft.fwd(spectrum, to_std(amplitudes));
  for (std::size_t k = 0; k < m; ++k) {
    const double p = wavenumber(k, m, spacing);
    if (m % 2 == 0 && k == m / 2) {
      // Nyquist bin: keep the translated samples real-symmetric.
      spectrum[k] *= std::cos(std::numbers::pi / spacing * shift);
    } else {
      spectrum[k] *= std::polar(1.0, -p * shift);
    }
  }
  std::vector<Complex> out;
  fft.inv(out, spectrum);
  return from_std(out);
}

Complex pointer_overlap(const PointerState& pointer, double shift) {
  // int psi(q) conj(psi(q + shift)) dq, with psi(q + shift) = translate(psi, -shift).
  const Vector moved = translate(pointer.amplitudes, -shift, pointer.grid.spacing());
  return moved.dot(pointer.amplitudes) * pointer.grid.spacing();
}

double gaussian_overlap(double shift, double width) {
  return std::exp(-shift * shift / (8.0 * width * width));
}

double quoted_pointer_damping(double shift, double width) {
  return std::exp(-shift * shift / (2.0 * width * width));
}

// --- coupling ---

void CouplingConfig::validate() const {
  if (!std::isfinite(gamma_t) || gamma_t < 0.0) throw ValidationError("gamma_t must be finite and >= 0");
  if (n_systems < 1) throw ValidationError("n_systems must be >= 1");
}

JointState::JointState(const DensityMatrix& rho_single, const CouplingConfig& cfg, const PointerState& pointer)
    : cfg_(cfg), pointer_(pointer) {
  cfg_.validate();
  const Observable& a = cfg_.observable;
  const int d = a.dim();
  if (rho_single.dim() != d) throw DimensionError("couple_and_evolve: state/observable dimension mismatch");

  const double max_shift = cfg_.n_systems * max_abs_eigenvalue(a) * cfg_.gamma_t;
  if (kGuardSigmas * pointer_.width + max_shift > pointer_.grid.half_extent * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "coupling shift " << max_shift << " exceeds the grid guard band (half extent "
        << pointer_.grid.half_extent << ", needs >= " << kGuardSigmas * pointer_.width + max_shift << ")";
    throw ValidationError(msg.str());
  }
  std::size_t tuples = 1;
  for (int l = 0; l < cfg_.n_systems; ++l) {
    tuples *= static_cast<std::size_t>(d);
    if (tuples > cfg_.entry_cap) throw ValidationError("joint state exceeds the storage cap");
  }

  rho_eig_ = a.eigenvectors().adjoint() * rho_single.matrix() * a.eigenvectors();
  const auto values = eigenspace_values(a);

  branches_.reserve(tuples);
  for (std::size_t code = 0; code < tuples; ++code) {
    Branch b;
    b.indices.resize(cfg_.n_systems);
    std::size_t rest = code;
    for (int l = cfg_.n_systems - 1; l >= 0; --l) {
      b.indices[l] = static_cast<int>(rest % d);
      rest /= d;
    }
    for (int idx : b.indices) b.eigenvalue_sum += values[idx];
    const double tol = 1e-12 * std::max(1.0, std::abs(b.eigenvalue_sum));
    auto found = std::find_if(shifts_.begin(), shifts_.end(),
                              [&](double s) { return std::abs(s - b.eigenvalue_sum) <= tol; });
    if (found == shifts_.end()) {
      shifts_.push_back(b.eigenvalue_sum);
      b.pointer = shifts_.size() - 1;
    } else {
      b.pointer = static_cast<std::size_t>(found - shifts_.begin());
    }
    branches_.push_back(std::move(b));
  }
  if (shifts_.size() * pointer_.grid.points > cfg_.entry_cap) {
    throw ValidationError("pointer branches exceed the storage cap");
  }
  shifted_.reserve(shifts_.size());
  for (double s : shifts_) {
    shifted_.push_back(translate(pointer_.amplitudes, s * cfg_.gamma_t, pointer_.grid.spacing()));
  }
}

double JointState::branch_weight(const Branch& b) const {
  double w = 1.0;
  for (int idx : b.indices) w *= rho_eig_(idx, idx).real();
  return w;
}

double JointState::norm() const {
  const double dq = pointer_.grid.spacing();
  double total = 0.0;
  for (const auto& b : branches_) total += branch_weight(b) * shifted_[b.pointer].squaredNorm() * dq;
  return total;
}

JointState couple_and_evolve(const DensityMatrix& rho_single, const CouplingConfig& cfg,
                             const PointerState& pointer) {
  return JointState(rho_single, cfg, pointer);
}

// --- readout ---

namespace {

std::vector<double> pointer_weights(const JointState& joint) {
  std::vector<double> w(joint.pointer_branches().size(), 0.0);
  for (const auto& b : joint.branches()) w[b.pointer] += std::max(0.0, joint.branch_weight(b));
  return w;
}

}  // namespace

double PointerMarginal::mean() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < density.size(); ++k) acc += grid.position(k) * density[k];
  return acc * grid.spacing();
}

double PointerMarginal::variance() const {
  const double m = mean();
  double acc = 0.0;
  for (std::size_t k = 0; k < density.size(); ++k) {
    const double x = grid.position(k) - m;
    acc += x * x * density[k];
  }
  return acc * grid.spacing();
}

double PointerMarginal::mass(double lo, double hi) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < density.size(); ++k) {
    const double q = grid.position(k);
    if (q >= lo && q < hi) acc += density[k];
  }
  return acc * grid.spacing();
}

PointerMarginal pointer_marginal(const JointState& joint) {
  const auto w = pointer_weights(joint);
  PointerMarginal out{joint.initial_pointer().grid, std::vector<double>(joint.initial_pointer().grid.points, 0.0)};
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (w[p] == 0.0) continue;
    const Vector& psi = joint.pointer_branches()[p];
    for (std::size_t k = 0; k < out.density.size(); ++k) out.density[k] += w[p] * std::norm(psi[k]);
  }
  return out;
}

Readout sample_readout(const JointState& joint, Rng& rng) {
  const auto w = pointer_weights(joint);
  const std::size_t p = rng.categorical(w);
  const Vector& psi = joint.pointer_branches()[p];
  std::vector<double> cell(psi.size());
  for (Eigen::Index k = 0; k < psi.size(); ++k) cell[k] = std::norm(psi[k]);
  const std::size_t k = rng.categorical(cell);
  const double q = joint.initial_pointer().grid.position(k);
  const double scale = joint.n_systems() * joint.coupling().gamma_t;
  const double estimate = scale > 0.0 ? q / scale : std::numeric_limits<double>::quiet_NaN();
  return {q, estimate, p, k};
}

namespace {

// Accumulates rho_ij * sum_rest w_rest * kernel(ptr(i, rest), ptr(j, rest))
// for system `index`, returning the matrix in the eigenbasis.
template <typename Kernel>
Matrix reduce_system(const JointState& joint, int index, Kernel&& kernel) {
  const int n = joint.n_systems();
  if (index < 0 || index >= n) throw DimensionError("system index out of range");
  const Matrix& rho = joint.rho_eigenbasis();
  const auto d = static_cast<std::size_t>(rho.rows());
  std::size_t stride = 1;
  for (int l = n - 1; l > index; --l) stride *= d;

  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  const auto& branches = joint.branches();
  for (std::size_t code = 0; code < branches.size(); ++code) {
    const Branch& bi = branches[code];
    const auto i = static_cast<std::size_t>(bi.indices[index]);
    double rest = 1.0;
    for (int l = 0; l < n; ++l) {
      if (l != index) rest *= rho(bi.indices[l], bi.indices[l]).real();
    }
    if (rest == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t partner = code + j * stride - i * stride;
      const Branch& bj = branches[partner];
      out(i, j) += rho(i, j) * rest * kernel(bi.pointer, bj.pointer);
    }
  }
  return out;
}

}  // namespace

DensityMatrix system_reduced(const JointState& joint, int index) {
  const auto& pointers = joint.pointer_branches();
  const double dq = joint.initial_pointer().grid.spacing();
  const std::size_t np = pointers.size();
  // <psi_q | psi_p> by discrete quadrature.
  std::vector<Complex> overlap(np * np);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t q = 0; q < np; ++q) overlap[p * np + q] = pointers[q].dot(pointers[p]) * dq;
  }
  Matrix m = reduce_system(joint, index, [&](std::size_t p, std::size_t q) { return overlap[p * np + q]; });
  const Matrix& v = joint.coupling().observable.eigenvectors();
  return DensityMatrix::from_trusted(v * m * v.adjoint());
}

DensityMatrix conditioned_system(const JointState& joint, std::size_t grid_index) {
  const auto& pointers = joint.pointer_branches();
  if (grid_index >= joint.initial_pointer().grid.points) throw ValidationError("grid index out of range");
  Matrix m = reduce_system(joint, 0, [&](std::size_t p, std::size_t q) {
    return pointers[p][grid_index] * std::conj(pointers[q][grid_index]);
  });
  const double tr = m.trace().real();
  if (!(tr > 0.0)) throw NumericalError("conditioned state has zero probability at this pointer position");
  const Matrix& v = joint.coupling().observable.eigenvectors();
  return DensityMatrix::from_trusted(v * (m / tr) * v.adjoint());
}

StrongMeasurement strong_limit_measure(const JointState& joint, Rng& rng) {
  if (joint.n_systems() != 1) throw ValidationError("strong_limit_measure acts on a single system");
  const Observable& a = joint.coupling().observable;
  const double gamma_t = joint.coupling().gamma_t;
  if (!(gamma_t > 0.0)) throw ValidationError("strong_limit_measure needs gamma_t > 0");
  const Readout r = sample_readout(joint, rng);
  const auto& spaces = a.eigenspaces();
  std::size_t nearest = 0;
  for (std::size_t s = 1; s < spaces.size(); ++s) {
    if (std::abs(spaces[s].value - r.estimate) < std::abs(spaces[nearest].value - r.estimate)) nearest = s;
  }
  DensityMatrix post = conditioned_system(joint, r.grid_index);
  const double fidelity = (spaces[nearest].projector * post.matrix()).trace().real();
  const bool resolved = joint.initial_pointer().width < 0.1 * a.min_gap() * gamma_t;
  return {r.estimate, spaces[nearest].value, std::move(post), fidelity, resolved};
}

StrongMeasurement strong_limit_measure(const DensityMatrix& rho, const Observable& a, double gamma_t,
                                       double width, std::uint64_t seed, std::size_t grid_points) {
  const CouplingConfig cfg{gamma_t, a, 1};
  const PointerState pointer =
      make_gaussian_pointer(width, auto_grid(width, max_abs_eigenvalue(a) * gamma_t, grid_points));
  const JointState joint(rho, cfg, pointer);
  Rng rng(seed);
  return strong_limit_measure(joint, rng);
}

}  // namespace weakfb
