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
#include <limits>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "weakfb/measurement.hpp"
#include "weakfb/pointer.hpp"
#include "weakfb/rng.hpp"

namespace weakfb {

namespace {

double max_abs_eigenvalue(const Observable& a) {
  const auto& w = a.eigenvalues();
  return std::max(std::abs(w[0]), std::abs(w[w.size() - 1]));
}

double signed_wavenumber(std::size_t k, std::size_t m, double spacing) {
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(m) * spacing);
  return base * (k < (m + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(m));
}

// Purification sum_j sqrt(lambda_j) |e_j>|j> of rho, system index leftmost.
Vector purify(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rho.matrix());
  const int d = rho.dim();
  Vector out = Vector::Zero(d * d);
  for (int j = 0; j < d; ++j) {
    const double lambda = std::max(0.0, solver.eigenvalues()[j]);
    for (int s = 0; s < d; ++s) out[s * d + j] = std::sqrt(lambda) * solver.eigenvectors()(s, j);
  }
  return out;
}

Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

}  // namespace

void MultiProbeConfig::validate() const {
  if (probes.empty()) throw ValidationError("multi-probe measurement needs at least one probe");
  const int d = probes.front().observable.dim();
  for (const auto& p : probes) {
    if (p.observable.dim() != d) throw DimensionError("probe observables differ in dimension");
    if (!std::isfinite(p.gamma_t) || p.gamma_t < 0.0) throw ValidationError("probe gamma_t must be >= 0");
    if (!(p.width > 0.0) || !std::isfinite(p.width)) throw ValidationError("probe width must be positive");
  }
  if (grid_points < 8) throw ValidationError("probe grids need at least 8 points");
}

MultiProbeResult multi_probe_measure(const DensityMatrix& rho, const MultiProbeConfig& cfg, int n_systems,
                                     std::uint64_t seed) {
  cfg.validate();
  if (n_systems < 1) throw ValidationError("n_systems must be >= 1");
  const int d = cfg.probes.front().observable.dim();
  if (rho.dim() != d) throw DimensionError("multi_probe_measure: state/observable dimension mismatch");
  const std::size_t n_probes = cfg.probes.size();
  const std::size_t m = cfg.grid_points;

  std::size_t cells = 1;
  for (std::size_t l = 0; l < n_probes; ++l) cells *= m;
  std::size_t sys_dim = 1;
  for (int l = 0; l < n_systems; ++l) sys_dim *= static_cast<std::size_t>(d * d);
  if (cells * sys_dim > cfg.entry_cap) throw ValidationError("multi-probe joint state exceeds the storage cap");

  std::vector<PointerState> pointers;
  std::vector<std::vector<Complex>> spectra(n_probes);
  Eigen::FFT<double> fft;
  for (std::size_t l = 0; l < n_probes; ++l) {
    const Probe& p = cfg.probes[l];
    const double shift = n_systems * max_abs_eigenvalue(p.observable) * p.gamma_t;
    pointers.push_back(make_gaussian_pointer(p.width, auto_grid(p.width, shift, m)));
    std::vector<Complex> amp(pointers[l].amplitudes.data(), pointers[l].amplitudes.data() + m);
    fft.fwd(spectra[l], amp);
  }

  // Joint amplitude in momentum space, phi[cell * sys_dim + s].
  const Vector omega = purify(rho);
  const Matrix anc_id = Matrix::Identity(d, d);
  std::vector<Complex> phi(cells * sys_dim);
  std::vector<std::size_t> digit(n_probes, 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::size_t rest = cell;
    for (std::size_t l = n_probes; l-- > 0;) {
      digit[l] = rest % m;
      rest /= m;
    }
    Matrix generator = Matrix::Zero(d, d);
    Complex amplitude = 1.0;
    for (std::size_t l = 0; l < n_probes; ++l) {
      const Probe& p = cfg.probes[l];
      const double k = signed_wavenumber(digit[l], m, pointers[l].grid.spacing());
      generator += (p.gamma_t * k) * p.observable.matrix();
      amplitude *= spectra[l][digit[l]];
    }
    const Matrix u = unitary_propagator(generator, 1.0);
    Matrix u_full(d * d, d * d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) u_full.block(i * d, j * d, d, d) = u(i, j) * anc_id;
    }
    const Vector single = u_full * omega;
    Vector all = single;
    for (int l = 1; l < n_systems; ++l) all = kron(all, single);
    for (std::size_t s = 0; s < sys_dim; ++s) phi[cell * sys_dim + s] = amplitude * all[s];
  }

  MultiProbeResult result;

  // System 0 (with its ancilla traced) from the momentum-space amplitudes.
  const std::size_t tail = sys_dim / static_cast<std::size_t>(d * d);
  Matrix reduced = Matrix::Zero(d, d);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const Complex* block = &phi[cell * sys_dim];
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        Complex acc = 0.0;
        for (int anc = 0; anc < d; ++anc) {
          for (std::size_t r = 0; r < tail; ++r) {
            acc += block[(a * d + anc) * tail + r] * std::conj(block[(b * d + anc) * tail + r]);
          }
        }
        reduced(a, b) += acc;
      }
    }
  }
  result.reduced_state = DensityMatrix::from_trusted(reduced / reduced.trace().real());

  // Transform every pointer axis back to positions.
  std::size_t axis_stride = cells;
  std::vector<Complex> line(m);
  std::vector<Complex> line_out;
  for (std::size_t l = 0; l < n_probes; ++l) {
    axis_stride /= m;
    const std::size_t outer = cells / (axis_stride * m);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < axis_stride; ++in) {
        const std::size_t base = o * axis_stride * m + in;
        for (std::size_t s = 0; s < sys_dim; ++s) {
          for (std::size_t k = 0; k < m; ++k) line[k] = phi[(base + k * axis_stride) * sys_dim + s];
          fft.inv(line_out, line);
          for (std::size_t k = 0; k < m; ++k) phi[(base + k * axis_stride) * sys_dim + s] = line_out[k];
        }
      }
    }
  }

  std::vector<double> joint(cells, 0.0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double acc = 0.0;
    for (std::size_t s = 0; s < sys_dim; ++s) acc += std::norm(phi[cell * sys_dim + s]);
    joint[cell] = acc;
  }
  double total = 0.0;
  for (double v : joint) total += v;

  Rng rng(seed);
  const std::size_t drawn = rng.categorical(joint);

  std::size_t stride = cells;
  for (std::size_t l = 0; l < n_probes; ++l) {
    stride /= m;
    const Probe& p = cfg.probes[l];
    std::vector<double> marginal(m, 0.0);
    for (std::size_t cell = 0; cell < cells; ++cell) marginal[(cell / stride) % m] += joint[cell] / total;
    double mean = 0.0;
    double second = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double q = pointers[l].grid.position(k);
      mean += q * marginal[k];
      second += q * q * marginal[k];
    }
    const double sampled_q = pointers[l].grid.position((drawn / stride) % m);
    const double scale = n_systems * p.gamma_t;

    ProbeReadout out{};
    out.degenerate = !(p.gamma_t > 0.0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.estimate = out.degenerate ? nan : sampled_q / scale;
    out.exact_mean = out.degenerate ? nan : mean / scale;
    out.exact_std = out.degenerate ? nan : std::sqrt(std::max(0.0, second - mean * mean)) / scale;
    if (out.degenerate) {
      out.accuracy = std::numeric_limits<double>::infinity();
      out.epsilon = 0.0;
    } else {
      WeakMeasurementConfig wm{p.width / p.gamma_t, n_systems, p.observable};
      out.accuracy = estimator_accuracy(wm, rho);
      const double r = p.gamma_t * p.observable.half_range() / p.width;
      out.epsilon = r * r;
    }
    result.readouts.push_back(out);
  }
  return result;
}

DensityMatrix sequential_probe_channels(const DensityMatrix& rho, const MultiProbeConfig& cfg) {
  cfg.validate();
  DensityMatrix out = rho;
  for (const auto& p : cfg.probes) {
    if (p.gamma_t > 0.0) out = averaged_channel(out, p.observable, p.width / p.gamma_t);
  }
  return out;
}

}  // namespace weakfb
