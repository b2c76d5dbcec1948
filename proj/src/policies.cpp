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
#include <sstream>

#include "weakfb/feedback.hpp"

namespace weakfb {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::unitary_map: return "unitary_map";
    case PolicyKind::hamiltonian_map: return "hamiltonian_map";
    case PolicyKind::eigen_map: return "eigen_map";
    case PolicyKind::channel_map: return "channel_map";
  }
  return "unknown";
}

namespace {

void require_kind(const FeedbackPolicy& p, PolicyKind kind, const char* what) {
  if (p.kind() != kind) {
    std::ostringstream msg;
    msg << what << " needs a " << to_string(kind) << " policy, '" << p.id() << "' is "
        << to_string(p.kind());
    throw ValidationError(msg.str());
  }
}

void require_dim(const FeedbackPolicy& p, const DensityMatrix& rho) {
  if (rho.dim() != p.dim()) {
    throw DimensionError("policy '" + p.id() + "' acts on dimension " + std::to_string(p.dim()) +
                         ", state has " + std::to_string(rho.dim()));
  }
}

}  // namespace

FeedbackPolicy FeedbackPolicy::unitary_map(std::string id, int dim, UnitaryFn fn) {
  FeedbackPolicy p;
  p.kind_ = PolicyKind::unitary_map;
  p.id_ = std::move(id);
  p.dim_ = dim;
  p.unitary_ = std::move(fn);
  return p;
}

FeedbackPolicy FeedbackPolicy::hamiltonian_map(std::string id, int dim, HamiltonianFn fn) {
  FeedbackPolicy p;
  p.kind_ = PolicyKind::hamiltonian_map;
  p.id_ = std::move(id);
  p.dim_ = dim;
  p.hamiltonian_ = std::move(fn);
  return p;
}

FeedbackPolicy FeedbackPolicy::eigen_map(std::string id, int dim, StateFn fn) {
  FeedbackPolicy p;
  p.kind_ = PolicyKind::eigen_map;
  p.id_ = std::move(id);
  p.dim_ = dim;
  p.state_map_ = std::move(fn);
  return p;
}

FeedbackPolicy FeedbackPolicy::channel_map(std::string id, int dim, StateFn fn) {
  FeedbackPolicy p;
  p.kind_ = PolicyKind::channel_map;
  p.id_ = std::move(id);
  p.dim_ = dim;
  p.state_map_ = std::move(fn);
  return p;
}

UnitaryOp FeedbackPolicy::unitary(const DensityMatrix& rho) const {
  require_kind(*this, PolicyKind::unitary_map, "unitary()");
  require_dim(*this, rho);
  return unitary_(rho);
}

Matrix FeedbackPolicy::hamiltonian(const DensityMatrix& rho) const {
  require_kind(*this, PolicyKind::hamiltonian_map, "hamiltonian()");
  require_dim(*this, rho);
  Matrix h = hamiltonian_(rho);
  if (h.rows() != dim_ || h.cols() != dim_) throw DimensionError("policy Hamiltonian has the wrong shape");
  if (hermiticity_error(h) > kAlgebraicTol) {
    throw ValidationError("policy '" + id_ + "' returned a non-Hermitian Hamiltonian");
  }
  return h;
}

DensityMatrix FeedbackPolicy::map_state(const DensityMatrix& rho) const {
  if (kind_ != PolicyKind::eigen_map && kind_ != PolicyKind::channel_map) {
    throw ValidationError("map_state() needs an eigen_map or channel_map policy");
  }
  require_dim(*this, rho);
  DensityMatrix out = state_map_(rho);
  if (out.dim() != rho.dim()) throw DimensionError("policy map changed the dimension");
  if (kind_ == PolicyKind::eigen_map) {
    const double drift = (out.eigenvalues() - rho.eigenvalues()).cwiseAbs().maxCoeff();
    if (drift > kSpectralTol) {
      std::ostringstream msg;
      msg << "eigen_map '" << id_ << "' changed the spectrum by " << drift;
      throw ValidationError(msg.str());
    }
  } else {
    // Re-run the full invariant check on the output.
    out = DensityMatrix(out.matrix());
  }
  return out;
}

UnitaryOp FeedbackPolicy::kick(const DensityMatrix& rho) const {
  if (!kick_) throw ValidationError("policy '" + id_ + "' has no kick");
  require_dim(*this, rho);
  return kick_(rho);
}

FeedbackPolicy FeedbackPolicy::with_parameters(std::vector<PolicyParameter> params) const {
  FeedbackPolicy p = *this;
  p.parameters_ = std::move(params);
  return p;
}

FeedbackPolicy FeedbackPolicy::with_discrimination(double pitch) const {
  if (!(pitch >= 0.0) || !std::isfinite(pitch)) throw ValidationError("discrimination pitch must be >= 0");
  FeedbackPolicy p = *this;
  p.discrimination_ = pitch;
  return p;
}

FeedbackPolicy FeedbackPolicy::with_kick(UnitaryFn kick, double period) const {
  if (kind_ != PolicyKind::hamiltonian_map) throw ValidationError("kicks attach to Hamiltonian policies");
  if (!(period > 0.0) || !std::isfinite(period)) throw ValidationError("kick period must be positive");
  FeedbackPolicy p = *this;
  p.kick_ = std::move(kick);
  p.kick_period_ = period;
  return p;
}

FeedbackPolicy FeedbackPolicy::with_linear(bool linear) const {
  FeedbackPolicy p = *this;
  p.linear_ = linear;
  return p;
}

FeedbackPolicy FeedbackPolicy::conjugated(const UnitaryOp& v) const {
  if (v.dim() != dim_) throw DimensionError("conjugating unitary has the wrong dimension");
  const Matrix vm = v.matrix();
  const Matrix vd = vm.adjoint();
  auto pull_back = [vm, vd](const DensityMatrix& rho) {
    return DensityMatrix::from_trusted(vd * rho.matrix() * vm);
  };
  FeedbackPolicy p = *this;
  p.id_ = id_ + "@rotated";
  if (unitary_) {
    p.unitary_ = [f = unitary_, vm, vd, pull_back](const DensityMatrix& rho) {
      return UnitaryOp(vm * f(pull_back(rho)).matrix() * vd);
    };
  }
  if (hamiltonian_) {
    p.hamiltonian_ = [f = hamiltonian_, vm, vd, pull_back](const DensityMatrix& rho) {
      return Matrix(vm * f(pull_back(rho)) * vd);
    };
  }
  if (state_map_) {
    p.state_map_ = [f = state_map_, vm, vd, pull_back](const DensityMatrix& rho) {
      return DensityMatrix::from_trusted(vm * f(pull_back(rho)).matrix() * vd);
    };
  }
  if (kick_) {
    p.kick_ = [f = kick_, vm, vd, pull_back](const DensityMatrix& rho) {
      return UnitaryOp(vm * f(pull_back(rho)).matrix() * vd);
    };
  }
  return p;
}

FeedbackPolicy FeedbackPolicy::as_unitary_map(double dt) const {
  require_kind(*this, PolicyKind::hamiltonian_map, "as_unitary_map()");
  FeedbackPolicy self = *this;
  FeedbackPolicy p = unitary_map(id_ + "@step", dim_, [self, dt](const DensityMatrix& rho) {
    return UnitaryOp::from_hamiltonian(self.hamiltonian(rho), dt);
  });
  p.parameters_ = parameters_;
  p.discrimination_ = discrimination_;
  p.linear_ = linear_;
  return p;
}

// --- library ---

namespace {

Matrix pauli(int axis) {
  switch (axis) {
    case 0: return Observable::pauli_x().matrix();
    case 1: return Observable::pauli_y().matrix();
    default: return Observable::pauli_z().matrix();
  }
}

}  // namespace

FeedbackPolicy identity_policy(int dim) {
  return FeedbackPolicy::unitary_map("identity", dim, [dim](const DensityMatrix&) { return UnitaryOp::identity(dim); })
      .with_linear(true);
}

FeedbackPolicy constant_hamiltonian(Matrix h0, std::string id) {
  if (h0.rows() != h0.cols() || hermiticity_error(h0) > kAlgebraicTol) {
    throw ValidationError("constant Hamiltonian must be square and Hermitian");
  }
  const int dim = static_cast<int>(h0.rows());
  Matrix h = hermitize(h0);
  return FeedbackPolicy::hamiltonian_map(std::move(id), dim, [h](const DensityMatrix&) { return h; })
      .with_linear(true);
}

FeedbackPolicy mean_field_bloch(double gx, double gy, double gz) {
  const double g[3] = {gx, gy, gz};
  const Matrix s[3] = {pauli(0), pauli(1), pauli(2)};
  auto fn = [g0 = g[0], g1 = g[1], g2 = g[2], s0 = s[0], s1 = s[1], s2 = s[2]](const DensityMatrix& rho) {
    const double coeffs[3] = {g0, g1, g2};
    const Matrix* ops[3] = {&s0, &s1, &s2};
    Matrix h = Matrix::Zero(2, 2);
    for (int i = 0; i < 3; ++i) {
      if (coeffs[i] != 0.0) h += coeffs[i] * expectation(rho, *ops[i]) * *ops[i];
    }
    return h;
  };
  return FeedbackPolicy::hamiltonian_map("mean_field_bloch", 2, fn)
      .with_parameters({{"gx", gx}, {"gy", gy}, {"gz", gz}})
      .with_linear(gx == 0.0 && gy == 0.0 && gz == 0.0);
}

FeedbackPolicy kicked_nonlinear_top(double k, double period, double beta) {
  if (!(period > 0.0)) throw ValidationError("kicked top period must be positive");
  const Matrix h0 = (beta / (2.0 * period)) * pauli(0);
  const Matrix sz = pauli(2);
  auto kick = [k, sz](const DensityMatrix& rho) {
    return UnitaryOp::from_hamiltonian(sz, k * expectation(rho, sz));
  };
  return FeedbackPolicy::hamiltonian_map("kicked_top", 2, [h0](const DensityMatrix&) { return h0; })
      .with_kick(kick, period)
      .with_parameters({{"k", k}, {"period", period}, {"beta", beta}})
      .with_linear(k == 0.0);
}

FeedbackPolicy rotate_to_target(const Vector& target) {
  if (target.size() == 0 || !(target.norm() > 0.0)) throw ValidationError("target must be a non-zero vector");
  const Vector t = target / target.norm();
  const int dim = static_cast<int>(t.size());
  auto fn = [t, dim](const DensityMatrix& rho) {
    Vector v = dominant_eigenvector(rho);
    const Complex c = t.dot(v);  // <t|v>
    const double mag = std::abs(c);
    if (mag >= 1.0 - 1e-15) return UnitaryOp::identity(dim);
    if (mag > 0.0) v *= std::conj(c) / mag;
    Vector u = t - mag * v;
    const double s = u.norm();
    u /= s;
    Matrix m = Matrix::Identity(dim, dim);
    m += (mag - 1.0) * (v * v.adjoint() + u * u.adjoint());
    m += s * (u * v.adjoint() - v * u.adjoint());
    return UnitaryOp(std::move(m));
  };
  return FeedbackPolicy::unitary_map("rotate_to_target", dim, fn);
}

FeedbackPolicy z_conditioned_flip(double angle) {
  const Matrix sx = pauli(0);
  const Matrix sz = pauli(2);
  auto fn = [angle, sx, sz](const DensityMatrix& rho) {
    return UnitaryOp::from_hamiltonian(sx, 0.5 * angle * expectation(rho, sz));
  };
  return FeedbackPolicy::unitary_map("z_conditioned_flip", 2, fn).with_parameters({{"angle", angle}});
}

FeedbackPolicy eigenbasis_to_computational(int dim) {
  auto fn = [](const DensityMatrix& rho) {
    const RealVector w = rho.eigenvalues();
    Matrix m = Matrix::Zero(w.size(), w.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) m(k, k) = w[k];
    return DensityMatrix::from_trusted(m);
  };
  return FeedbackPolicy::eigen_map("eigenbasis_to_computational", dim, fn);
}

FeedbackPolicy fixed_conjugation(const UnitaryOp& u) {
  return FeedbackPolicy::eigen_map("fixed_conjugation", u.dim(),
                                   [u](const DensityMatrix& rho) { return apply_unitary(rho, u); })
      .with_linear(true);
}

FeedbackPolicy reset_to_state(const DensityMatrix& sigma) {
  return FeedbackPolicy::channel_map("reset_to", sigma.dim(), [sigma](const DensityMatrix&) { return sigma; });
}

FeedbackPolicy kraus_policy(const KrausChannel& channel, std::string id) {
  return FeedbackPolicy::channel_map(std::move(id), channel.dim(),
                                     [channel](const DensityMatrix& rho) { return apply_kraus(rho, channel); })
      .with_linear(true);
}

// --- catalog ---

const std::vector<PolicySpec>& builtin_policies() {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  static const std::vector<PolicySpec> catalog = {
      {"identity", PolicyKind::unitary_map, "U(rho) = I (open loop)", {}},
      {"constant_hamiltonian",
       PolicyKind::hamiltonian_map,
       "linear qubit Hamiltonian hx sx + hy sy + hz sz",
       {{"hx", 1.0, -100.0, 100.0, "sigma_x coefficient"},
        {"hy", 0.0, -100.0, 100.0, "sigma_y coefficient"},
        {"hz", 0.0, -100.0, 100.0, "sigma_z coefficient"}}},
      {"mean_field_bloch",
       PolicyKind::hamiltonian_map,
       "H(rho) = sum_i g_i tr(rho s_i) s_i (nonlinear Bloch equation)",
       {{"gx", 0.0, -100.0, 100.0, "x coupling"},
        {"gy", 0.0, -100.0, 100.0, "y coupling"},
        {"gz", 1.0, -100.0, 100.0, "z coupling"}}},
      {"kicked_top",
       PolicyKind::hamiltonian_map,
       "precession by beta about x per period, then kick exp(-i k tr(rho sz) sz)",
       {{"k", 3.0, 0.0, 50.0, "kick strength (0 = linear)"},
        {"period", 1.0, 1e-6, 1e3, "time between kicks"},
        {"beta", std::numbers::pi / 2.0, -two_pi, two_pi, "precession angle per period"}}},
      {"rotate_to_target",
       PolicyKind::unitary_map,
       "rotate the dominant estimated eigenvector onto the Bloch target (theta, phi)",
       {{"theta", 0.0, 0.0, std::numbers::pi, "target polar angle"},
        {"phi", 0.0, -two_pi, two_pi, "target azimuth"}}},
      {"z_conditioned_flip",
       PolicyKind::unitary_map,
       "U(rho) = exp(-i (angle/2) tr(rho sz) sx)",
       {{"angle", std::numbers::pi / 2.0, -two_pi, two_pi, "rotation angle per unit <sz>"}}},
      {"eigenbasis_to_computational", PolicyKind::eigen_map, "f(rho) = diag(ascending spectrum)", {}},
      {"reset_to",
       PolicyKind::channel_map,
       "g(rho) = pure Bloch state (theta, phi)",
       {{"theta", 0.0, 0.0, std::numbers::pi, "polar angle"}, {"phi", 0.0, -two_pi, two_pi, "azimuth"}}},
      {"amplitude_damping",
       PolicyKind::channel_map,
       "g(rho) = amplitude damping with probability p",
       {{"p", 0.5, 0.0, 1.0, "decay probability"}}},
  };
  return catalog;
}

FeedbackPolicy make_policy(std::string_view id_in, const std::map<std::string, double>& params) {
  std::string id(id_in);
  if (id == "kicked_nonlinear_top") id = "kicked_top";
  const auto& catalog = builtin_policies();
  const PolicySpec* spec = nullptr;
  for (const auto& s : catalog) {
    if (s.id == id) spec = &s;
  }
  if (spec == nullptr) throw ValidationError("unknown policy id '" + id + "'");

  std::map<std::string, double> values;
  for (const auto& p : spec->parameters) values[p.name] = p.default_value;
  for (const auto& [name, value] : params) {
    const auto found = std::find_if(spec->parameters.begin(), spec->parameters.end(),
                                    [&](const PolicyParameterSpec& p) { return p.name == name; });
    if (found == spec->parameters.end()) {
      throw ValidationError("policy '" + id + "' has no parameter '" + name + "'");
    }
    if (!(value >= found->min && value <= found->max)) {
      std::ostringstream msg;
      msg << "parameter " << name << " = " << value << " outside [" << found->min << ", " << found->max << "]";
      throw ValidationError(msg.str());
    }
    values[name] = value;
  }

  std::vector<PolicyParameter> recorded;
  for (const auto& p : spec->parameters) recorded.push_back({p.name, values[p.name]});

  FeedbackPolicy policy = identity_policy(2);
  if (id == "identity") {
    policy = identity_policy(2);
  } else if (id == "constant_hamiltonian") {
    Matrix h = values["hx"] * pauli(0) + values["hy"] * pauli(1) + values["hz"] * pauli(2);
    policy = constant_hamiltonian(h);
  } else if (id == "mean_field_bloch") {
    policy = mean_field_bloch(values["gx"], values["gy"], values["gz"]);
  } else if (id == "kicked_top") {
    policy = kicked_nonlinear_top(values["k"], values["period"], values["beta"]);
  } else if (id == "rotate_to_target") {
    policy = rotate_to_target(bloch_ket(values["theta"], values["phi"]));
  } else if (id == "z_conditioned_flip") {
    policy = z_conditioned_flip(values["angle"]);
  } else if (id == "eigenbasis_to_computational") {
    policy = eigenbasis_to_computational(2);
  } else if (id == "reset_to") {
    policy = reset_to_state(DensityMatrix::pure(bloch_ket(values["theta"], values["phi"])));
  } else if (id == "amplitude_damping") {
    policy = kraus_policy(KrausChannel::amplitude_damping(values["p"]), "amplitude_damping");
  }
  return policy.with_parameters(std::move(recorded));
}

}  // namespace weakfb
