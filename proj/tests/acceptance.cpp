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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "weakfb/chaos.hpp"
#include "weakfb/feedback.hpp"
#include "weakfb/io.hpp"
#include "weakfb/measurement.hpp"
#include "weakfb/pointer.hpp"
#include "weakfb/rng.hpp"

using namespace weakfb;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- 1: estimator accuracy vs empirical RMSE ---
Outcome estimator_accuracy_law() {
  const auto rho = DensityMatrix::diagonal(std::vector<double>{0.8, 0.2});
  WeakMeasurementConfig cfg;
  cfg.n_systems = 1000;
  cfg.delta = std::sqrt(1000.0);
  cfg.observable = Observable::pauli_z();
  const double abar = expectation(rho, cfg.observable);
  const double spread = std_dev(rho, cfg.observable);
  const double delta = estimator_accuracy(cfg, rho);
  const int trials = 2000;
  double sq = 0.0;
  for (int k = 0; k < trials; ++k) {
    Rng rng(derive_seed(101, k));
    const double mu = sample_collective_outcome(rho, cfg, rng);
    sq += (mu - abar) * (mu - abar);
  }
  const double rmse = std::sqrt(sq / trials);
  const double rel = rmse / delta - 1.0;
  const bool ok = std::abs(abar - 0.6) < 1e-12 && std::abs(spread - 0.8) < 1e-12 && std::abs(rel) <= 0.10;
  return {ok, "RMSE " + fmt(rmse) + " vs delta " + fmt(delta) + " (rel " + fmt(rel) + ")"};
}

// --- 2: pointer model against the averaged channel ---
Outcome oracle_equivalence() {
  const double gamma_t = 0.5;
  const double width = 1.0;
  const Observable a = Observable::pauli_z();
  double worst_coarse = 0.0;
  double worst_fine = 0.0;
  for (int n = 1; n <= 3; ++n) {
    Rng rng(derive_seed(202, n));
    const DensityMatrix rho = random_density_matrix(2, rng);
    const DensityMatrix channel = averaged_channel(rho, a, width / gamma_t);
    for (std::size_t m : {std::size_t{2048}, std::size_t{8192}}) {
      const PointerState p = make_gaussian_pointer(width, auto_grid(width, n * gamma_t, m));
      const JointState joint(rho, CouplingConfig{gamma_t, a, n}, p);
      double worst = 0.0;
      for (int i = 0; i < n; ++i) worst = std::max(worst, sup_distance(system_reduced(joint, i), channel));
      (m == 2048 ? worst_coarse : worst_fine) = std::max(m == 2048 ? worst_coarse : worst_fine, worst);
    }
  }
  const bool ok = worst_coarse <= 1e-3 && worst_fine <= 1e-5;
  return {ok, "sup distance M=2048: " + fmt(worst_coarse) + ", M=8192: " + fmt(worst_fine)};
}

// --- 3: damping factor and its small-coupling scaling ---
Outcome back_action_formula() {
  const Observable a = Observable::pauli_z();
  const DensityMatrix plus = DensityMatrix::pure(bloch_ket(std::numbers::pi / 2, 0.0));
  const double width = 1.0;
  double worst = 0.0;
  std::vector<double> lx;
  std::vector<double> ly;
  double ratio_quoted = 0.0;
  for (int k = 0; k <= 4; ++k) {
    const double gamma_t = 0.01 * std::pow(10.0, k / 4.0);
    const PointerState p = make_gaussian_pointer(width, auto_grid(width, gamma_t, 2048));
    const JointState joint(plus, CouplingConfig{gamma_t, a, 1}, p);
    const DensityMatrix red = system_reduced(joint, 0);
    const double measured = std::abs(red(0, 1)) / std::abs(plus(0, 1));
    const double closed = gaussian_overlap(2.0 * gamma_t, width);
    worst = std::max(worst, std::abs(measured - closed));
    const double eps = 1.0 - measured;
    lx.push_back(std::log(gamma_t));
    ly.push_back(std::log(eps));
    ratio_quoted = (1.0 - quoted_pointer_damping(2.0 * gamma_t, width)) / eps;
  }
  const double slope = least_squares(lx, ly).slope;
  const bool ok = worst <= 1e-6 && std::abs(slope - 2.0) <= 0.05;
  return {ok, "max |measured - closed form| " + fmt(worst) + ", log-log slope " + fmt(slope) +
                  ", quoted/exact perturbation ratio " + fmt(ratio_quoted)};
}

// --- 4: strong and weak ends of the coupling knob ---
Outcome weak_strong_knob() {
  const Observable a = Observable::pauli_z();
  const DensityMatrix rho = from_bloch(Eigen::Vector3d(0.3, -0.4, 0.5));
  const double p_up = 0.75;  // (1 + z) / 2

  const double gamma_t = 1.0;
  const double narrow = 1e-3 * gamma_t;
  const PointerState p = make_gaussian_pointer(narrow, auto_grid(narrow, gamma_t, 4096));
  const JointState joint(rho, CouplingConfig{gamma_t, a, 1}, p);
  const int trials = 10000;
  int ups = 0;
  double worst_fidelity = 1.0;
  bool resolved = true;
  Rng rng(404);
  for (int k = 0; k < trials; ++k) {
    const StrongMeasurement s = strong_limit_measure(joint, rng);
    if (s.eigenvalue > 0) ++ups;
    worst_fidelity = std::min(worst_fidelity, s.fidelity);
    resolved = resolved && s.resolved;
  }
  const double sigma = std::sqrt(trials * p_up * (1.0 - p_up));
  const double z = std::abs(ups - trials * p_up) / sigma;

  const double weak_gt = 1e-3;
  const PointerState wide = make_gaussian_pointer(1.0, auto_grid(1.0, weak_gt, 2048));
  const JointState weak(rho, CouplingConfig{weak_gt, a, 1}, wide);
  const double weak_dist = sup_distance(system_reduced(weak, 0), rho);

  const bool ok = z <= 3.0 && worst_fidelity >= 0.999 && resolved && weak_dist <= 1e-5;
  return {ok, "Born deviation " + fmt(z) + " sigma, min fidelity " + fmt(worst_fidelity) +
                  ", weak-end sup distance " + fmt(weak_dist)};
}

// --- 5: nonlinear integrator conservation and mean-field phase ---
Outcome nonlinear_integrator() {
  const auto start = std::chrono::steady_clock::now();
  double trace_err = 0.0;
  double herm_err = 0.0;
  double drift_rate = 0.0;
  Rng rng(505);
  for (int k = 0; k < 8; ++k) {
    const double gx = 2.0 * rng.uniform() - 1.0;
    const double gy = 2.0 * rng.uniform() - 1.0;
    const double gz = 2.0 * rng.uniform() - 1.0;
    const FeedbackPolicy policy = k % 2 ? mean_field_bloch(gx, gy, gz) : kicked_nonlinear_top(3.0 * rng.uniform());
    const DensityMatrix rho0 = random_density_matrix(2, rng);
    const double t_final = 10.0;
    const Trajectory traj = integrate_nls(rho0, policy, t_final);
    const RealVector w0 = rho0.eigenvalues();
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      const Matrix& m = traj.states[i].matrix();
      trace_err = std::max({trace_err, std::abs(m.trace() - Complex(1.0, 0.0)), traj.diagnostics[i].trace_error});
      herm_err = std::max({herm_err, hermiticity_error(m), traj.diagnostics[i].hermiticity_error});
      const double drift = (traj.states[i].eigenvalues() - w0).cwiseAbs().maxCoeff();
      if (traj.times[i] > 0) drift_rate = std::max(drift_rate, drift / traj.times[i]);
    }
  }

  const double theta = std::numbers::pi / 3;
  const DensityMatrix rho0 = DensityMatrix::pure(bloch_ket(theta, 0.0));
  const Trajectory traj = integrate_nls(rho0, mean_field_bloch(0.0, 0.0, 1.0), 5.0);
  double phase = 0.0;
  double prev = 0.0;
  for (const auto& s : traj.states) {
    const Eigen::Vector3d r = bloch_vector(s);
    double phi = std::atan2(r.y(), r.x());
    while (phi - prev > std::numbers::pi) phi -= 2 * std::numbers::pi;
    while (phi - prev < -std::numbers::pi) phi += 2 * std::numbers::pi;
    phase += phi - prev;
    prev = phi;
  }
  const double rate = phase / 5.0;
  const double expected = 2.0 * std::cos(theta);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = trace_err <= 1e-12 && herm_err <= 1e-12 && drift_rate <= 1e-9 &&
                  std::abs(rate - expected) <= 1e-6 && secs <= 5.0;
  return {ok, "trace " + fmt(trace_err) + ", hermiticity " + fmt(herm_err) + ", drift/time " + fmt(drift_rate) +
                  ", phase rate " + fmt(rate) + " (|err| " + fmt(std::abs(rate - expected)) + "), " + fmt(secs) +
                  " s"};
}

// --- 6: affinity violation ---
Outcome nonlinearity_witness() {
  const FeedbackPolicy policy = z_conditioned_flip(std::numbers::pi / 2);
  const DensityMatrix zero = DensityMatrix::basis_state(2, 0);
  const DensityMatrix one = DensityMatrix::basis_state(2, 1);
  const DensityMatrix mix = DensityMatrix::maximally_mixed(2);
  const DensityMatrix of_mix = ideal_feedback_step(mix, policy);
  const Matrix mix_of = 0.5 * (ideal_feedback_step(zero, policy).matrix() + ideal_feedback_step(one, policy).matrix());
  const double dist = trace_distance(of_mix, DensityMatrix(mix_of));
  return {dist >= 0.5, "trace distance " + format_real(dist)};
}

// --- 7: steering ---
Outcome steering() {
  double worst_inf = 0.0;
  double worst_undo = 0.0;
  bool one_step = true;
  for (int k = 0; k < 50; ++k) {
    Rng rng(derive_seed(707, k));
    const DensityMatrix in = DensityMatrix::pure(random_pure_state(2, rng));
    const Vector target = random_pure_state(2, rng);
    const SteeringResult r = drive_to_target(in, target, FeedbackMeasurement::exact(2), k);
    worst_inf = std::max(worst_inf, r.final_infidelity);
    worst_undo = std::max(worst_undo, sup_distance(undo_steering(r), in));
    one_step = one_step && r.applied.size() == 1;
  }

  auto median_infidelity = [](int n) {
    std::vector<double> inf;
    for (int k = 0; k < 50; ++k) {
      Rng rng(derive_seed(717, k));
      const DensityMatrix in = DensityMatrix::pure(random_pure_state(2, rng));
      const Vector target = random_pure_state(2, rng);
      const auto meas = FeedbackMeasurement::weak(2, n, std::sqrt(static_cast<double>(n)));
      inf.push_back(drive_to_target(in, target, meas, derive_seed(727, k)).final_infidelity);
    }
    return median(inf);
  };
  const double m_small = median_infidelity(100);
  const double m_large = median_infidelity(10000);
  // delta^2 = Delta^2/N^2 + DeltaA^2/N with Delta = sqrt(N) and DeltaA = 1.
  auto delta_sq = [](double n) { return 1.0 / n + 1.0 / n; };
  const double predicted = delta_sq(100) / delta_sq(10000);
  const double observed = m_small / m_large;
  const bool scaling = observed >= predicted / 3.0 && observed <= predicted * 3.0;
  const bool bound = m_large <= 10.0 * delta_sq(10000);
  const bool ok = worst_inf <= 1e-12 && worst_undo <= 1e-10 && one_step && scaling && bound;
  return {ok, "exact: max infidelity " + fmt(worst_inf) + ", undo error " + fmt(worst_undo) +
                  "; weak medians N=1e2 " + fmt(m_small) + ", N=1e4 " + fmt(m_large) + ", ratio " + fmt(observed) +
                  " (delta^2 ratio " + fmt(predicted) + ")"};
}

// --- 8: chaos null and signal ---
Outcome chaos() {
  const auto start = std::chrono::steady_clock::now();
  const Matrix h0 = Observable::pauli_x().matrix() + 0.3 * Observable::pauli_z().matrix();
  double null_dev = 0.0;
  for (int k = 0; k < 10; ++k) {
    Rng rng(derive_seed(808, k));
    null_dev = std::max(null_dev, linear_invariance_check(random_pure_state(2, rng), random_pure_state(2, rng), h0, 20.0));
  }
  const FeedbackPolicy linear_top = kicked_nonlinear_top(0.0);
  const DivergenceSeries null_series =
      trajectory_divergence(DensityMatrix::pure(bloch_ket(1.0, 0.4)), 1e-2, linear_top, 20.0);
  double null_rel = 0.0;
  for (double s : null_series.separations) {
    null_rel = std::max(null_rel, std::abs(s / null_series.initial_separation - 1.0));
  }

  const FeedbackPolicy top = kicked_nonlinear_top(3.0);
  const LyapunovEnsemble ens = lyapunov_ensemble(top, 20, 1e-6, 50.0, kDefaultStep, 818, 1, 100);

  const DensityMatrix rho0 = DensityMatrix::pure(bloch_ket(1.1, 0.7));
  const MicroscopeScaling scaling =
      microscope_scaling(rho0, top, {1e-3, 1e-4, 1e-5}, 0.1, 60.0, kDefaultStep, 828, 8);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const bool ok = null_dev <= 1e-10 && null_rel <= 1e-10 && ens.ci_low > 0.0 && ens.positive * 2 > ens.fits.size() &&
                  scaling.detected == 3 && scaling.r_squared >= 0.9 && secs <= 60.0;
  std::ostringstream times;
  for (double t : scaling.t_detect) times << fmt(t) << " ";
  return {ok, "linear overlap drift " + fmt(null_dev) + ", k=0 separation drift " + fmt(null_rel) + "; lambda " +
                  fmt(ens.mean) + " CI [" + fmt(ens.ci_low) + ", " + fmt(ens.ci_high) + "], " +
                  std::to_string(ens.positive) + "/20 positive; microscope t = " + times.str() + "r^2 " +
                  fmt(scaling.r_squared) + " (1/slope " + fmt(1.0 / scaling.slope) + "), " + fmt(secs) + " s"};
}

// --- 9: tomography ---
Outcome tomography() {
  double exact_err = 0.0;
  for (int k = 0; k < 100; ++k) {
    Rng rng(derive_seed(909, k));
    const int d = 2 + k % 2;
    const DensityMatrix rho = random_density_matrix(d, rng);
    const auto basis = gell_mann_basis(d);
    exact_err = std::max(exact_err, sup_distance(exact_tomography(rho, basis).estimate, rho));
  }

  const int n = 10000;
  WeakMeasurementConfig cfg;
  cfg.n_systems = n;
  cfg.delta = std::sqrt(static_cast<double>(n));
  const auto basis = gell_mann_basis(2);
  std::vector<double> dist;
  double delta = 0.0;
  for (const auto& o : basis) {
    WeakMeasurementConfig c = cfg;
    c.observable = o;
    delta = std::max(delta, worst_case_accuracy(c));
  }
  for (int k = 0; k < 100; ++k) {
    Rng rng(derive_seed(919, k));
    const DensityMatrix rho = random_density_matrix(2, rng);
    dist.push_back(trace_distance(weak_tomography(rho, basis, cfg, derive_seed(929, k)).estimate, rho));
  }
  const double med = median(dist);
  const bool ok = exact_err <= 1e-10 && med <= 3.0 * delta;
  return {ok, "exact max error " + fmt(exact_err) + "; weak median trace distance " + fmt(med) + " vs 3 delta = " +
                  fmt(3.0 * delta)};
}

// --- 10: CLI reproducibility ---
int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome reproducibility() {
  namespace fs = std::filesystem;
  const fs::path scenarios = WEAKFB_SCENARIO_DIR;
  const fs::path work = fs::temp_directory_path() / "weakfb_acceptance";
  fs::remove_all(work);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(scenarios)) {
    if (e.path().extension() == ".toml") configs.push_back(e.path());
  }
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) return {false, "no bundled scenarios found"};

  std::size_t files = 0;
  std::vector<std::string> mismatched;
  for (const auto& cfg : configs) {
    const std::string name = cfg.stem().string();
    std::vector<fs::path> dirs;
    const std::vector<int> threads{1, 1, 4};
    for (std::size_t r = 0; r < threads.size(); ++r) {
      const fs::path out = work / name / std::to_string(r);
      fs::create_directories(out);
      const std::string cmd = std::string(WEAKFB_CLI_PATH) + " --config " + cfg.string() + " --out " +
                              out.string() + " --threads " + std::to_string(threads[r]);
      if (run(cmd) != 0) return {false, "scenario " + name + " failed to run"};
      dirs.push_back(out);
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      ++files;
      const std::string ref = read_text_file(e.path());
      for (std::size_t r = 1; r < dirs.size(); ++r) {
        const fs::path other = dirs[r] / e.path().filename();
        if (!fs::exists(other) || read_text_file(other) != ref) mismatched.push_back(name + "/" + e.path().filename().string());
      }
    }
  }
  fs::remove_all(work);
  std::string detail = std::to_string(configs.size()) + " scenarios, " + std::to_string(files) +
                       " files compared across reruns and thread counts 1/4";
  for (const auto& m : mismatched) detail += "; differs: " + m;
  return {mismatched.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    std::string name;
    std::function<Outcome()> fn;
    double budget_seconds;  // 0 = no runtime bound
  };
  const std::vector<Criterion> criteria = {
      {"1 estimator accuracy law", estimator_accuracy_law, 10.0},
      {"2 pointer/channel oracle equivalence", oracle_equivalence, 30.0},
      {"3 back-action damping and scaling", back_action_formula, 0.0},
      {"4 weak-to-strong knob", weak_strong_knob, 0.0},
      {"5 nonlinear integrator", nonlinear_integrator, 5.0},
      {"6 nonlinearity witness", nonlinearity_witness, 0.0},
      {"7 reversible steering", steering, 0.0},
      {"8 chaos null and signal", chaos, 60.0},
      {"9 tomography", tomography, 0.0},
      {"10 reproducibility", reproducibility, 0.0},
  };
  const std::string only = argc > 1 ? argv[1] : "";
  int failures = 0;
  for (const auto& [name, fn, budget] : criteria) {
    if (!only.empty() && name.rfind(only + " ", 0) != 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget > 0.0 && secs > budget) {
      out.pass = false;
      out.detail += " (over the " + fmt(budget) + " s budget)";
    }
    std::printf("%s criterion %s: %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
