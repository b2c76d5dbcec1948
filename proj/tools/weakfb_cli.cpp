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

// Experiment runner. Every subcommand validates its inputs, computes, writes
// its CSV/JSON artifacts atomically into the output directory and prints a
// one-line JSON summary on stdout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "weakfb/chaos.hpp"
#include "weakfb/feedback.hpp"
#include "weakfb/io.hpp"
#include "weakfb/measurement.hpp"
#include "weakfb/parallel.hpp"
#include "weakfb/pointer.hpp"
#include "weakfb/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace weakfb;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = default_thread_count();
  std::string out;
  std::string config;
  bool svg = false;
};

// Collects artifacts for one run.
class Outputs {
 public:
  Outputs(const Common& common, std::string command) : command_(std::move(command)) {
    dir_ = common.out.empty() ? fs::path(".") : fs::path(common.out);
    svg_ = common.svg;
  }

  void prepare() const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory " + dir_.string());
  }

  fs::path csv(const std::string& name, const CsvTable& table, const std::string& x = {},
               const std::string& y = {}, bool log_y = false) {
    const fs::path path = dir_ / (command_ + "_" + name + ".csv");
    table.write(path);
    files_.push_back(path.filename().string());
    if (svg_ && !x.empty()) {
      fs::path svg = path;
      svg.replace_extension(".svg");
      render_svg(path, svg, x, y, log_y);
      files_.push_back(svg.filename().string());
    }
    return path;
  }

  void finish(json summary) {
    summary["command"] = command_;
    const fs::path path = dir_ / (command_ + "_summary.json");
    files_.push_back(path.filename().string());
    summary["outputs"] = files_;
    write_file_atomic(path, summary.dump(2) + "\n");
    summary["status"] = "ok";
    std::cout << summary.dump() << std::endl;
  }

 private:
  std::string command_;
  fs::path dir_;
  bool svg_ = false;
  std::vector<std::string> files_;
};

json matrix_json(const Matrix& m) { return matrix_to_json(m); }

fs::path resolve_input(const std::string& path, const Common& common) {
  const fs::path p(path);
  if (p.is_absolute() || fs::exists(p) || common.config.empty()) return p;
  // Relative paths in scenario files are taken relative to the file.
  const fs::path alt = fs::path(common.config).parent_path() / p;
  return fs::exists(alt) ? alt : p;
}

// --- shared option groups ---

struct StateOptions {
  std::string rho;
  std::vector<double> bloch;

  void add(CLI::App* sub) {
    sub->add_option("--rho", rho, "density matrix JSON file");
    sub->add_option("--bloch", bloch, "qubit Bloch vector x,y,z (alternative to --rho)")->delimiter(',')->expected(3);
  }

  std::optional<DensityMatrix> load(const Common& common) const {
    if (!rho.empty() && !bloch.empty()) throw ValidationError("give either --rho or --bloch, not both");
    if (!rho.empty()) return load_density_matrix(resolve_input(rho, common));
    if (!bloch.empty()) return from_bloch(Eigen::Vector3d(bloch[0], bloch[1], bloch[2]));
    return std::nullopt;
  }
};

struct PolicyOptions {
  std::string id;
  std::vector<std::string> params;
  std::map<std::string, double> shortcuts;
  double discrimination = 0.0;

  void add(CLI::App* sub, std::string default_id) {
    id = std::move(default_id);
    sub->add_option("--policy", id, "policy id (see list-policies)")->capture_default_str();
    sub->add_option("--param", params, "policy parameter name=value (repeatable)");
    sub->add_option("--discrimination", discrimination, "estimate quantization pitch (0 = none)");
    std::set<std::string> names;
    for (const auto& spec : builtin_policies()) {
      for (const auto& p : spec.parameters) names.insert(p.name);
    }
    for (const auto& name : names) {
      shortcuts[name] = std::numeric_limits<double>::quiet_NaN();
      sub->add_option("--" + name, shortcuts[name], "shortcut for --param " + name + "=...");
    }
  }

  FeedbackPolicy build() const {
    std::map<std::string, double> values;
    for (const auto& [name, v] : shortcuts) {
      if (!std::isnan(v)) values[name] = v;
    }
    for (const auto& kv : params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("--param expects name=value, got '" + kv + "'");
      try {
        std::size_t used = 0;
        const std::string text = kv.substr(eq + 1);
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        values[kv.substr(0, eq)] = v;
      } catch (const std::logic_error&) {
        throw ValidationError("--param value is not a number: '" + kv + "'");
      }
    }
    FeedbackPolicy policy = make_policy(id, values);
    if (discrimination != 0.0) policy = policy.with_discrimination(discrimination);
    return policy;
  }
};

json policy_json(const FeedbackPolicy& p) {
  json params = json::object();
  for (const auto& kv : p.parameters()) params[kv.name] = kv.value;
  return {{"id", p.id()}, {"kind", std::string(to_string(p.kind()))}, {"parameters", params},
          {"discrimination", p.discrimination()}};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- measure ---

struct MeasureCmd {
  StateOptions state;
  std::string obs = "sigma_z";
  int n = 1000;
  double delta = 1.0;
  int trials = 1000;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("measure", "collective weak measurement trials");
    state.add(sub);
    sub->add_option("--obs", obs, "observable name or matrix file")->capture_default_str();
    sub->add_option("--N", n, "ensemble size")->capture_default_str();
    sub->add_option("--delta", delta, "readout width Delta")->capture_default_str();
    sub->add_option("--trials", trials, "number of trials")->capture_default_str();
  }

  void run(const Common& common) {
    const auto rho_opt = state.load(common);
    require(rho_opt.has_value(), "measure needs --rho or --bloch");
    const DensityMatrix& rho = *rho_opt;
    WeakMeasurementConfig cfg;
    cfg.observable = load_observable(obs);
    cfg.n_systems = n;
    cfg.delta = delta;
    cfg.validate();
    require(cfg.observable.dim() == rho.dim(), "observable and state dimensions differ");
    require(trials >= 1, "--trials must be >= 1");
    Outputs out(common, "measure");
    out.prepare();

    const auto outcomes = parallel_map<double>(static_cast<std::size_t>(trials), common.threads, [&](std::size_t k) {
      Rng rng(derive_seed(common.seed, k));
      return sample_collective_outcome(rho, cfg, rng);
    });
    const double abar = expectation(rho, cfg.observable);
    CsvTable table({"trial", "outcome", "error"});
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      table.add_row({static_cast<double>(k), outcomes[k], outcomes[k] - abar});
      sum += outcomes[k];
      sq += (outcomes[k] - abar) * (outcomes[k] - abar);
    }
    out.csv("outcomes", table, "trial", "outcome");
    const double rmse = std::sqrt(sq / trials);
    const double formula = estimator_accuracy(cfg, rho);
    out.finish({{"seed", common.seed},
                {"observable", cfg.observable.name()},
                {"N", n},
                {"delta", delta},
                {"trials", trials},
                {"expectation", abar},
                {"spread", std_dev(rho, cfg.observable)},
                {"mean_outcome", sum / trials},
                {"empirical_rmse", rmse},
                {"formula_accuracy", formula},
                {"relative_deviation", rmse / formula - 1.0},
                {"perturbation", delta > 0.0 ? json(perturbation_size(cfg, rho)) : json(nullptr)}});
  }
};

// --- tomo ---

struct TomoCmd {
  StateOptions state;
  int n = 10000;
  double delta = -1.0;
  int repeats = 100;
  int dim = 2;
  bool exact = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("tomo", "state reconstruction from weak measurements");
    state.add(sub);
    sub->add_option("--N", n, "ensemble size per observable")->capture_default_str();
    sub->add_option("--delta", delta, "readout width (default sqrt(N))");
    sub->add_option("--repeats", repeats, "independent reconstructions")->capture_default_str();
    sub->add_option("--dim", dim, "dimension for random states when no state is given")->capture_default_str();
    sub->add_flag("--exact", exact, "exact expectations (delta = 0, no back-action)");
  }

  void run(const Common& common) {
    const auto given = state.load(common);
    require(repeats >= 1, "--repeats must be >= 1");
    require(given || (dim >= 2 && dim <= 8), "--dim must lie in [2, 8]");
    const int d = given ? given->dim() : dim;
    WeakMeasurementConfig cfg;
    cfg.n_systems = n;
    cfg.delta = delta < 0.0 ? std::sqrt(static_cast<double>(n)) : delta;
    cfg.observable = gell_mann_basis(d).front();
    cfg.validate();
    const auto basis = gell_mann_basis(d);
    double accuracy = 0.0;
    for (const auto& o : basis) {
      WeakMeasurementConfig c = cfg;
      c.observable = o;
      accuracy = std::max(accuracy, worst_case_accuracy(c));
    }
    Outputs out(common, "tomo");
    out.prepare();

    struct Row {
      double distance;
      Matrix estimate;
    };
    const auto rows = parallel_map<Row>(static_cast<std::size_t>(repeats), common.threads, [&](std::size_t r) {
      Rng rng(derive_seed(common.seed, 2 * r));
      const DensityMatrix rho = given ? *given : random_density_matrix(d, rng);
      const TomographyResult res = exact ? exact_tomography(rho, basis)
                                         : weak_tomography(rho, basis, cfg, derive_seed(common.seed, 2 * r + 1));
      return Row{trace_distance(res.estimate, rho), res.estimate.matrix()};
    });
    std::vector<std::string> header{"repeat", "trace_distance"};
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        header.push_back("re_" + std::to_string(i) + std::to_string(j));
        header.push_back("im_" + std::to_string(i) + std::to_string(j));
      }
    }
    CsvTable table(header);
    std::vector<double> dist;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::vector<double> row{static_cast<double>(r), rows[r].distance};
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          row.push_back(rows[r].estimate(i, j).real());
          row.push_back(rows[r].estimate(i, j).imag());
        }
      }
      table.add_row(row);
      dist.push_back(rows[r].distance);
    }
    out.csv("reconstructions", table, "repeat", "trace_distance", true);
    out.finish({{"seed", common.seed},
                {"dim", d},
                {"N", n},
                {"delta", exact ? 0.0 : cfg.delta},
                {"exact", exact},
                {"repeats", repeats},
                {"accuracy", exact ? 0.0 : accuracy},
                {"median_trace_distance", median(dist)},
                {"max_trace_distance", *std::max_element(dist.begin(), dist.end())}});
  }
};

// --- pointer ---

struct PointerCmd {
  StateOptions state;
  std::string obs = "sigma_z";
  int n = 1;
  double gamma_t = 1.0;
  double dq = 1.0;
  std::size_t grid = 2048;
  int trials = 1000;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("pointer", "explicit pointer coupling and readout");
    state.add(sub);
    sub->add_option("--obs", obs, "observable name or matrix file")->capture_default_str();
    sub->add_option("--N", n, "number of systems")->capture_default_str();
    sub->add_option("--gamma-t", gamma_t, "coupling gamma t")->capture_default_str();
    sub->add_option("--dq", dq, "pointer width Delta Q")->capture_default_str();
    sub->add_option("--grid", grid, "grid points M")->capture_default_str();
    sub->add_option("--trials", trials, "sampled readouts")->capture_default_str();
  }

  void run(const Common& common) {
    const auto given = state.load(common);
    const DensityMatrix rho = given ? *given : from_bloch(Eigen::Vector3d(0.6, 0.0, 0.6));
    const CouplingConfig cfg{gamma_t, load_observable(obs), n};
    cfg.validate();
    require(cfg.observable.dim() == rho.dim(), "observable and state dimensions differ");
    require(trials >= 0, "--trials must be >= 0");
    const double max_a = std::max(std::abs(cfg.observable.eigenvalues()[0]),
                                  std::abs(cfg.observable.eigenvalues()[cfg.observable.dim() - 1]));
    const PointerState pointer = make_gaussian_pointer(dq, auto_grid(dq, n * max_a * gamma_t, grid));
    const JointState joint(rho, cfg, pointer);
    Outputs out(common, "pointer");
    out.prepare();

    const PointerMarginal marginal = pointer_marginal(joint);
    CsvTable density({"q", "density"});
    for (std::size_t k = 0; k < marginal.density.size(); ++k) {
      density.add_row({marginal.grid.position(k), marginal.density[k]});
    }
    out.csv("marginal", density, "q", "density");

    const auto reads = parallel_map<Readout>(static_cast<std::size_t>(trials), common.threads, [&](std::size_t k) {
      Rng rng(derive_seed(common.seed, k));
      return sample_readout(joint, rng);
    });
    CsvTable readouts({"trial", "position", "estimate"});
    for (std::size_t k = 0; k < reads.size(); ++k) {
      readouts.add_row({static_cast<double>(k), reads[k].position, reads[k].estimate});
    }
    out.csv("readouts", readouts);

    const DensityMatrix reduced = system_reduced(joint, 0);
    const Matrix rho_eig = joint.rho_eigenbasis();
    const auto& v = cfg.observable.eigenvectors();
    const Matrix red_eig = v.adjoint() * reduced.matrix() * v;
    json factors = json::array();
    const auto& w = cfg.observable.eigenvalues();
    for (int i = 0; i < rho.dim(); ++i) {
      for (int j = i + 1; j < rho.dim(); ++j) {
        if (std::abs(rho_eig(i, j)) < 1e-14) continue;
        const double shift = (w[i] - w[j]) * gamma_t;
        factors.push_back({{"a", w[i]},
                           {"a_prime", w[j]},
                           {"measured", std::abs(red_eig(i, j)) / std::abs(rho_eig(i, j))},
                           {"exact", gaussian_overlap(shift, dq)},
                           {"quoted", quoted_pointer_damping(shift, dq)}});
      }
    }
    out.finish({{"seed", common.seed},
                {"N", n},
                {"gamma_t", gamma_t},
                {"dq", dq},
                {"grid", grid},
                {"pointer_mean", marginal.mean()},
                {"pointer_variance", marginal.variance()},
                {"expected_mean", n * gamma_t * expectation(rho, cfg.observable)},
                {"reduced_state", matrix_json(reduced.matrix())},
                {"sup_distance_from_input", sup_distance(reduced, rho)},
                {"damping_factors", factors}});
  }
};

// --- oracle-compare ---

struct OracleCmd {
  StateOptions state;
  std::string obs = "sigma_z";
  int n = 2;
  std::size_t grid = 2048;
  double gamma_t = 0.5;
  double dq = 1.0;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("oracle-compare", "pointer model against the averaged channel");
    state.add(sub);
    sub->add_option("--obs", obs, "observable name or matrix file")->capture_default_str();
    sub->add_option("--N", n, "number of systems")->capture_default_str();
    sub->add_option("--grid", grid, "grid points M")->capture_default_str();
    sub->add_option("--gamma-t", gamma_t, "coupling gamma t")->capture_default_str();
    sub->add_option("--dq", dq, "pointer width Delta Q")->capture_default_str();
  }

  void run(const Common& common) {
    const auto given = state.load(common);
    const CouplingConfig cfg{gamma_t, load_observable(obs), n};
    cfg.validate();
    require(gamma_t > 0.0, "--gamma-t must be positive");
    Rng rng(common.seed);
    const DensityMatrix rho = given ? *given : random_density_matrix(cfg.observable.dim(), rng);
    require(cfg.observable.dim() == rho.dim(), "observable and state dimensions differ");
    const double max_a = std::max(std::abs(cfg.observable.eigenvalues()[0]),
                                  std::abs(cfg.observable.eigenvalues()[cfg.observable.dim() - 1]));
    const PointerState pointer = make_gaussian_pointer(dq, auto_grid(dq, n * max_a * gamma_t, grid));
    Outputs out(common, "oracle-compare");
    out.prepare();

    const JointState joint(rho, cfg, pointer);
    const DensityMatrix channel = averaged_channel(rho, cfg.observable, dq / gamma_t);
    CsvTable table({"system", "sup_distance"});
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dist = sup_distance(system_reduced(joint, i), channel);
      worst = std::max(worst, dist);
      table.add_row({static_cast<double>(i), dist});
    }
    out.csv("distances", table);
    out.finish({{"seed", common.seed},
                {"N", n},
                {"grid", grid},
                {"gamma_t", gamma_t},
                {"dq", dq},
                {"delta", dq / gamma_t},
                {"max_sup_distance", worst},
                {"state", matrix_json(rho.matrix())}});
  }
};

// --- feedback ---

struct FeedbackCmd {
  StateOptions state;
  PolicyOptions policy;
  int n = 10000;
  double delta = -1.0;
  bool exact = false;
  int steps = 10;
  double t_final = 1.0;
  double dt = kDefaultStep;
  std::size_t sample_every = 1;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("feedback", "closed-loop measure-then-act cycles");
    state.add(sub);
    policy.add(sub, "z_conditioned_flip");
    sub->add_option("--N", n, "ensemble size")->capture_default_str();
    sub->add_option("--delta", delta, "readout width (default sqrt(N))");
    sub->add_flag("--exact", exact, "exact estimates without back-action");
    sub->add_option("--steps", steps, "cycles for unitary/eigen/channel policies")->capture_default_str();
    sub->add_option("--t", t_final, "duration for Hamiltonian policies")->capture_default_str();
    sub->add_option("--dt", dt, "cycle length for Hamiltonian policies")->capture_default_str();
    sub->add_option("--sample-every", sample_every, "store every k-th cycle")->capture_default_str();
  }

  void run(const Common& common) {
    const FeedbackPolicy p = policy.build();
    const auto given = state.load(common);
    const DensityMatrix rho0 = given ? *given : DensityMatrix::pure(bloch_ket(std::numbers::pi / 2, 0.0));
    require(rho0.dim() == p.dim(), "policy and state dimensions differ");
    require(steps >= 0, "--steps must be >= 0");
    require(sample_every >= 1, "--sample-every must be >= 1");
    const FeedbackMeasurement meas =
        exact ? FeedbackMeasurement::exact(p.dim())
              : FeedbackMeasurement::weak(p.dim(), n, delta < 0.0 ? std::sqrt(static_cast<double>(n)) : delta);
    Outputs out(common, "feedback");
    out.prepare();

    Trajectory traj;
    double max_perturbation = 0.0;
    if (p.kind() == PolicyKind::hamiltonian_map) {
      traj = closed_loop_trajectory(rho0, p, meas, t_final, dt, common.seed, sample_every);
    } else {
      traj.policy_id = p.id();
      traj.seed = common.seed;
      traj.dt = 1.0;
      traj.times.push_back(0.0);
      traj.states.push_back(rho0);
      traj.diagnostics.push_back({});
      DensityMatrix rho = rho0;
      for (int s = 1; s <= steps; ++s) {
        const std::uint64_t step_seed = derive_seed(common.seed, static_cast<std::uint64_t>(s));
        if (p.kind() == PolicyKind::unitary_map) {
          FeedbackStepResult r = feedback_step(rho, p, meas, step_seed);
          max_perturbation = std::max(max_perturbation, r.measurement.perturbation_norm);
          rho = r.next;
        } else {
          const StateEstimate est = estimate_state(rho, meas, step_seed);
          max_perturbation = std::max(max_perturbation, est.perturbation_norm);
          rho = p.map_state(est.perturbed);
        }
        if (static_cast<std::size_t>(s) % sample_every == 0 || s == steps) {
          traj.times.push_back(static_cast<double>(s));
          traj.states.push_back(rho);
          traj.diagnostics.push_back({std::abs(rho.matrix().trace().real() - 1.0), 0.0, 0.0});
        }
      }
    }
    out.csv("trajectory", trajectory_csv(traj), "t", "re_00");
    const DensityMatrix& last = traj.states.back();
    out.finish({{"seed", common.seed},
                {"policy", policy_json(p)},
                {"exact", exact},
                {"N", exact ? 0 : n},
                {"delta", meas.delta},
                {"samples", traj.states.size()},
                {"max_perturbation", max_perturbation},
                {"final_state", matrix_json(last.matrix())},
                {"final_purity", last.purity()}});
  }
};

// --- steer ---

struct SteerCmd {
  StateOptions state;
  double theta = 0.0;
  double phi = 0.0;
  int n = 10000;
  double delta = -1.0;
  bool exact = false;
  int trials = 50;
  int max_iterations = 4;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("steer", "drive unknown pure states to a target");
    state.add(sub);
    sub->add_option("--target-theta", theta, "target polar angle")->capture_default_str();
    sub->add_option("--target-phi", phi, "target azimuth")->capture_default_str();
    sub->add_option("--N", n, "ensemble size")->capture_default_str();
    sub->add_option("--delta", delta, "readout width (default sqrt(N))");
    sub->add_flag("--exact", exact, "exact estimates without back-action");
    sub->add_option("--trials", trials, "random inputs (ignored with --rho/--bloch)")->capture_default_str();
    sub->add_option("--max-iterations", max_iterations, "feedback cycles per trial")->capture_default_str();
  }

  void run(const Common& common) {
    const auto given = state.load(common);
    require(!given || given->dim() == 2, "steer acts on qubits");
    require(trials >= 1, "--trials must be >= 1");
    require(max_iterations >= 0, "--max-iterations must be >= 0");
    require(theta >= 0.0 && theta <= std::numbers::pi, "--target-theta must lie in [0, pi]");
    const FeedbackMeasurement meas =
        exact ? FeedbackMeasurement::exact(2)
              : FeedbackMeasurement::weak(2, n, delta < 0.0 ? std::sqrt(static_cast<double>(n)) : delta);
    const Vector target = bloch_ket(theta, phi);
    SteeringOptions opts;
    opts.max_iterations = max_iterations;
    const std::size_t count = given ? 1 : static_cast<std::size_t>(trials);
    Outputs out(common, "steer");
    out.prepare();

    struct Row {
      int iterations;
      double final_infidelity;
      double estimated;
      double undo_error;
      bool warning;
    };
    const auto rows = parallel_map<Row>(count, common.threads, [&](std::size_t k) {
      Rng rng(derive_seed(common.seed, 2 * k));
      const DensityMatrix in = given ? *given : DensityMatrix::pure(random_pure_state(2, rng));
      const SteeringResult r = drive_to_target(in, target, meas, derive_seed(common.seed, 2 * k + 1), opts);
      return Row{r.iterations, r.final_infidelity, r.estimated_infidelity, sup_distance(undo_steering(r), in),
                 r.purity_warning};
    });
    CsvTable table({"trial", "iterations", "final_infidelity", "estimated_infidelity", "undo_error"});
    std::vector<double> inf;
    std::size_t warnings = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      table.add_row({static_cast<double>(k), static_cast<double>(rows[k].iterations), rows[k].final_infidelity,
                     rows[k].estimated, rows[k].undo_error});
      inf.push_back(rows[k].final_infidelity);
      if (rows[k].warning) ++warnings;
    }
    out.csv("trials", table, "trial", "final_infidelity", true);
    double accuracy = 0.0;
    if (!exact) {
      WeakMeasurementConfig c;
      c.n_systems = n;
      c.delta = meas.delta;
      accuracy = worst_case_accuracy(c);
    }
    out.finish({{"seed", common.seed},
                {"exact", exact},
                {"N", exact ? 0 : n},
                {"delta", meas.delta},
                {"trials", count},
                {"accuracy", accuracy},
                {"median_final_infidelity", median(inf)},
                {"max_final_infidelity", *std::max_element(inf.begin(), inf.end())},
                {"purity_warnings", warnings}});
  }
};

// --- nls ---

struct NlsCmd {
  StateOptions state;
  PolicyOptions policy;
  double t_final = 10.0;
  double dt = kDefaultStep;
  std::size_t sample_every = 10;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("nls", "integrate d rho/dt = -i [H(rho), rho]");
    state.add(sub);
    policy.add(sub, "mean_field_bloch");
    sub->add_option("--t", t_final, "final time")->capture_default_str();
    sub->add_option("--dt", dt, "step size")->capture_default_str();
    sub->add_option("--sample-every", sample_every, "store every k-th step")->capture_default_str();
  }

  void run(const Common& common) {
    const FeedbackPolicy p = policy.build();
    require(p.kind() == PolicyKind::hamiltonian_map, "nls needs a hamiltonian_map policy");
    const auto given = state.load(common);
    const DensityMatrix rho0 = given ? *given : DensityMatrix::pure(bloch_ket(std::numbers::pi / 3, 0.0));
    require(rho0.dim() == p.dim(), "policy and state dimensions differ");
    require(t_final >= 0.0 && dt > 0.0, "need --t >= 0 and --dt > 0");
    IntegratorOptions opts;
    opts.sample_every = sample_every;
    Outputs out(common, "nls");
    out.prepare();

    const Trajectory traj = integrate_nls(rho0, p, t_final, dt, opts);
    out.csv("trajectory", trajectory_csv(traj), "t", "re_01");
    StepDiagnostics worst;
    for (const auto& d : traj.diagnostics) {
      worst.trace_error = std::max(worst.trace_error, d.trace_error);
      worst.hermiticity_error = std::max(worst.hermiticity_error, d.hermiticity_error);
      worst.eigenvalue_drift = std::max(worst.eigenvalue_drift, d.eigenvalue_drift);
    }
    const Eigen::Vector3d r = bloch_vector(traj.states.back());
    out.finish({{"seed", common.seed},
                {"policy", policy_json(p)},
                {"t_final", t_final},
                {"dt", dt},
                {"samples", traj.states.size()},
                {"max_trace_error", worst.trace_error},
                {"max_hermiticity_error", worst.hermiticity_error},
                {"max_eigenvalue_drift", worst.eigenvalue_drift},
                {"final_state", matrix_json(traj.states.back().matrix())},
                {"final_bloch", rho0.dim() == 2 ? json{r.x(), r.y(), r.z()} : json(nullptr)}});
  }
};

// --- chaos ---

struct ChaosCmd {
  StateOptions state;
  PolicyOptions policy;
  double s0 = 1e-6;
  double t_final = 50.0;
  double dt = kDefaultStep;
  std::string metric = "trace_distance";
  std::size_t pairs = 1;
  std::size_t sample_every = 1;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("chaos", "divergence of nearby trajectories");
    state.add(sub);
    policy.add(sub, "kicked_top");
    sub->add_option("--s0", s0, "initial separation")->capture_default_str();
    sub->add_option("--t", t_final, "final time")->capture_default_str();
    sub->add_option("--dt", dt, "step size")->capture_default_str();
    sub->add_option("--metric", metric, "trace_distance or infidelity")->capture_default_str();
    sub->add_option("--pairs", pairs, "random initial pairs for the exponent CI")->capture_default_str();
    sub->add_option("--sample-every", sample_every, "store every k-th step")->capture_default_str();
  }

  void run(const Common& common) {
    const FeedbackPolicy p = policy.build();
    require(p.kind() == PolicyKind::hamiltonian_map, "chaos needs a hamiltonian_map policy");
    const SeparationMetric m = parse_metric(metric);
    require(s0 >= 0.0 && s0 < 1.0, "--s0 must lie in [0, 1)");
    require(pairs >= 1, "--pairs must be >= 1");
    require(t_final >= 0.0 && dt > 0.0, "need --t >= 0 and --dt > 0");
    const auto given = state.load(common);
    Rng rng(common.seed);
    const DensityMatrix rho0 = given ? *given : DensityMatrix::pure(random_pure_state(p.dim(), rng));
    require(rho0.dim() == p.dim(), "policy and state dimensions differ");
    Outputs out(common, "chaos");
    out.prepare();

    DivergenceOptions opts;
    opts.metric = m;
    opts.seed = derive_seed(common.seed, 1);
    opts.sample_every = sample_every;
    const DivergenceSeries series = trajectory_divergence(rho0, s0, p, t_final, dt, opts);
    out.csv("divergence", divergence_csv(series), "t", "separation", true);
    json summary = divergence_summary(series);
    summary["seed"] = common.seed;
    summary["policy"] = policy_json(p);
    summary["t_final"] = t_final;
    summary["dt"] = dt;
    if (pairs > 1 && s0 > 0.0) {
      const LyapunovEnsemble ens =
          lyapunov_ensemble(p, pairs, s0, t_final, dt, derive_seed(common.seed, 2), common.threads, sample_every);
      CsvTable table({"pair", "lambda", "r_squared", "t0", "t1", "growth_found"});
      for (std::size_t i = 0; i < ens.fits.size(); ++i) {
        const auto& f = ens.fits[i];
        table.add_row({static_cast<double>(i), f.lambda, f.r_squared, f.t0, f.t1, f.growth_found ? 1.0 : 0.0});
      }
      out.csv("ensemble", table);
      summary["ensemble"] = {{"pairs", pairs},
                             {"mean_lambda", ens.mean},
                             {"ci95", {ens.ci_low, ens.ci_high}},
                             {"positive", ens.positive}};
    }
    out.finish(summary);
  }
};

// --- microscope ---

struct MicroscopeCmd {
  StateOptions state;
  PolicyOptions policy;
  std::vector<double> s0{1e-3, 1e-4, 1e-5};
  double threshold = 0.1;
  double t_max = 60.0;
  double dt = kDefaultStep;
  std::size_t repeats = 8;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("microscope", "detection time of amplified small differences");
    state.add(sub);
    policy.add(sub, "kicked_top");
    sub->add_option("--s0", s0, "initial separations (comma separated)")->delimiter(',');
    sub->add_option("--threshold", threshold, "detection threshold")->capture_default_str();
    sub->add_option("--t-max", t_max, "longest run")->capture_default_str();
    sub->add_option("--dt", dt, "step size")->capture_default_str();
    sub->add_option("--repeats", repeats, "perturbation directions averaged per s0")->capture_default_str();
  }

  void run(const Common& common) {
    const FeedbackPolicy p = policy.build();
    require(p.kind() == PolicyKind::hamiltonian_map, "microscope needs a hamiltonian_map policy");
    require(!s0.empty(), "--s0 needs at least one value");
    for (double s : s0) require(s > 0.0 && s < threshold, "every s0 must lie in (0, threshold)");
    require(threshold <= 1.0, "--threshold must be <= 1");
    require(repeats >= 1, "--repeats must be >= 1");
    require(t_max >= 0.0 && dt > 0.0, "need --t-max >= 0 and --dt > 0");
    const auto given = state.load(common);
    Rng rng(common.seed);
    const DensityMatrix rho0 = given ? *given : DensityMatrix::pure(random_pure_state(p.dim(), rng));
    require(rho0.dim() == p.dim(), "policy and state dimensions differ");
    Outputs out(common, "microscope");
    out.prepare();

    const MicroscopeScaling sc = microscope_scaling(rho0, p, s0, threshold, t_max, dt,
                                                    derive_seed(common.seed, 1), repeats, common.threads);
    CsvTable table({"s0", "log_ratio", "t_detect"});
    for (std::size_t i = 0; i < s0.size(); ++i) table.add_row({s0[i], std::log(threshold / s0[i]), sc.t_detect[i]});
    out.csv("detections", table, "log_ratio", "t_detect");
    json times = json::array();
    for (double t : sc.t_detect) times.push_back(std::isfinite(t) ? json(t) : json(nullptr));
    out.finish({{"seed", common.seed},
                {"policy", policy_json(p)},
                {"threshold", threshold},
                {"s0", s0},
                {"t_detect", times},
                {"detected", sc.detected},
                {"slope", sc.slope},
                {"implied_lambda", sc.slope > 0.0 ? json(1.0 / sc.slope) : json(nullptr)},
                {"intercept", sc.intercept},
                {"r_squared", sc.r_squared}});
  }
};

void list_policies() {
  json list = json::array();
  for (const auto& spec : builtin_policies()) {
    json params = json::array();
    for (const auto& p : spec.parameters) {
      params.push_back({{"name", p.name}, {"default", p.default_value}, {"min", p.min}, {"max", p.max}, {"doc", p.doc}});
    }
    list.push_back({{"id", spec.id},
                    {"kind", std::string(to_string(spec.kind))},
                    {"description", spec.description},
                    {"parameters", params}});
  }
  std::cout << json{{"command", "list-policies"}, {"status", "ok"}, {"policies", list}}.dump() << std::endl;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"status", "error"}, {"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakfb: weak measurement and feedback experiments"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML scenario file; command-line flags win");
  app.config_formatter(std::make_shared<CLI::ConfigTOML>());

  Common common;
  if (const char* env = std::getenv("WEAKFB_OUT")) common.out = env;
  app.add_option("--seed", common.seed, "64-bit master seed")->capture_default_str();
  app.add_option("--threads", common.threads, "worker threads (default: logical cores)");
  app.add_option("--out", common.out, "output directory (default: $WEAKFB_OUT or .)");
  app.add_flag("--svg", common.svg, "also render SVG plots from the CSV outputs");

  MeasureCmd measure;
  TomoCmd tomo;
  PointerCmd pointer;
  OracleCmd oracle;
  FeedbackCmd feedback;
  SteerCmd steer;
  NlsCmd nls;
  ChaosCmd chaos;
  MicroscopeCmd microscope;
  measure.add(app);
  tomo.add(app);
  pointer.add(app);
  oracle.add(app);
  feedback.add(app);
  steer.add(app);
  nls.add(app);
  chaos.add(app);
  microscope.add(app);
  app.add_subcommand("list-policies", "print the policy catalog");
  for (auto* sub : app.get_subcommands({})) {
    sub->configurable();
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitValidation, "config", e.what());
  }
  if (auto* cfg = app.get_option("--config"); cfg->count() > 0) common.config = cfg->as<std::string>();
  if (common.threads == 0) return fail(kExitValidation, "config", "--threads must be >= 1");

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "measure") measure.run(common);
    else if (name == "tomo") tomo.run(common);
    else if (name == "pointer") pointer.run(common);
    else if (name == "oracle-compare") oracle.run(common);
    else if (name == "feedback") feedback.run(common);
    else if (name == "steer") steer.run(common);
    else if (name == "nls") nls.run(common);
    else if (name == "chaos") chaos.run(common);
    else if (name == "microscope") microscope.run(common);
    else if (name == "list-policies") list_policies();
  } catch (const ValidationError& e) {
    return fail(kExitValidation, "validation", e.what());
  } catch (const IoError& e) {
    return fail(kExitIo, "io", e.what());
  } catch (const NumericalError& e) {
    return fail(kExitNumerical, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(kExitNumerical, "numerical", e.what());
  }
  return 0;
}
