#include "sacpde/sac.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "sacpde/errors.hpp"

namespace sacpde {

namespace {

Vector solve_control_weight(const FemOperators& ops, const Vector& rhs) {
  Eigen::SimplicialLDLT<SparseMatrix> llt(ops.R);
  if (llt.info() != Eigen::Success || (llt.vectorD().array() <= 0.0).any()) {
    throw ConfigError("control weight R is not positive definite");
  }
  return llt.solve(rhs);
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void SacConfig::validate() const {
  if (!(horizon > 0.0)) throw ConfigError("sac.horizon must be positive");
  if (!(sampling > 0.0 && sampling <= horizon)) {
    throw ConfigError("sac.sampling must satisfy 0 < t_s <= T");
  }
  if (substeps < 1) throw ConfigError("sac.substeps must be at least 1");
  if (alpha.kind == AlphaPolicy::Kind::kProportional && !(alpha.value < 0.0)) {
    throw ConfigError("gamma must be negative");
  }
  if (alpha.kind == AlphaPolicy::Kind::kFixed && !(alpha.value < 0.0)) {
    throw ConfigError("alpha_d must be negative");
  }
  if (duration.kind == DurationPolicy::Kind::kLineSearch) {
    if (!(duration.max_duration > 0.0 && duration.max_duration <= sampling * (1.0 + 1e-12))) {
      throw ConfigError("line search duration must satisfy 0 < lambda_max <= t_s");
    }
    if (!(duration.shrink > 0.0 && duration.shrink < 1.0)) {
      throw ConfigError("line search shrink factor must lie in (0, 1)");
    }
    if (duration.max_trials < 1) throw ConfigError("line search needs at least one trial");
  }
  if (saturation && !(saturation->lower < saturation->upper)) {
    throw ConfigError("saturation bounds must satisfy lower < upper");
  }
  if (!(t_calc >= 0.0 && t_calc < sampling)) {
    throw ConfigError("t_calc must satisfy 0 <= t_calc < t_s");
  }
}

int SacConfig::horizon_steps() const {
  return std::max(1, static_cast<int>(std::lround(horizon / dt())));
}

int sampling_steps(double duration, double sampling) {
  const double ratio = duration / sampling;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("simulation duration " + std::to_string(duration) +
                      " is not a positive multiple of the sampling time " +
                      std::to_string(sampling));
  }
  return static_cast<int>(n);
}

double mode_insertion_gradient(const FemOperators& ops, const Vector& p, const Vector& u1,
                               const Vector& v) {
  return p.dot(ops.B * (v - u1));
}

double sac_objective(const FemOperators& ops, const Vector& p, const Vector& u1, double alpha_d,
                     const Vector& u) {
  const double mismatch = mode_insertion_gradient(ops, p, u1, u) - alpha_d;
  return 0.5 * mismatch * mismatch + 0.5 * u.dot(ops.R * u);
}

Vector sac_action_at(const FemOperators& ops, const Vector& p, const Vector& u1, double alpha_d,
                     ActionSolver solver) {
  if (p.size() != ops.state_dim() || u1.size() != ops.control_dim()) {
    throw std::invalid_argument("sac_action_at: dimension mismatch");
  }
  const Vector b = ops.B.transpose() * p;
  if (solver == ActionSolver::kShermanMorrison) {
    // rhs = b (b^T u1 + alpha_d) is parallel to b, so
    // (b b^T + R)^{-1} rhs = c R^{-1} b / (1 + b^T R^{-1} b).
    const Vector z = solve_control_weight(ops, b);
    const double c = b.dot(u1) + alpha_d;
    return (c / (1.0 + b.dot(z))) * z;
  }
  Matrix system = Matrix(ops.R);
  system.noalias() += b * b.transpose();
  const Vector rhs = b * (b.dot(u1)) + alpha_d * b;
  Eigen::LDLT<Matrix> ldlt(system);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw ConfigError("control weight R is not positive definite");
  }
  return ldlt.solve(rhs);
}

Vector early_lumping_action(const FemOperators& ops, const Vector& rho, const Vector& u1,
                            double alpha_d) {
  if (rho.size() != ops.state_dim() || u1.size() != ops.control_dim()) {
    throw std::invalid_argument("early_lumping_action: dimension mismatch");
  }
  const Vector p = Matrix(ops.M).llt().solve(rho);
  const Vector b = Matrix(ops.B).transpose() * p;
  // The lumped matrix b b^T dominates R by a factor 1 + b^T R^{-1} b, so a
  // dense factorization of (b b^T + R) loses that many digits. The rank-one
  // closed form does not.
  const Vector z = solve_control_weight(ops, b);
  return ((b.dot(u1) + alpha_d) / (1.0 + b.dot(z))) * z;
}

Trajectory solve_dual_adjoint(const FemOperators& ops, const Trajectory& forward,
                              const SparseMatrix& terminal_weight) {
  const HorizonGrid& grid = forward.grid;
  const double dt = grid.dt();
  const Eigen::Index n = ops.state_dim();
  const Matrix mass_inv = Matrix(ops.M).llt().solve(Matrix::Identity(n, n));
  const Matrix step = Matrix::Identity(n, n) - dt * (Matrix(ops.A) * mass_inv);
  const Eigen::PartialPivLU<Matrix> lu(step);
  const Matrix weight = Matrix(ops.W);

  const size_t count = forward.states.size();
  Trajectory rho;
  rho.grid = grid;
  rho.kind = TrajectoryKind::kAdjoint;
  rho.states.assign(count, Vector::Zero(n));
  if (terminal_weight.nonZeros() > 0) {
    rho.states[count - 1] = Matrix(terminal_weight) * forward.states[count - 1];
  }
  for (size_t k = count - 1; k-- > 0;) {
    rho.states[k] = lu.solve(rho.states[k + 1] + dt * (weight * forward.states[k]));
  }
  return rho;
}

Vector first_order_feedback_action(const FemOperators& ops, const Matrix& fbar, const Vector& y,
                                   double alpha_d) {
  if (fbar.rows() != ops.state_dim() || fbar.cols() != ops.state_dim() ||
      y.size() != ops.state_dim()) {
    throw std::invalid_argument("first_order_feedback_action: dimension mismatch");
  }
  const Vector b = ops.B.transpose() * (fbar * y);
  return alpha_d * solve_control_weight(ops, b);
}

double choose_alpha_d(const AlphaPolicy& policy, double j1_nominal) {
  if (policy.kind == AlphaPolicy::Kind::kFixed) {
    if (!(policy.value < 0.0)) throw ConfigError("alpha_d must be negative");
    return policy.value;
  }
  if (!(policy.value < 0.0)) throw ConfigError("gamma must be negative");
  if (!(j1_nominal >= 0.0)) {
    throw ConfigError("proportional alpha_d needs a nonnegative nominal cost");
  }
  return policy.value * j1_nominal;
}

SacAction select_application_time(const FemOperators& ops, const Trajectory& adjoint,
                                  const ControlSignal& u1, double alpha_d,
                                  const SacConfig& cfg) {
  const HorizonGrid& grid = adjoint.grid;
  if (adjoint.states.empty()) throw std::invalid_argument("empty horizon");

  auto evaluate_at = [&](double tau, const Vector& p) {
    SacAction action;
    action.tau = tau;
    action.alpha_d = alpha_d;
    const Vector& ref = u1.at(tau);
    action.u = sac_action_at(ops, p, ref, alpha_d);
    action.gradient = mode_insertion_gradient(ops, p, ref, action.u);
    action.duration = cfg.sampling;
    return action;
  };

  if (cfg.application_time == ApplicationTimePolicy::kFirstSample) {
    const double tau = grid.t0 + cfg.t_calc + 0.5 * cfg.sampling;
    return evaluate_at(tau, adjoint.at(tau));
  }

  std::optional<SacAction> best;
  for (int k = 0; k <= grid.n_steps; ++k) {
    const double tau = grid.time(k);
    if (tau < grid.t0 + cfg.t_calc - 1e-12) continue;
    SacAction candidate = evaluate_at(tau, adjoint.states[static_cast<size_t>(k)]);
    if (!best || candidate.gradient < best->gradient) best = std::move(candidate);
  }
  if (!best) throw std::invalid_argument("no admissible application time on the horizon");
  return *best;
}

namespace {

// Needle probe with the window clipped to the admissible part of the horizon.
NeedleProbe clipped_probe(const FemOperators& ops, const Vector& y0, const ControlSignal& u1,
                          const SacAction& action, double duration, const HorizonGrid& grid,
                          double earliest) {
  const double lo = std::max(action.tau - 0.5 * duration, earliest);
  const double hi = std::min(action.tau + 0.5 * duration, grid.end());
  if (!(hi > lo)) {
    NeedleProbe none;
    return none;
  }
  return needle_variation_probe(ops, y0, u1, 0.5 * (lo + hi), action.u, hi - lo, grid);
}

}  // namespace

DurationChoice select_duration(const FemOperators& ops, const Vector& y0,
                               const ControlSignal& u1, const SacAction& action,
                               const HorizonGrid& grid, const SacConfig& cfg) {
  const double earliest = grid.t0 + cfg.t_calc;
  DurationChoice choice;
  if (cfg.duration.kind == DurationPolicy::Kind::kFixed) {
    choice.duration = cfg.sampling;
    const NeedleProbe probe = clipped_probe(ops, y0, u1, action, choice.duration, grid, earliest);
    choice.predicted_cost = probe.perturbed_cost;
    choice.reference_cost = probe.reference_cost;
    return choice;
  }
  double duration = cfg.duration.max_duration;
  for (int trial = 0; trial < cfg.duration.max_trials; ++trial) {
    const NeedleProbe probe = clipped_probe(ops, y0, u1, action, duration, grid, earliest);
    choice.duration = duration;
    choice.predicted_cost = probe.perturbed_cost;
    choice.reference_cost = probe.reference_cost;
    if (probe.perturbed_cost < probe.reference_cost) {
      choice.certified = true;
      return choice;
    }
    if (trial + 1 < cfg.duration.max_trials) duration *= cfg.duration.shrink;
  }
  choice.certified = false;
  return choice;
}

Vector advance_plant(const FemOperators& plant, const ImplicitEuler& stepper, const Vector& y,
                     const Vector& u, const std::vector<double>& activity, double t_start,
                     ClosedLoopResult* fine) {
  Vector state = y;
  const double dt = stepper.dt();
  for (size_t j = 0; j < activity.size(); ++j) {
    state = activity[j] > 0.0 ? stepper.step(state, activity[j] * u) : stepper.step(state);
    if (fine != nullptr) {
      fine->fine_times.push_back(t_start + static_cast<double>(j + 1) * dt);
      fine->fine_errors.push_back(l2_norm(plant.M, state));
    }
  }
  return state;
}

ClosedLoopResult run_receding_horizon(const FemOperators& ops, const Vector& y0,
                                      const SacConfig& cfg, double duration,
                                      const PlantDisturbance* disturbance) {
  cfg.validate();
  if (y0.size() != ops.state_dim()) throw std::invalid_argument("initial state dimension");
  const int steps = sampling_steps(duration, cfg.sampling);
  if (disturbance != nullptr && disturbance->mu_per_step.size() < static_cast<size_t>(steps)) {
    throw std::invalid_argument("disturbance sequence shorter than the simulation");
  }
  const double dt = cfg.dt();
  const int horizon_steps = cfg.horizon_steps();
  const ImplicitEuler model(ops, dt);

  ClosedLoopResult out;
  out.times.push_back(0.0);
  out.states.push_back(y0);
  out.errors.push_back(l2_norm(ops.M, y0));
  out.fine_times.push_back(0.0);
  out.fine_errors.push_back(out.errors.back());

  Vector y = y0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.sampling;
    const auto start = std::chrono::steady_clock::now();

    const HorizonGrid grid(t, horizon_steps * dt, horizon_steps);
    const ControlSignal u1 = ControlSignal::zeros(grid, ops.control_dim());
    const Trajectory nominal = solve_forward(model, y, grid);
    const double j1 = stage_cost(ops, nominal);
    const double alpha_d = choose_alpha_d(cfg.alpha, j1);

    Vector u = Vector::Zero(ops.control_dim());
    double window_lo = t;
    double window_hi = t;
    if (alpha_d != 0.0) {
      const Trajectory adjoint = solve_adjoint(ops, model, nominal);
      SacAction action = select_application_time(ops, adjoint, u1, alpha_d, cfg);
      if (cfg.saturation) {
        action.u = action.u.cwiseMax(cfg.saturation->lower).cwiseMin(cfg.saturation->upper);
      }
      const DurationChoice choice = select_duration(ops, y, u1, action, grid, cfg);
      if (!choice.certified) ++out.uncertified_durations;
      if (!(choice.predicted_cost < choice.reference_cost)) ++out.nonmonotone_steps;
      u = action.u;
      window_lo = std::max(action.tau - 0.5 * choice.duration, t + cfg.t_calc);
      window_hi = action.tau + 0.5 * choice.duration;
    }
    out.compute_seconds.push_back(elapsed_seconds(start));

    std::vector<double> activity(static_cast<size_t>(cfg.substeps), 0.0);
    for (int j = 0; j < cfg.substeps; ++j) {
      const double a = t + j * dt;
      const double b = a + dt;
      const double overlap = std::min(b, window_hi) - std::max(a, window_lo);
      activity[static_cast<size_t>(j)] = std::clamp(overlap / dt, 0.0, 1.0);
    }
    double mean_activity = 0.0;
    for (double a : activity) mean_activity += a;
    mean_activity /= cfg.substeps;

    const double mu_k = disturbance ? disturbance->mu_per_step[static_cast<size_t>(k)] : ops.mu;
    if (disturbance != nullptr) {
      const FemOperators plant = ops.with_mu(mu_k);
      const ImplicitEuler plant_stepper(plant, dt);
      y = advance_plant(plant, plant_stepper, y, u, activity, t, &out);
    } else {
      y = advance_plant(ops, model, y, u, activity, t, &out);
    }

    out.controls.push_back(mean_activity * u);
    out.costs.push_back(j1);
    out.alphas.push_back(alpha_d);
    out.realized_mu.push_back(mu_k);
    out.times.push_back((k + 1) * cfg.sampling);
    out.states.push_back(y);
    out.errors.push_back(l2_norm(ops.M, y));
  }
  return out;
}

}  // namespace sacpde
