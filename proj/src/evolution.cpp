#include "sacpde/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sacpde/errors.hpp"

namespace sacpde {

HorizonGrid::HorizonGrid(double t0_, double horizon_, int n_steps_)
    : t0(t0_), horizon(horizon_), n_steps(n_steps_) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon length must be positive");
  if (n_steps < 1) throw std::invalid_argument("horizon grid needs at least one step");
}

bool HorizonGrid::same_as(const HorizonGrid& other) const {
  return n_steps == other.n_steps && std::abs(t0 - other.t0) <= 1e-12 * (1.0 + std::abs(t0)) &&
         std::abs(horizon - other.horizon) <= 1e-12 * horizon;
}

Vector Trajectory::at(double t) const {
  const double dt = grid.dt();
  const double s = std::clamp((t - grid.t0) / dt, 0.0, static_cast<double>(grid.n_steps));
  const int k = std::min(static_cast<int>(std::floor(s)), grid.n_steps - 1);
  const double w = s - k;
  if (w == 0.0) return states[static_cast<size_t>(k)];
  return (1.0 - w) * states[static_cast<size_t>(k)] + w * states[static_cast<size_t>(k) + 1];
}

ControlSignal ControlSignal::zeros(const HorizonGrid& grid, Eigen::Index dim) {
  ControlSignal u;
  u.grid = grid;
  u.values.assign(static_cast<size_t>(grid.n_steps), Vector::Zero(dim));
  return u;
}

const Vector& ControlSignal::at(double t) const {
  const double s = (t - grid.t0) / grid.dt();
  const int k = std::clamp(static_cast<int>(std::floor(s)), 0, grid.n_steps - 1);
  return values[static_cast<size_t>(k)];
}

ImplicitEuler::ImplicitEuler(const FemOperators& ops, double dt)
    : mass_(ops.M), control_(ops.B), dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const SparseMatrix step_matrix = ops.M - dt * ops.A;
  factor_ = std::make_shared<const TridiagonalFactor>(step_matrix);
}

Vector ImplicitEuler::step(const Vector& y) const {
  Vector rhs = mass_ * y;
  factor_->solve_in_place(rhs);
  return rhs;
}

Vector ImplicitEuler::step(const Vector& y, const Vector& u) const {
  Vector rhs = mass_ * y + dt_ * (control_ * u);
  factor_->solve_in_place(rhs);
  return rhs;
}

Vector ImplicitEuler::adjoint_step(const Vector& p_next, const Vector& source) const {
  Vector rhs = mass_ * p_next + dt_ * source;
  factor_->solve_in_place(rhs);
  return rhs;
}

Trajectory solve_forward(const ImplicitEuler& stepper, const Vector& y0, const ControlSignal* u,
                         const HorizonGrid& grid) {
  if (std::abs(stepper.dt() - grid.dt()) > 1e-12 * grid.dt()) {
    throw std::invalid_argument("stepper time step does not match the grid");
  }
  if (u != nullptr && (u->values.size() != static_cast<size_t>(grid.n_steps))) {
    throw std::invalid_argument("control signal length does not match the grid");
  }
  Trajectory traj;
  traj.grid = grid;
  traj.kind = TrajectoryKind::kForward;
  traj.states.reserve(static_cast<size_t>(grid.n_steps) + 1);
  traj.states.push_back(y0);
  for (int k = 0; k < grid.n_steps; ++k) {
    const Vector& y = traj.states.back();
    traj.states.push_back(u ? stepper.step(y, u->values[static_cast<size_t>(k)])
                            : stepper.step(y));
  }
  return traj;
}

Trajectory solve_forward(const ImplicitEuler& stepper, const Vector& y0,
                         const HorizonGrid& grid) {
  return solve_forward(stepper, y0, nullptr, grid);
}

Trajectory solve_forward(const FemOperators& ops, const Vector& y0, const ControlSignal& u,
                         const HorizonGrid& grid) {
  if (y0.size() != ops.state_dim()) {
    throw std::invalid_argument("initial state dimension mismatch");
  }
  for (const auto& v : u.values) {
    if (v.size() != ops.control_dim()) throw std::invalid_argument("control dimension mismatch");
  }
  const ImplicitEuler stepper(ops, grid.dt());
  return solve_forward(stepper, y0, &u, grid);
}

Trajectory solve_adjoint(const FemOperators& ops, const ImplicitEuler& stepper,
                         const Trajectory& forward, const SparseMatrix& terminal_weight) {
  const HorizonGrid& grid = forward.grid;
  if (forward.states.size() != static_cast<size_t>(grid.n_steps) + 1) {
    throw std::invalid_argument("forward trajectory is incomplete");
  }
  if (std::abs(stepper.dt() - grid.dt()) > 1e-12 * grid.dt()) {
    throw std::invalid_argument("adjoint grid does not match the forward grid");
  }
  const size_t n = forward.states.size();
  Trajectory adj;
  adj.grid = grid;
  adj.kind = TrajectoryKind::kAdjoint;
  adj.states.assign(n, Vector::Zero(ops.state_dim()));
  if (terminal_weight.nonZeros() > 0) {
    const TridiagonalFactor mass(ops.M);
    adj.states[n - 1] = mass.solve(terminal_weight * forward.states[n - 1]);
  }
  for (size_t k = n - 1; k-- > 0;) {
    adj.states[k] = stepper.adjoint_step(adj.states[k + 1], ops.W * forward.states[k]);
  }
  return adj;
}

Trajectory solve_adjoint(const FemOperators& ops, const Trajectory& forward,
                         const SparseMatrix& terminal_weight) {
  const ImplicitEuler stepper(ops, forward.grid.dt());
  return solve_adjoint(ops, stepper, forward, terminal_weight);
}

double stage_cost(const FemOperators& ops, const Trajectory& forward,
                  const SparseMatrix& terminal_weight) {
  const size_t n = forward.states.size();
  const double dt = forward.grid.dt();
  double running = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const Vector& y = forward.states[k];
    const double w = (k == 0 || k + 1 == n) ? 0.5 * dt : dt;
    running += w * y.dot(ops.W * y);
  }
  double cost = 0.5 * running;
  if (terminal_weight.nonZeros() > 0) {
    const Vector& y = forward.states.back();
    cost += 0.5 * y.dot(terminal_weight * y);
  }
  return cost;
}

namespace {

// Step factors for a non-uniform time grid, shared between steps of equal size.
class StepFactorCache {
 public:
  explicit StepFactorCache(const FemOperators& ops) : ops_(ops) {}

  const ImplicitEuler& get(double dt) {
    for (const auto& s : steppers_) {
      if (std::abs(s->dt() - dt) <= 1e-12 * dt) return *s;
    }
    steppers_.push_back(std::make_unique<ImplicitEuler>(ops_, dt));
    return *steppers_.back();
  }

 private:
  const FemOperators& ops_;
  std::vector<std::unique_ptr<ImplicitEuler>> steppers_;
};

}  // namespace

NeedleProbe needle_variation_probe(const FemOperators& ops, const Vector& y0,
                                   const ControlSignal& u1, double tau, const Vector& v,
                                   double lambda, const HorizonGrid& grid,
                                   const SparseMatrix& terminal_weight) {
  if (!(lambda > 0.0)) throw std::invalid_argument("needle duration must be positive");
  const double lo = tau - 0.5 * lambda;
  const double hi = tau + 0.5 * lambda;
  const double slack = 1e-12 * grid.horizon;
  if (lo < grid.t0 - slack || hi > grid.end() + slack) {
    throw std::invalid_argument("needle window [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "] leaves the horizon");
  }
  if (v.size() != ops.control_dim()) throw std::invalid_argument("needle value dimension");

  // breakpoints: the horizon grid plus a uniform subdivision of the window
  const double dt = grid.dt();
  const int window_steps =
      std::max(kNeedleSubsteps, static_cast<int>(std::ceil(kNeedleSubsteps * lambda / dt)));
  std::vector<double> times;
  times.reserve(static_cast<size_t>(grid.n_steps + window_steps) + 2);
  for (int k = 0; k <= grid.n_steps; ++k) times.push_back(grid.time(k));
  for (int j = 0; j <= window_steps; ++j) {
    times.push_back(std::clamp(lo + lambda * j / window_steps, grid.t0, grid.end()));
  }
  std::sort(times.begin(), times.end());
  const double merge_tol = 1e-9 * std::min(dt, lambda / window_steps);
  std::vector<double> merged;
  for (double t : times) {
    if (merged.empty() || t - merged.back() > merge_tol) merged.push_back(t);
  }
  merged.back() = grid.end();

  StepFactorCache cache(ops);
  auto run = [&](bool perturbed) {
    Vector y = y0;
    double running = 0.0;
    double prev = y.dot(ops.W * y);
    for (size_t i = 0; i + 1 < merged.size(); ++i) {
      const double a = merged[i];
      const double b = merged[i + 1];
      const double mid = 0.5 * (a + b);
      const bool inside = perturbed && mid > lo && mid < hi;
      const Vector& u = inside ? v : u1.at(mid);
      y = cache.get(b - a).step(y, u);
      const double next = y.dot(ops.W * y);
      running += 0.5 * (b - a) * (prev + next);
      prev = next;
    }
    double cost = 0.5 * running;
    if (terminal_weight.nonZeros() > 0) cost += 0.5 * y.dot(terminal_weight * y);
    return cost;
  };

  NeedleProbe probe;
  probe.reference_cost = run(false);
  probe.perturbed_cost = run(true);
  return probe;
}

double needle_variation_cost(const FemOperators& ops, const Vector& y0, const ControlSignal& u1,
                             double tau, const Vector& v, double lambda, const HorizonGrid& grid,
                             const SparseMatrix& terminal_weight) {
  return needle_variation_probe(ops, y0, u1, tau, v, lambda, grid, terminal_weight)
      .perturbed_cost;
}

}  // namespace sacpde
