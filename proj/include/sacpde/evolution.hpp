#pragma once

#include <memory>
#include <vector>

#include "sacpde/galerkin.hpp"
#include "sacpde/tridiagonal.hpp"

namespace sacpde {

/// Uniform time grid t0 + k * dt, k = 0..n_steps, with dt = horizon / n_steps.
struct HorizonGrid {
  double t0 = 0.0;
  double horizon = 1.0;
  int n_steps = 1;

  HorizonGrid() = default;
  HorizonGrid(double t0_, double horizon_, int n_steps_);

  [[nodiscard]] double dt() const { return horizon / n_steps; }
  [[nodiscard]] double time(int k) const { return t0 + k * dt(); }
  [[nodiscard]] double end() const { return t0 + horizon; }
  [[nodiscard]] bool same_as(const HorizonGrid& other) const;
};

enum class TrajectoryKind { kForward, kAdjoint };

/// Coefficient vectors at every grid point. Adjoint trajectories are stored
/// forward in time (states[0] is p(t0)).
struct Trajectory {
  HorizonGrid grid;
  std::vector<Vector> states;
  TrajectoryKind kind = TrajectoryKind::kForward;

  /// Linear interpolation between grid points; t is clamped to the grid.
  [[nodiscard]] Vector at(double t) const;
};

/// Piecewise-constant control: values[k] acts on [t_k, t_{k+1}).
struct ControlSignal {
  HorizonGrid grid;
  std::vector<Vector> values;

  static ControlSignal zeros(const HorizonGrid& grid, Eigen::Index dim);
  /// Value active at time t (right-continuous; t = end maps to the last step).
  [[nodiscard]] const Vector& at(double t) const;
};

/// Implicit Euler step (M - dt A) y_{k+1} = M y_k + dt B u_k with the step
/// matrix factored once. Immutable; safe to share between threads.
class ImplicitEuler {
 public:
  ImplicitEuler(const FemOperators& ops, double dt);

  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] Vector step(const Vector& y) const;
  [[nodiscard]] Vector step(const Vector& y, const Vector& u) const;
  /// Backward adjoint step: solves (M - dt A) p_k = M p_{k+1} + dt * source.
  [[nodiscard]] Vector adjoint_step(const Vector& p_next, const Vector& source) const;

 private:
  SparseMatrix mass_;
  SparseMatrix control_;
  double dt_;
  std::shared_ptr<const TridiagonalFactor> factor_;
};

[[nodiscard]] Trajectory solve_forward(const FemOperators& ops, const Vector& y0,
                                       const ControlSignal& u, const HorizonGrid& grid);
[[nodiscard]] Trajectory solve_forward(const ImplicitEuler& stepper, const Vector& y0,
                                       const ControlSignal* u, const HorizonGrid& grid);
/// Uncontrolled prediction (u = 0).
[[nodiscard]] Trajectory solve_forward(const ImplicitEuler& stepper, const Vector& y0,
                                       const HorizonGrid& grid);

/// Backward implicit Euler for M p' = -A p - W y with M p(T) = P_T y(T).
/// An empty `terminal_weight` means P_T = 0.
[[nodiscard]] Trajectory solve_adjoint(const FemOperators& ops, const Trajectory& forward,
                                       const SparseMatrix& terminal_weight = SparseMatrix());
[[nodiscard]] Trajectory solve_adjoint(const FemOperators& ops, const ImplicitEuler& stepper,
                                       const Trajectory& forward,
                                       const SparseMatrix& terminal_weight = SparseMatrix());

/// J1 = 1/2 * trapezoid sum of y_k^T W y_k + 1/2 y_N^T P_T y_N.
[[nodiscard]] double stage_cost(const FemOperators& ops, const Trajectory& forward,
                                const SparseMatrix& terminal_weight = SparseMatrix());

/// Result of a needle-variation probe. Both costs are evaluated on the same
/// locally refined time grid so their difference is free of refinement error.
struct NeedleProbe {
  double perturbed_cost = 0.0;  ///< J1(u_{lambda,tau,v})
  double reference_cost = 0.0;  ///< J1(u1) on the refined grid
};

/// Minimum number of sub-steps resolving the needle window.
inline constexpr int kNeedleSubsteps = 8;

/// Evaluates J1 for u1 replaced by v on [tau - lambda/2, tau + lambda/2]. The
/// window must lie inside [t0, t0 + T]; throws std::invalid_argument otherwise.
[[nodiscard]] NeedleProbe needle_variation_probe(const FemOperators& ops, const Vector& y0,
                                                 const ControlSignal& u1, double tau,
                                                 const Vector& v, double lambda,
                                                 const HorizonGrid& grid,
                                                 const SparseMatrix& terminal_weight =
                                                     SparseMatrix());

/// J1(u_{lambda,tau,v}); see needle_variation_probe.
[[nodiscard]] double needle_variation_cost(const FemOperators& ops, const Vector& y0,
                                           const ControlSignal& u1, double tau, const Vector& v,
                                           double lambda, const HorizonGrid& grid,
                                           const SparseMatrix& terminal_weight = SparseMatrix());

}  // namespace sacpde
