#pragma once

#include <optional>
#include <vector>

#include "sacpde/evolution.hpp"
#include "sacpde/galerkin.hpp"

namespace sacpde {

/// How the target decrease rate alpha_d is chosen each stage.
struct AlphaPolicy {
  enum class Kind { kFixed, kProportional };
  Kind kind = Kind::kProportional;
  /// alpha_d itself (kFixed) or gamma in alpha_d = gamma * J1(u1) (kProportional).
  double value = -0.5;

  static AlphaPolicy fixed(double alpha_d) { return {Kind::kFixed, alpha_d}; }
  static AlphaPolicy proportional(double gamma) { return {Kind::kProportional, gamma}; }
  bool operator==(const AlphaPolicy&) const = default;
};

struct DurationPolicy {
  enum class Kind { kFixed, kLineSearch };
  Kind kind = Kind::kFixed;
  double max_duration = 0.1;  ///< first trial for the line search
  double shrink = 0.5;
  int max_trials = 10;

  bool operator==(const DurationPolicy&) const = default;
};

enum class ApplicationTimePolicy { kFirstSample, kMinGradient };

struct Saturation {
  double lower = -1.0;
  double upper = 1.0;

  bool operator==(const Saturation&) const = default;
};

struct SacConfig {
  double horizon = 1.0;   ///< T
  double sampling = 0.1;  ///< t_s
  /// Implicit Euler sub-steps per sampling interval (dt = t_s / substeps).
  int substeps = 10;
  AlphaPolicy alpha;
  DurationPolicy duration;
  ApplicationTimePolicy application_time = ApplicationTimePolicy::kFirstSample;
  std::optional<Saturation> saturation;
  double t_calc = 0.0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  [[nodiscard]] double dt() const { return sampling / substeps; }
  /// Number of dt steps in the prediction horizon.
  [[nodiscard]] int horizon_steps() const;

  bool operator==(const SacConfig&) const = default;
};

struct SacAction {
  Vector u;
  double tau = 0.0;
  double duration = 0.0;
  double gradient = 0.0;  ///< mode insertion gradient at (tau, u)
  double alpha_d = 0.0;
  bool duration_certified = true;  ///< false when a line search ran out of trials
};

/// Closed-loop run on the sampling grid t_k = k * t_s.
struct ClosedLoopResult {
  std::vector<double> times;            ///< sampling instants, steps + 1 entries
  std::vector<Vector> states;           ///< y(t_k)
  std::vector<double> errors;           ///< ||y(t_k)||_{L2}
  std::vector<Vector> controls;         ///< control applied on [t_k, t_{k+1}), steps entries
  std::vector<double> costs;            ///< predicted J1(u1) at t_k, steps entries
  std::vector<double> alphas;           ///< alpha_d used at t_k, steps entries
  std::vector<double> compute_seconds;  ///< wall clock of the control computation per step
  std::vector<double> realized_mu;      ///< plant reaction coefficient per step
  std::vector<double> fine_times;       ///< plant sub-step instants
  std::vector<double> fine_errors;      ///< ||y|| at every plant sub-step
  double offline_seconds = 0.0;         ///< one-off setup cost (e.g. a Riccati solve)
  int nonmonotone_steps = 0;            ///< steps whose action did not lower predicted J1
  int uncertified_durations = 0;

  [[nodiscard]] size_t num_steps() const { return controls.size(); }
};

/// p^T B (v - u1).
[[nodiscard]] double mode_insertion_gradient(const FemOperators& ops, const Vector& p,
                                             const Vector& u1, const Vector& v);

/// l2(u) = 1/2 (p^T B (u - u1) - alpha_d)^2 + 1/2 u^T R u.
[[nodiscard]] double sac_objective(const FemOperators& ops, const Vector& p, const Vector& u1,
                                   double alpha_d, const Vector& u);

enum class ActionSolver { kShermanMorrison, kDense };

/// Minimizer of sac_objective: solves (L + R) u = L u1 + alpha_d B^T p with
/// the rank-one L = B^T p p^T B.
[[nodiscard]] Vector sac_action_at(const FemOperators& ops, const Vector& p, const Vector& u1,
                                   double alpha_d,
                                   ActionSolver solver = ActionSolver::kShermanMorrison);

/// Early-lumping action from the dual adjoint rho = M p:
/// (L + R) u = L u1 + alpha_d B^T M^{-1} rho, L = B^T M^{-1} rho rho^T M^{-1} B.
[[nodiscard]] Vector early_lumping_action(const FemOperators& ops, const Vector& rho,
                                          const Vector& u1, double alpha_d);

/// Backward implicit Euler for the dual adjoint rho' = -A M^{-1} rho - W y,
/// rho(T) = P_T y(T), formed with a dense inverse of M.
[[nodiscard]] Trajectory solve_dual_adjoint(const FemOperators& ops, const Trajectory& forward,
                                            const SparseMatrix& terminal_weight = SparseMatrix());

/// First-order law alpha_d R^{-1} B^T F y, with F mapping state coefficients
/// to adjoint coefficients.
[[nodiscard]] Vector first_order_feedback_action(const FemOperators& ops, const Matrix& fbar,
                                                 const Vector& y, double alpha_d);

/// Throws ConfigError when the policy sign is wrong or J1 < 0 under the
/// proportional policy.
[[nodiscard]] double choose_alpha_d(const AlphaPolicy& policy, double j1_nominal);

/// Picks tau and the matching action. `u1` is the reference control on the
/// adjoint's grid.
[[nodiscard]] SacAction select_application_time(const FemOperators& ops,
                                                const Trajectory& adjoint,
                                                const ControlSignal& u1, double alpha_d,
                                                const SacConfig& cfg);

struct DurationChoice {
  double duration = 0.0;
  bool certified = true;
  double predicted_cost = 0.0;   ///< J1 with the action applied for `duration`
  double reference_cost = 0.0;   ///< J1(u1) on the same refined grid
};

/// Fixed policy returns t_s. The line search shrinks from max_duration until
/// the needle cost drops below J1(u1); when trials run out the smallest trial
/// is returned uncertified.
[[nodiscard]] DurationChoice select_duration(const FemOperators& ops, const Vector& y0,
                                             const ControlSignal& u1, const SacAction& action,
                                             const HorizonGrid& grid, const SacConfig& cfg);

/// Optional per-step reaction coefficients for the simulated plant. The
/// prediction model always uses ops.mu.
struct PlantDisturbance {
  std::vector<double> mu_per_step;
};

/// Receding-horizon SAC loop. `duration` must be a multiple of t_s.
[[nodiscard]] ClosedLoopResult run_receding_horizon(const FemOperators& ops, const Vector& y0,
                                                    const SacConfig& cfg, double duration,
                                                    const PlantDisturbance* disturbance =
                                                        nullptr);

/// Number of sampling intervals in `duration`; throws ConfigError if it is not
/// a multiple of `sampling`.
[[nodiscard]] int sampling_steps(double duration, double sampling);

/// Advances the plant over one sampling interval with piecewise-constant
/// control weights per sub-step. Appends sub-step errors when `fine` is set.
[[nodiscard]] Vector advance_plant(const FemOperators& plant, const ImplicitEuler& stepper,
                                   const Vector& y, const Vector& u,
                                   const std::vector<double>& activity, double t_start,
                                   ClosedLoopResult* fine);

}  // namespace sacpde
