#pragma once

#include "sacpde/galerkin.hpp"
#include "sacpde/sac.hpp"

namespace sacpde {

struct RiccatiSolution {
  Matrix P;
  double residual = 0.0;  ///< Frobenius norm of the CARE residual at P
  int iterations = 0;     ///< Newton-Kleinman steps
};

struct CareOptions {
  /// Required residual relative to max(||Q||_F, 1).
  double tolerance = 1e-8;
  int max_iterations = 60;
};

/// Solves F^T X + X F + C = 0 by Bartels-Stewart on the complex Schur form of
/// F. Throws NumericalError if F and -F share an eigenvalue.
[[nodiscard]] Matrix solve_lyapunov(const Matrix& F, const Matrix& C);

/// A^T P + P A - P B R^{-1} B^T P + Q = 0 by Newton-Kleinman. The initial gain
/// stabilizes the unstable eigenspace of A only (see stabilizing_gain).
[[nodiscard]] RiccatiSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q,
                                         const Matrix& R, const CareOptions& options = {});

/// CARE of the semidiscrete plant with A_bar = M^{-1} A, B_bar = M^{-1} B,
/// state weight W and control weight R (the SAC stage-cost weights).
[[nodiscard]] RiccatiSolution solve_care(const FemOperators& ops, const CareOptions& options = {});

/// Gain K with A - B K Hurwitz, built from the eigenvectors of A with
/// nonnegative real part. Throws NumericalError if that block is not
/// controllable.
[[nodiscard]] Matrix stabilizing_gain(const Matrix& A, const Matrix& B, const Matrix& R);

/// K = R^{-1} B_bar^T P = R^{-1} B^T M^{-1} P, so that u = -K y.
[[nodiscard]] Matrix lqr_gain(const FemOperators& ops, const Matrix& P);

/// Sampled LQR loop: u_k = -K y(t_k) held over each interval of length
/// `sampling`, plant advanced with `substeps` implicit Euler steps per
/// interval. `costs` holds the realized running cost per interval.
[[nodiscard]] ClosedLoopResult run_lqr_closed_loop(const FemOperators& ops, const Vector& y0,
                                                   const Matrix& gain, double duration,
                                                   double sampling, int substeps,
                                                   const PlantDisturbance* disturbance = nullptr);

}  // namespace sacpde
