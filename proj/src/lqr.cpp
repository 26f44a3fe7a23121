#include "sacpde/lqr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "sacpde/errors.hpp"
#include "sacpde/evolution.hpp"

namespace sacpde {

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

double care_residual(const Matrix& A, const Matrix& S, const Matrix& Q, const Matrix& P) {
  return (A.transpose() * P + P * A - P * S * P + Q).norm();
}

}  // namespace

Matrix solve_lyapunov(const Matrix& F, const Matrix& C) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n || C.rows() != n || C.cols() != n) {
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  }
  // F = U T U^H, so F^T = U T^H U^H and Y = U^H X U solves T^H Y + Y T = -U^H C U.
  Eigen::ComplexSchur<Matrix> schur(F);
  const ComplexMatrix& U = schur.matrixU();
  const ComplexMatrix& T = schur.matrixT();
  const ComplexMatrix rhs = -(U.adjoint() * C.cast<std::complex<double>>() * U);
  const ComplexMatrix Th = T.adjoint();
  const double scale = std::max(1.0, T.cwiseAbs().maxCoeff());

  ComplexMatrix Y(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd c = rhs.col(j);
    if (j > 0) c.noalias() -= Y.leftCols(j) * T.col(j).head(j);
    // (T^H + T_jj I) is lower triangular
    ComplexMatrix L = Th;
    L.diagonal().array() += T(j, j);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(L(i, i)) <= 1e-13 * scale) {
        throw NumericalError("Lyapunov equation is singular (eigenvalues sum to zero)");
      }
    }
    Y.col(j) = L.triangularView<Eigen::Lower>().solve(c);
  }
  return symmetrize((U * Y * U.adjoint()).real());
}

Matrix stabilizing_gain(const Matrix& A, const Matrix& B, const Matrix& R) {
  const Eigen::Index n = A.rows();
  // Left eigenvectors of the modes with Re >= 0 span an A^T-invariant
  // subspace; with an orthonormal basis Q_u of it, z = Q_u^T y obeys
  // z' = A_u z + Q_u^T B u with A_u = Q_u^T A Q_u, and ker(Q_u^T) is
  // A-invariant and carries the stable modes.
  Eigen::EigenSolver<Matrix> left(A.transpose());
  if (left.info() != Eigen::Success) throw NumericalError("eigen decomposition failed");
  const Eigen::VectorXcd lambda = left.eigenvalues();
  double shift = 0.0;
  ComplexMatrix Wc(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda[i].real() >= 0.0) {
      shift = std::max(shift, lambda[i].real());
      Wc.conservativeResize(n, Wc.cols() + 1);
      Wc.col(Wc.cols() - 1) = left.eigenvectors().col(i);
    }
  }
  if (Wc.cols() == 0) return Matrix::Zero(B.cols(), n);

  Matrix basis(n, 2 * Wc.cols());
  basis << Wc.real(), Wc.imag();
  Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  const Eigen::Index rank = qr.rank();
  const Matrix Qu = Matrix(qr.householderQ()).leftCols(rank);

  const Matrix Au = Qu.transpose() * A * Qu;
  const Matrix Bu = Qu.transpose() * B;
  const Matrix Rinv = R.llt().solve(Matrix::Identity(R.rows(), R.cols()));

  // Bass: (A_u + s I) Z + Z (A_u + s I)^T = 2 B_u R^{-1} B_u^T, K_u = R^{-1} B_u^T Z^{-1}
  const double s = shift + 1.0;
  const Matrix Fu = -(Au + s * Matrix::Identity(rank, rank)).transpose();
  const Matrix Z = solve_lyapunov(Fu, 2.0 * Bu * Rinv * Bu.transpose());
  Eigen::LLT<Matrix> zf(Z);
  if (zf.info() != Eigen::Success) {
    throw NumericalError("unstable modes are not controllable; no stabilizing gain");
  }
  const Matrix Ku = Rinv * Bu.transpose() * zf.solve(Matrix::Identity(rank, rank));
  return Ku * Qu.transpose();
}

RiccatiSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                           const CareOptions& options) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw std::invalid_argument("solve_care: dimension mismatch");
  }
  Eigen::LLT<Matrix> rf(R);
  if (rf.info() != Eigen::Success) throw ConfigError("control weight R is not positive definite");
  const Matrix RinvBt = rf.solve(B.transpose());
  const Matrix S = B * RinvBt;
  const double target = options.tolerance * std::max(1.0, Q.norm());

  Matrix K = stabilizing_gain(A, B, R);
  RiccatiSolution sol;
  sol.P = Matrix::Zero(n, n);
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Matrix Ak = A - B * K;
    const Matrix P = solve_lyapunov(Ak, Q + K.transpose() * R * K);
    const double change = (P - sol.P).norm();
    sol.P = P;
    sol.iterations = it;
    K = RinvBt * P;
    sol.residual = care_residual(A, S, Q, P);
    if (sol.residual <= target) return sol;
    if (!std::isfinite(change)) break;
    if (change <= 1e-15 * std::max(1.0, P.norm())) break;  // stagnated above tolerance
  }
  throw NumericalError("Newton-Kleinman did not reach the CARE tolerance (residual " +
                       std::to_string(sol.residual) + ")");
}

RiccatiSolution solve_care(const FemOperators& ops, const CareOptions& options) {
  const Matrix mass = Matrix(ops.M);
  Eigen::LLT<Matrix> mf(mass);
  const Matrix A_bar = mf.solve(Matrix(ops.A));
  const Matrix B_bar = mf.solve(Matrix(ops.B));
  return solve_care(A_bar, B_bar, Matrix(ops.W), Matrix(ops.R), options);
}

Matrix lqr_gain(const FemOperators& ops, const Matrix& P) {
  const Matrix B_bar = Matrix(ops.M).llt().solve(Matrix(ops.B));
  return Matrix(ops.R).llt().solve(B_bar.transpose() * P);
}

ClosedLoopResult run_lqr_closed_loop(const FemOperators& ops, const Vector& y0,
                                     const Matrix& gain, double duration, double sampling,
                                     int substeps, const PlantDisturbance* disturbance) {
  if (gain.rows() != ops.control_dim() || gain.cols() != ops.state_dim()) {
    throw std::invalid_argument("LQR gain has the wrong shape");
  }
  if (substeps < 1) throw ConfigError("substeps must be at least 1");
  const int steps = sampling_steps(duration, sampling);
  if (disturbance != nullptr && disturbance->mu_per_step.size() < static_cast<size_t>(steps)) {
    throw std::invalid_argument("disturbance sequence shorter than the simulation");
  }
  const double dt = sampling / substeps;
  const ImplicitEuler nominal(ops, dt);
  const std::vector<double> activity(static_cast<size_t>(substeps), 1.0);

  ClosedLoopResult out;
  out.times.push_back(0.0);
  out.states.push_back(y0);
  out.errors.push_back(l2_norm(ops.M, y0));
  out.fine_times.push_back(0.0);
  out.fine_errors.push_back(out.errors.back());

  Vector y = y0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * sampling;
    const auto start = std::chrono::steady_clock::now();
    const Vector u = -(gain * y);
    out.compute_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

    const double mu_k = disturbance ? disturbance->mu_per_step[static_cast<size_t>(k)] : ops.mu;
    const Vector y_prev = y;
    if (disturbance != nullptr) {
      const FemOperators plant = ops.with_mu(mu_k);
      y = advance_plant(plant, ImplicitEuler(plant, dt), y, u, activity, t, &out);
    } else {
      y = advance_plant(ops, nominal, y, u, activity, t, &out);
    }
    // running cost 1/2 int (y^T W y + u^T R u) over the interval, trapezoid in time
    const double state_term = 0.5 * sampling * (y_prev.dot(ops.W * y_prev) + y.dot(ops.W * y));
    out.costs.push_back(0.5 * (state_term + sampling * u.dot(ops.R * u)));

    out.controls.push_back(u);
    out.alphas.push_back(0.0);
    out.realized_mu.push_back(mu_k);
    out.times.push_back((k + 1) * sampling);
    out.states.push_back(y);
    out.errors.push_back(l2_norm(ops.M, y));
  }
  return out;
}

}  // namespace sacpde
