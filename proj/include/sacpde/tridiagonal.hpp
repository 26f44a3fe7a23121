#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace sacpde {

/// LU factorization (Thomas algorithm, no pivoting) of a tridiagonal matrix.
/// Immutable after construction, so one factor can be shared by concurrent
/// solves.
class TridiagonalFactor {
 public:
  /// Throws NumericalError if `matrix` has entries outside the three central
  /// bands or a pivot vanishes relative to the row scale.
  explicit TridiagonalFactor(const Eigen::SparseMatrix<double>& matrix);

  [[nodiscard]] Eigen::Index size() const { return diag_.size(); }

  /// Solves in place.
  void solve_in_place(Eigen::VectorXd& rhs) const;
  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  Eigen::VectorXd lower_;  // multipliers l_i = a_i / d_{i-1}
  Eigen::VectorXd diag_;   // pivots d_i
  Eigen::VectorXd upper_;  // unchanged superdiagonal
};

}  // namespace sacpde
