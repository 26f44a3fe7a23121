#include "sacpde/tridiagonal.hpp"

#include <cmath>
#include <string>

#include "sacpde/errors.hpp"

namespace sacpde {

TridiagonalFactor::TridiagonalFactor(const Eigen::SparseMatrix<double>& matrix) {
  const Eigen::Index n = matrix.rows();
  if (n == 0 || matrix.cols() != n) {
    throw NumericalError("tridiagonal factor: matrix must be square and non-empty");
  }
  Eigen::VectorXd sub = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sup = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd row_scale = Eigen::VectorXd::Zero(n);
  for (Eigen::Index col = 0; col < matrix.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, col); it; ++it) {
      const Eigen::Index row = it.row();
      const Eigen::Index c = it.col();
      if (row == c) {
        diag[row] = it.value();
      } else if (row == c + 1) {
        sub[row] = it.value();
      } else if (row + 1 == c) {
        sup[row] = it.value();
      } else if (it.value() != 0.0) {
        throw NumericalError("tridiagonal factor: entry outside the band at (" +
                             std::to_string(row) + ", " + std::to_string(c) + ")");
      }
      row_scale[row] += std::abs(it.value());
    }
  }

  lower_ = Eigen::VectorXd::Zero(n);
  diag_ = diag;
  upper_ = sup;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i > 0) {
      lower_[i] = sub[i] / diag_[i - 1];
      diag_[i] -= lower_[i] * upper_[i - 1];
    }
    if (!(std::abs(diag_[i]) > 1e-14 * row_scale[i])) {
      throw NumericalError("tridiagonal factor: vanishing pivot in row " + std::to_string(i) +
                           " (step matrix singular or not diagonally dominant)");
    }
  }
}

void TridiagonalFactor::solve_in_place(Eigen::VectorXd& rhs) const {
  const Eigen::Index n = diag_.size();
  for (Eigen::Index i = 1; i < n; ++i) rhs[i] -= lower_[i] * rhs[i - 1];
  rhs[n - 1] /= diag_[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    rhs[i] = (rhs[i] - upper_[i] * rhs[i + 1]) / diag_[i];
  }
}

Eigen::VectorXd TridiagonalFactor::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = rhs;
  solve_in_place(x);
  return x;
}

}  // namespace sacpde
