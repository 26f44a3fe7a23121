#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace sacpde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using ScalarFunction = std::function<double(double)>;

/// 1-D mesh on [0, L]. Interior nodes carry the hat functions of the state
/// space; each element carries one piecewise-constant control basis function.
class Mesh {
 public:
  /// Uniform mesh with h = L / n_elements. Requires L > 0 and n_elements >= 2.
  static Mesh uniform(double length, int n_elements);
  /// Arbitrary strictly increasing nodes starting at 0.
  static Mesh from_nodes(std::vector<double> nodes);

  [[nodiscard]] double length() const { return nodes_.back(); }
  [[nodiscard]] int num_elements() const { return static_cast<int>(nodes_.size()) - 1; }
  [[nodiscard]] int num_interior_nodes() const { return num_elements() - 1; }
  [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
  [[nodiscard]] double node(int i) const { return nodes_[static_cast<size_t>(i)]; }
  [[nodiscard]] double element_size(int e) const { return node(e + 1) - node(e); }
  /// Largest element size.
  [[nodiscard]] double max_element_size() const;
  [[nodiscard]] bool is_uniform() const { return uniform_; }

  /// Coordinates of the interior nodes (the state degrees of freedom).
  [[nodiscard]] Vector interior_coordinates() const;
  /// Element midpoints (the control degrees of freedom).
  [[nodiscard]] Vector element_midpoints() const;

 private:
  explicit Mesh(std::vector<double> nodes, bool uniform)
      : nodes_(std::move(nodes)), uniform_(uniform) {}
  std::vector<double> nodes_;
  bool uniform_ = false;
};

/// Support (a, b) of the distributed control indicator.
struct ControlSupport {
  double a = 0.0;
  double b = 1.0;

  bool operator==(const ControlSupport&) const = default;
};

/// Observation window (a, b) with weight q_bar; the stage cost integrand is
/// (q_bar * chi_(a,b) * y)^2.
struct ObservationWindow {
  double a = 0.0;
  double b = 1.0;
  double q_bar = 10.0;

  bool operator==(const ObservationWindow&) const = default;
};

/// Assembled semidiscrete plant M y' = A y + B u with stage-cost weight W and
/// control-space weight R.
///
/// Index conventions: state vectors have one entry per interior node, control
/// vectors one entry per element. `B` is (state x control) with entries
/// <phi_i, sqrt(beta) chi psi_j>.
struct FemOperators {
  Mesh mesh = Mesh::uniform(1.0, 2);
  double mu = 0.0;
  double beta = 1.0;
  ControlSupport support;
  ObservationWindow observation;
  double control_weight = 1.0;

  SparseMatrix M;  ///< state mass matrix
  SparseMatrix K;  ///< stiffness matrix <phi_i', phi_j'>
  SparseMatrix A;  ///< mu * M - K
  SparseMatrix B;  ///< control operator
  SparseMatrix W;  ///< observation weight q_bar^2 * int_a^b phi_i phi_j
  SparseMatrix R;  ///< control inner product (weight * control mass matrix)

  [[nodiscard]] Eigen::Index state_dim() const { return M.rows(); }
  [[nodiscard]] Eigen::Index control_dim() const { return R.rows(); }

  /// Same plant with a different reaction coefficient.
  [[nodiscard]] FemOperators with_mu(double new_mu) const;

  [[nodiscard]] bool full_observation() const;
  [[nodiscard]] bool full_control() const;
};

[[nodiscard]] Mesh build_mesh(double length, int n_elements);

/// Assembles all matrices by exact integration of the polynomial integrands.
/// Throws std::invalid_argument if the support or window leaves [0, L] or
/// if `control_weight` <= 0.
[[nodiscard]] FemOperators assemble_operators(const Mesh& mesh, double mu, double beta,
                                              const ControlSupport& support,
                                              const ObservationWindow& observation,
                                              double control_weight = 1.0);

/// L2 projection of y0 onto the hat space: solves M y = (<y0, phi_i>)_i with
/// 4-point Gauss quadrature per element.
[[nodiscard]] Vector project_initial(const FemOperators& ops, const ScalarFunction& y0);

/// sqrt(y^T M y).
[[nodiscard]] double l2_norm(const SparseMatrix& mass, const Vector& y);

/// Nodal values of f at the interior nodes.
[[nodiscard]] Vector interpolate(const Mesh& mesh, const ScalarFunction& f);

/// Evaluates the piecewise-linear function with interior coefficients `y` at x.
[[nodiscard]] double evaluate(const Mesh& mesh, const Vector& y, double x);

/// || y_h - f ||_{L2(0,L)} with 4-point Gauss quadrature per element.
[[nodiscard]] double l2_distance(const Mesh& mesh, const Vector& y, const ScalarFunction& f);

/// Four-point Gauss-Legendre rule on [-1, 1].
struct GaussRule4 {
  static constexpr int kPoints = 4;
  static const double kNodes[kPoints];
  static const double kWeights[kPoints];
};

}  // namespace sacpde
