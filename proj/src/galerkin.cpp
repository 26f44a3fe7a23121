#include "sacpde/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sacpde/errors.hpp"
#include "sacpde/tridiagonal.hpp"

namespace sacpde {

const double GaussRule4::kNodes[GaussRule4::kPoints] = {
    -0.86113631159405257522, -0.33998104358485626480, 0.33998104358485626480,
    0.86113631159405257522};
const double GaussRule4::kWeights[GaussRule4::kPoints] = {
    0.34785484513745385737, 0.65214515486254614263, 0.65214515486254614263,
    0.34785484513745385737};

namespace {

using Triplet = Eigen::Triplet<double>;

// Hat function of mesh node `node` restricted to element `e` (which must
// contain the node), evaluated at x.
double local_hat(const Mesh& mesh, int e, int node, double x) {
  const double x0 = mesh.node(e);
  const double x1 = mesh.node(e + 1);
  return node == e ? (x1 - x) / (x1 - x0) : (x - x0) / (x1 - x0);
}

void check_interval(double a, double b, double length, const char* what) {
  const double slack = 1e-12 * length;
  if (!(a >= -slack && a < b && b <= length + slack)) {
    throw std::invalid_argument(std::string(what) + " (" + std::to_string(a) + ", " +
                                std::to_string(b) + ") must satisfy 0 <= a < b <= L");
  }
}

}  // namespace

Mesh Mesh::uniform(double length, int n_elements) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("mesh length must be positive, got " + std::to_string(length));
  }
  if (n_elements < 2) {
    throw std::invalid_argument("mesh needs at least 2 elements, got " +
                                std::to_string(n_elements));
  }
  std::vector<double> nodes(static_cast<size_t>(n_elements) + 1);
  const double h = length / n_elements;
  for (int i = 0; i <= n_elements; ++i) nodes[static_cast<size_t>(i)] = i * h;
  nodes.back() = length;
  return Mesh(std::move(nodes), true);
}

Mesh Mesh::from_nodes(std::vector<double> nodes) {
  if (nodes.size() < 3) throw std::invalid_argument("mesh needs at least 2 elements");
  if (nodes.front() != 0.0) throw std::invalid_argument("first mesh node must be 0");
  for (size_t i = 1; i < nodes.size(); ++i) {
    if (!(nodes[i] > nodes[i - 1])) {
      throw std::invalid_argument("mesh nodes must be strictly increasing");
    }
  }
  return Mesh(std::move(nodes), false);
}

double Mesh::max_element_size() const {
  double h = 0.0;
  for (int e = 0; e < num_elements(); ++e) h = std::max(h, element_size(e));
  return h;
}

Vector Mesh::interior_coordinates() const {
  Vector x(num_interior_nodes());
  for (int i = 0; i < num_interior_nodes(); ++i) x[i] = node(i + 1);
  return x;
}

Vector Mesh::element_midpoints() const {
  Vector x(num_elements());
  for (int e = 0; e < num_elements(); ++e) x[e] = 0.5 * (node(e) + node(e + 1));
  return x;
}

Mesh build_mesh(double length, int n_elements) { return Mesh::uniform(length, n_elements); }

FemOperators FemOperators::with_mu(double new_mu) const {
  FemOperators out = *this;
  out.mu = new_mu;
  out.A = new_mu * M - K;
  return out;
}

bool FemOperators::full_observation() const {
  return observation.a <= 0.0 && observation.b >= mesh.length();
}

bool FemOperators::full_control() const {
  return support.a <= 0.0 && support.b >= mesh.length();
}

FemOperators assemble_operators(const Mesh& mesh, double mu, double beta,
                                const ControlSupport& support,
                                const ObservationWindow& observation, double control_weight) {
  const double length = mesh.length();
  check_interval(support.a, support.b, length, "control support");
  check_interval(observation.a, observation.b, length, "observation window");
  if (!(observation.q_bar >= 0.0)) throw std::invalid_argument("q_bar must be nonnegative");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(control_weight > 0.0)) throw std::invalid_argument("control weight must be positive");

  const int n_el = mesh.num_elements();
  const int n_state = mesh.num_interior_nodes();
  // state index of mesh node `node`, or -1 on the Dirichlet boundary
  auto dof = [n_el](int node) { return (node == 0 || node == n_el) ? -1 : node - 1; };

  std::vector<Triplet> mass, stiff, control, weight, rmass;
  const double sqrt_beta = std::sqrt(beta);
  const double q2 = observation.q_bar * observation.q_bar;

  for (int e = 0; e < n_el; ++e) {
    const double h = mesh.element_size(e);
    const double x0 = mesh.node(e);
    const double x1 = mesh.node(e + 1);
    const int local[2] = {e, e + 1};

    for (int r = 0; r < 2; ++r) {
      const int gr = dof(local[r]);
      if (gr < 0) continue;
      for (int c = 0; c < 2; ++c) {
        const int gc = dof(local[c]);
        if (gc < 0) continue;
        mass.emplace_back(gr, gc, r == c ? h / 3.0 : h / 6.0);
        stiff.emplace_back(gr, gc, r == c ? 1.0 / h : -1.0 / h);
      }
    }

    rmass.emplace_back(e, e, control_weight * h);

    // control: sqrt(beta) * int_{elem ∩ (a,b)} phi_i ; affine integrand, midpoint rule exact
    const double ca = std::max(x0, support.a);
    const double cb = std::min(x1, support.b);
    if (cb > ca) {
      const double mid = 0.5 * (ca + cb);
      for (int r = 0; r < 2; ++r) {
        const int gr = dof(local[r]);
        if (gr < 0) continue;
        control.emplace_back(gr, e, sqrt_beta * (cb - ca) * local_hat(mesh, e, local[r], mid));
      }
    }

    // observation: q^2 * int_{elem ∩ (a,b)} phi_i phi_j ; quadratic integrand, Simpson exact
    const double oa = std::max(x0, observation.a);
    const double ob = std::min(x1, observation.b);
    if (ob > oa && q2 > 0.0) {
      const double om = 0.5 * (oa + ob);
      for (int r = 0; r < 2; ++r) {
        const int gr = dof(local[r]);
        if (gr < 0) continue;
        for (int c = 0; c < 2; ++c) {
          const int gc = dof(local[c]);
          if (gc < 0) continue;
          auto prod = [&](double x) {
            return local_hat(mesh, e, local[r], x) * local_hat(mesh, e, local[c], x);
          };
          const double integral = (ob - oa) / 6.0 * (prod(oa) + 4.0 * prod(om) + prod(ob));
          weight.emplace_back(gr, gc, q2 * integral);
        }
      }
    }
  }

  FemOperators ops{mesh, mu, beta, support, observation, control_weight, {}, {}, {}, {}, {}, {}};
  ops.M.resize(n_state, n_state);
  ops.M.setFromTriplets(mass.begin(), mass.end());
  ops.K.resize(n_state, n_state);
  ops.K.setFromTriplets(stiff.begin(), stiff.end());
  ops.A = mu * ops.M - ops.K;
  ops.B.resize(n_state, n_el);
  ops.B.setFromTriplets(control.begin(), control.end());
  ops.W.resize(n_state, n_state);
  ops.W.setFromTriplets(weight.begin(), weight.end());
  ops.R.resize(n_el, n_el);
  ops.R.setFromTriplets(rmass.begin(), rmass.end());
  return ops;
}

Vector project_initial(const FemOperators& ops, const ScalarFunction& y0) {
  const Mesh& mesh = ops.mesh;
  const int n_el = mesh.num_elements();
  Vector load = Vector::Zero(mesh.num_interior_nodes());
  for (int e = 0; e < n_el; ++e) {
    const double x0 = mesh.node(e);
    const double h = mesh.element_size(e);
    for (int q = 0; q < GaussRule4::kPoints; ++q) {
      const double x = x0 + 0.5 * h * (GaussRule4::kNodes[q] + 1.0);
      const double w = 0.5 * h * GaussRule4::kWeights[q];
      const double f = y0(x);
      if (e > 0) load[e - 1] += w * f * local_hat(mesh, e, e, x);
      if (e + 1 < n_el) load[e] += w * f * local_hat(mesh, e, e + 1, x);
    }
  }
  const TridiagonalFactor factor(ops.M);
  return factor.solve(load);
}

double l2_norm(const SparseMatrix& mass, const Vector& y) {
  return std::sqrt(std::max(0.0, y.dot(mass * y)));
}

Vector interpolate(const Mesh& mesh, const ScalarFunction& f) {
  Vector y(mesh.num_interior_nodes());
  for (int i = 0; i < y.size(); ++i) y[i] = f(mesh.node(i + 1));
  return y;
}

double evaluate(const Mesh& mesh, const Vector& y, double x) {
  const auto& nodes = mesh.nodes();
  if (x <= 0.0 || x >= mesh.length()) return 0.0;
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  const int e = static_cast<int>(it - nodes.begin()) - 1;
  const int n_el = mesh.num_elements();
  double value = 0.0;
  if (e > 0) value += y[e - 1] * local_hat(mesh, e, e, x);
  if (e + 1 < n_el) value += y[e] * local_hat(mesh, e, e + 1, x);
  return value;
}

double l2_distance(const Mesh& mesh, const Vector& y, const ScalarFunction& f) {
  const int n_el = mesh.num_elements();
  double sum = 0.0;
  for (int e = 0; e < n_el; ++e) {
    const double x0 = mesh.node(e);
    const double h = mesh.element_size(e);
    const double left = e > 0 ? y[e - 1] : 0.0;
    const double right = e + 1 < n_el ? y[e] : 0.0;
    for (int q = 0; q < GaussRule4::kPoints; ++q) {
      const double s = 0.5 * (GaussRule4::kNodes[q] + 1.0);
      const double x = x0 + s * h;
      const double diff = (1.0 - s) * left + s * right - f(x);
      sum += 0.5 * h * GaussRule4::kWeights[q] * diff * diff;
    }
  }
  return std::sqrt(sum);
}

}  // namespace sacpde
