#include "sacpde/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sacpde/errors.hpp"

namespace sacpde {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

}  // namespace

double ModeSpectrum::eigenfunction(int k, double x) const {
  return std::sqrt(2.0 / length) * std::sin(k * kPi * x / length);
}

int ModeSpectrum::num_unstable() const {
  return static_cast<int>(
      std::count_if(modes.begin(), modes.end(), [](const Mode& m) { return m.delta > 0.0; }));
}

ModeSpectrum dirichlet_eigenpairs(double length, double mu, int k_max) {
  if (!(length > 0.0)) throw std::invalid_argument("domain length must be positive");
  if (k_max < 1) throw std::invalid_argument("need at least one mode");
  ModeSpectrum spectrum;
  spectrum.length = length;
  spectrum.mu = mu;
  spectrum.modes.reserve(static_cast<size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) {
    Mode m;
    m.k = k;
    const double w = k * kPi / length;
    m.eigenvalue = -w * w;
    m.delta = mu + m.eigenvalue;
    if (std::abs(m.delta) <= 1e-12 * std::max(1.0, std::abs(mu))) {
      throw std::invalid_argument("mu resonates with Dirichlet mode k = " + std::to_string(k));
    }
    spectrum.modes.push_back(m);
  }
  return spectrum;
}

ModeSpectrum mode_coefficients(const ScalarFunction& y0, ModeSpectrum spectrum) {
  using boost::math::quadrature::gauss_kronrod;
  const double length = spectrum.length;
  for (Mode& m : spectrum.modes) {
    // one panel per half period keeps the integrand non-oscillatory on each piece
    double chi = 0.0;
    double scale = 0.0;
    for (int j = 0; j < m.k; ++j) {
      const double a = length * j / m.k;
      const double b = length * (j + 1) / m.k;
      double error = 0.0;
      double l1 = 0.0;
      const double piece = gauss_kronrod<double, 31>::integrate(
          [&](double x) { return y0(x) * spectrum.eigenfunction(m.k, x); }, a, b, 10, 1e-11,
          &error, &l1);
      if (!std::isfinite(piece) || error > 1e-9 * std::max(1.0, l1)) {
        throw NumericalError("quadrature for chi_" + std::to_string(m.k) +
                             " did not converge (error estimate " + std::to_string(error) + ")");
      }
      chi += piece;
      scale += l1;
    }
    // coefficients at roundoff level of the integrand's L1 mass are zero
    m.chi = std::abs(chi) <= 64.0 * std::numeric_limits<double>::epsilon() * scale ? 0.0 : chi;
  }
  spectrum.has_coefficients = true;
  return spectrum;
}

double fbar_eigenvalue(double delta, double q_bar, double horizon) {
  const double q2 = q_bar * q_bar;
  if (std::abs(delta) * horizon < 1e-8) return q2 * horizon * (1.0 + delta * horizon);
  return q2 * std::expm1(2.0 * horizon * delta) / (2.0 * delta);
}

double closed_loop_rate(double delta, double alpha_d, double beta, double q_bar, double horizon) {
  return delta + alpha_d * beta * fbar_eigenvalue(delta, q_bar, horizon);
}

double alpha_k_trajectory(double chi, double rate, double t) { return chi * std::exp(rate * t); }

ClosedLoopRates closed_loop_rates(const ModeSpectrum& spectrum, double alpha_d, double beta,
                                  double q_bar, double horizon) {
  ClosedLoopRates rates;
  rates.alpha_d = alpha_d;
  rates.beta = beta;
  rates.q_bar = q_bar;
  rates.horizon = horizon;
  for (const Mode& m : spectrum.modes) {
    rates.kappa.push_back(alpha_d * beta * q_bar * q_bar / (2.0 * m.delta));
    rates.rate.push_back(closed_loop_rate(m.delta, alpha_d, beta, q_bar, horizon));
  }
  return rates;
}

bool StabilityReport::stable(double alpha_d) const {
  if (!(alpha_d < 0.0) || !(margin < 0.0)) return false;
  return max_rate(alpha_d) <= margin;
}

double StabilityReport::max_rate(double alpha_d) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (double d : deltas) worst = std::max(worst, closed_loop_rate(d, alpha_d, beta, q_bar, horizon));
  return worst;
}

StabilityReport stability_threshold(const ModeSpectrum& spectrum, double beta, double q_bar,
                                    double horizon) {
  if (spectrum.modes.empty()) throw std::invalid_argument("stability analysis needs modes");
  StabilityReport report;
  report.beta = beta;
  report.q_bar = q_bar;
  report.horizon = horizon;
  double min_abs = std::numeric_limits<double>::infinity();
  for (const Mode& m : spectrum.modes) {
    report.deltas.push_back(m.delta);
    min_abs = std::min(min_abs, std::abs(m.delta));
  }
  report.margin = -min_abs;
  const double c = report.margin;
  for (const Mode& m : spectrum.modes) {
    if (m.delta <= 0.0) continue;
    const double denom = beta * q_bar * q_bar * std::expm1(2.0 * horizon * m.delta);
    ModeThreshold row;
    row.k = m.k;
    row.delta = m.delta;
    row.alpha_threshold = (-2.0 * m.delta * m.delta + c * m.delta) / denom;
    row.alpha_boundary = (2.0 * c * m.delta - 2.0 * m.delta * m.delta) / denom;
    report.unstable.push_back(row);
  }
  for (const ModeThreshold& row : report.unstable) {
    report.alpha_bar = std::min(report.alpha_bar, row.alpha_threshold);
    report.alpha_boundary = std::min(report.alpha_boundary, row.alpha_boundary);
  }
  return report;
}

Vector spectral_solution(const ModeSpectrum& spectrum, const ClosedLoopRates& rates, double t,
                         const Vector& x, double tail_tolerance) {
  if (rates.rate.size() != spectrum.modes.size()) {
    throw std::invalid_argument("rates do not match the spectrum");
  }
  const Mode& last = spectrum.modes.back();
  const double tail = std::abs(alpha_k_trajectory(last.chi, rates.rate.back(), t));
  if (tail > tail_tolerance) {
    throw NumericalError("modal sum not converged: |chi_" + std::to_string(last.k) +
                         " e^{r t}| = " + std::to_string(tail) + " exceeds " +
                         std::to_string(tail_tolerance) + "; increase k_max");
  }
  Vector y = Vector::Zero(x.size());
  for (size_t i = 0; i < spectrum.modes.size(); ++i) {
    const Mode& m = spectrum.modes[i];
    if (m.chi == 0.0) continue;
    const double a = alpha_k_trajectory(m.chi, rates.rate[i], t);
    for (Eigen::Index j = 0; j < x.size(); ++j) y[j] += a * spectrum.eigenfunction(m.k, x[j]);
  }
  return y;
}

Matrix fbar_matrix(const FemOperators& ops, double horizon, int k_max) {
  if (!ops.full_observation()) {
    throw ConfigError("the modal representation of F requires observation on the full domain");
  }
  if (!ops.mesh.is_uniform()) {
    throw ConfigError("the modal representation of F requires a uniform mesh");
  }
  const Eigen::Index n = ops.state_dim();
  const int modes = std::min<int>(k_max, static_cast<int>(n));
  const ModeSpectrum spectrum = dirichlet_eigenpairs(ops.mesh.length(), ops.mu, modes);
  const Vector nodes = ops.mesh.interior_coordinates();
  Matrix basis(n, modes);
  Vector weights(modes);
  for (int k = 1; k <= modes; ++k) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = spectrum.eigenfunction(k, nodes[i]);
    v /= l2_norm(ops.M, v);
    basis.col(k - 1) = v;
    weights[k - 1] = fbar_eigenvalue(spectrum.modes[static_cast<size_t>(k - 1)].delta,
                                     ops.observation.q_bar, horizon);
  }
  const Matrix projected = Matrix(ops.M) * basis;  // columns M v_k
  return basis * weights.asDiagonal() * projected.transpose();
}

}  // namespace sacpde
