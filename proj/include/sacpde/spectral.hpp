#pragma once

#include <vector>

#include "sacpde/galerkin.hpp"

namespace sacpde {

/// One Dirichlet eigenmode sqrt(2/L) sin(k pi x / L) of the reaction-diffusion
/// operator mu + d^2/dx^2.
struct Mode {
  int k = 1;
  double eigenvalue = 0.0;  ///< D_k = -(k pi / L)^2
  double delta = 0.0;       ///< mu + D_k
  double chi = 0.0;         ///< <y0, phi_k>, zero until mode_coefficients runs
};

struct ModeSpectrum {
  double length = 1.0;
  double mu = 0.0;
  std::vector<Mode> modes;  ///< k = 1..k_max in order
  bool has_coefficients = false;

  [[nodiscard]] int k_max() const { return static_cast<int>(modes.size()); }
  [[nodiscard]] double eigenfunction(int k, double x) const;
  [[nodiscard]] int num_unstable() const;
};

/// Throws std::invalid_argument for L <= 0, k_max < 1 or a resonant mu
/// (mu + D_k = 0 for some k <= k_max).
[[nodiscard]] ModeSpectrum dirichlet_eigenpairs(double length, double mu, int k_max);

/// Fills chi_k by adaptive Gauss-Kronrod quadrature. Throws NumericalError if
/// the quadrature error estimate stays above tolerance.
[[nodiscard]] ModeSpectrum mode_coefficients(const ScalarFunction& y0, ModeSpectrum spectrum);

/// q_bar^2 (e^{2 T delta} - 1) / (2 delta), with the limit q_bar^2 T for
/// |delta| T < 1e-8.
[[nodiscard]] double fbar_eigenvalue(double delta, double q_bar, double horizon);

/// r_k = delta_k + alpha_d beta fbar_eigenvalue(delta_k).
[[nodiscard]] double closed_loop_rate(double delta, double alpha_d, double beta, double q_bar,
                                      double horizon);

/// chi_k e^{r_k t}.
[[nodiscard]] double alpha_k_trajectory(double chi, double rate, double t);

struct ClosedLoopRates {
  double alpha_d = 0.0;
  double beta = 1.0;
  double q_bar = 0.0;
  double horizon = 1.0;
  std::vector<double> kappa;  ///< alpha_d beta q_bar^2 / (2 delta_k)
  std::vector<double> rate;   ///< r_k
};

[[nodiscard]] ClosedLoopRates closed_loop_rates(const ModeSpectrum& spectrum, double alpha_d,
                                                double beta, double q_bar, double horizon);

struct ModeThreshold {
  int k = 1;
  double delta = 0.0;
  /// (-2 delta^2 + C delta) / (beta q_bar^2 (e^{2 T delta} - 1)).
  double alpha_threshold = 0.0;
  /// Value where r_k equals C exactly: (2 C delta - 2 delta^2) / (beta q_bar^2 (e^{2 T delta} - 1)).
  double alpha_boundary = 0.0;
};

struct StabilityReport {
  double margin = 0.0;  ///< C = -min_k |delta_k| over the retained modes
  std::vector<ModeThreshold> unstable;
  /// Minimum of alpha_threshold over unstable modes; 0 when all modes are stable.
  double alpha_bar = 0.0;
  /// Minimum of alpha_boundary over unstable modes; 0 when all modes are stable.
  double alpha_boundary = 0.0;
  std::vector<double> deltas;
  double beta = 1.0;
  double q_bar = 0.0;
  double horizon = 1.0;

  /// True when alpha_d < 0 and r_k <= C < 0 for every retained mode.
  [[nodiscard]] bool stable(double alpha_d) const;
  /// max_k r_k(alpha_d).
  [[nodiscard]] double max_rate(double alpha_d) const;
};

[[nodiscard]] StabilityReport stability_threshold(const ModeSpectrum& spectrum, double beta,
                                                  double q_bar, double horizon);

/// Truncated modal sum sum_k chi_k e^{r_k t} phi_k(x). Throws NumericalError
/// when the last retained term exceeds `tail_tolerance`.
[[nodiscard]] Vector spectral_solution(const ModeSpectrum& spectrum, const ClosedLoopRates& rates,
                                       double t, const Vector& x, double tail_tolerance = 1e-10);

/// Matrix of F in the hat basis: sum_k f_k v_k v_k^T M with v_k the
/// M-normalized nodal interpolant of phi_k. Requires a uniform mesh and full
/// observation (throws ConfigError otherwise).
[[nodiscard]] Matrix fbar_matrix(const FemOperators& ops, double horizon, int k_max = 64);

}  // namespace sacpde
