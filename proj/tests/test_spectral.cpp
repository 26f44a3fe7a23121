#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "sacpde/errors.hpp"
#include "sacpde/spectral.hpp"

using namespace sacpde;

namespace {

const double kPi = std::acos(-1.0);
const double kMu = 1.35 * kPi * kPi;

// composite Simpson rule, independent of the library's quadrature
template <class F>
double simpson(F f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

Matrix closed_loop_generator(const FemOperators& ops, double alpha_d, const Matrix& fbar) {
  const Matrix b = Matrix(ops.B);
  const Matrix coupling = b * Matrix(ops.R).inverse() * b.transpose() * fbar;
  return Matrix(ops.M).inverse() * (Matrix(ops.A) + alpha_d * coupling);
}

}  // namespace

TEST(Eigenpairs, DefaultSpectrum) {
  const ModeSpectrum s = dirichlet_eigenpairs(1.0, kMu, 5);
  EXPECT_EQ(s.num_unstable(), 1);
  EXPECT_NEAR(s.modes[0].delta, 0.35 * kPi * kPi, 1e-12);
  EXPECT_NEAR(s.modes[1].delta, -2.65 * kPi * kPi, 1e-12);
  EXPECT_NEAR(s.eigenfunction(1, 0.5), std::sqrt(2.0), 1e-15);
  EXPECT_THROW((void)dirichlet_eigenpairs(1.0, 4.0 * kPi * kPi, 3), std::invalid_argument);
  EXPECT_THROW((void)dirichlet_eigenpairs(0.0, kMu, 3), std::invalid_argument);
}

TEST(FbarEigenvalue, MatchesQuadratureOfExponential) {
  for (double delta : {0.35 * kPi * kPi, -2.65 * kPi * kPi, 1e-10, -0.3}) {
    const double oracle = simpson([&](double t) { return 100.0 * std::exp(2.0 * delta * t); }, 0, 1);
    EXPECT_NEAR(fbar_eigenvalue(delta, 10.0, 1.0), oracle, 1e-8 * std::abs(oracle))
        << "delta=" << delta;
  }
  EXPECT_NEAR(fbar_eigenvalue(0.35 * kPi * kPi, 10.0, 1.0), 1.4474e4, 1.0);
}

TEST(ClosedLoopRate, MatchesScalarModalSimulation) {
  // Integrate a' = delta a + alpha beta f a by RK4 and fit the rate.
  const double delta = 0.35 * kPi * kPi;
  const double f = simpson([&](double t) { return 100.0 * std::exp(2.0 * delta * t); }, 0, 1);
  const double alpha = -1e-3;
  const double slope = delta + alpha * 1.6 * f;
  double a = 1.0;
  const int n = 1000;
  const double dt = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const double k1 = slope * a, k2 = slope * (a + 0.5 * dt * k1);
    const double k3 = slope * (a + 0.5 * dt * k2), k4 = slope * (a + dt * k3);
    a += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  EXPECT_NEAR(closed_loop_rate(delta, alpha, 1.6, 10.0, 1.0), std::log(a), 1e-6);
  EXPECT_NEAR(std::log(a), -19.70, 0.01);
}

TEST(StabilityThreshold, DefaultValues) {
  const StabilityReport r = stability_threshold(dirichlet_eigenpairs(1.0, kMu, 20), 1.6, 10.0, 1.0);
  const double d1 = 0.35 * kPi * kPi;
  const double denom = 1.6 * 100.0 * std::expm1(2.0 * d1);
  EXPECT_DOUBLE_EQ(r.margin, -d1);
  ASSERT_EQ(r.unstable.size(), 1u);
  EXPECT_NEAR(r.alpha_bar, -3.0 * d1 * d1 / denom, 1e-15);
  EXPECT_NEAR(r.alpha_bar, -2.24e-4, 0.01e-4);
  EXPECT_NEAR(r.alpha_boundary, -4.0 * d1 * d1 / denom, 1e-15);
  // the boundary value puts the first rate exactly on the margin
  EXPECT_NEAR(r.max_rate(r.alpha_boundary), r.margin, 1e-9);
  EXPECT_TRUE(r.stable(2.0 * r.alpha_bar));
  EXPECT_FALSE(r.stable(0.1 * r.alpha_bar));
  EXPECT_FALSE(r.stable(0.0));
}

TEST(StabilityThreshold, RateIsMonotoneAndContinuousInAlpha) {
  const double d1 = 0.35 * kPi * kPi;
  double previous = closed_loop_rate(d1, 0.0, 1.6, 10.0, 1.0);
  EXPECT_DOUBLE_EQ(previous, d1);
  for (int i = 1; i <= 100; ++i) {
    const double r = closed_loop_rate(d1, -1e-5 * i, 1.6, 10.0, 1.0);
    EXPECT_LT(r, previous);
    EXPECT_LT(previous - r, 0.5);
    previous = r;
  }
}

TEST(StabilityThreshold, AllStableSpectrumHasNoThreshold) {
  const StabilityReport r = stability_threshold(dirichlet_eigenpairs(1.0, 0.5 * kPi * kPi, 5), 1.6,
                                                10.0, 1.0);
  EXPECT_TRUE(r.unstable.empty());
  EXPECT_EQ(r.alpha_bar, 0.0);
  EXPECT_TRUE(r.stable(-1e-9));
}

TEST(ModeCoefficients, SineDataProjectsOntoOneMode) {
  const ModeSpectrum s = mode_coefficients(
      [](double x) { return 0.2 * std::sin(kPi * x) - 0.05 * std::sin(3 * kPi * x); },
      dirichlet_eigenpairs(1.0, kMu, 6));
  EXPECT_NEAR(s.modes[0].chi, 0.2 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.modes[2].chi, -0.05 / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(s.modes[1].chi, 0.0);
  EXPECT_EQ(s.modes[5].chi, 0.0);
  EXPECT_TRUE(s.has_coefficients);
}

TEST(ModeCoefficients, MatchesSimpsonForGenericData) {
  auto y0 = [](double x) { return x * (1 - x) * std::exp(x); };
  const ModeSpectrum s = mode_coefficients(y0, dirichlet_eigenpairs(1.0, kMu, 8));
  for (const Mode& m : s.modes) {
    const double oracle = simpson([&](double x) { return y0(x) * s.eigenfunction(m.k, x); }, 0, 1);
    EXPECT_NEAR(m.chi, oracle, 1e-10);
  }
}

TEST(SpectralSolution, TailGuard) {
  const ModeSpectrum s =
      mode_coefficients([](double x) { return x * (1 - x); }, dirichlet_eigenpairs(1.0, kMu, 3));
  const ClosedLoopRates rates = closed_loop_rates(s, 0.0, 1.6, 10.0, 1.0);
  Vector x(1);
  x << 0.5;
  EXPECT_THROW((void)spectral_solution(s, rates, 0.0, x), NumericalError);
  EXPECT_NO_THROW((void)spectral_solution(s, rates, 1.0, x));
  ClosedLoopRates wrong = rates;
  wrong.rate.pop_back();
  EXPECT_THROW((void)spectral_solution(s, wrong, 1.0, x), std::invalid_argument);
}

TEST(SpectralSolution, FreeEvolutionOfFirstMode) {
  const ModeSpectrum s =
      mode_coefficients([](double x) { return std::sin(kPi * x); }, dirichlet_eigenpairs(1.0, kMu, 4));
  const ClosedLoopRates rates = closed_loop_rates(s, 0.0, 1.6, 10.0, 1.0);
  Vector x(3);
  x << 0.25, 0.5, 0.9;
  const Vector y = spectral_solution(s, rates, 0.3, x);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(y[i], std::exp(0.35 * kPi * kPi * 0.3) * std::sin(kPi * x[i]), 1e-12);
  }
}

TEST(FbarMatrix, RefusesPartialObservationAndHasModalEigenvalues) {
  const Mesh mesh = build_mesh(1.0, 40);
  const FemOperators partial = assemble_operators(mesh, kMu, 1.6, {0, 1}, {0.7, 0.9, 10.0});
  EXPECT_THROW((void)fbar_matrix(partial, 1.0), ConfigError);

  const FemOperators ops = assemble_operators(mesh, kMu, 1.6, {0, 1}, {0, 1, 10.0});
  const Matrix f = fbar_matrix(ops, 1.0);
  Vector v(39);
  for (int i = 0; i < 39; ++i) v[i] = std::sin(2 * kPi * (i + 1) / 40.0);
  const Vector fv = f * v;
  const double expected = fbar_eigenvalue(kMu - 4 * kPi * kPi, 10.0, 1.0);
  EXPECT_LT((fv - expected * v).norm(), 1e-10 * expected * v.norm());
}

TEST(GalerkinClosedLoop, EigenvaluesConvergeToModalRatesAtSecondOrder) {
  const StabilityReport report =
      stability_threshold(dirichlet_eigenpairs(1.0, kMu, 4), 1.6, 10.0, 1.0);
  const double alpha = 2.0 * report.alpha_bar;
  const double r1 = closed_loop_rate(kMu - kPi * kPi, alpha, 1.6, 10.0, 1.0);
  const double r2 = closed_loop_rate(kMu - 4 * kPi * kPi, alpha, 1.6, 10.0, 1.0);
  double prev1 = 0.0, prev2 = 0.0;
  for (int n : {20, 40, 80}) {
    const FemOperators ops = assemble_operators(build_mesh(1.0, n), kMu, 1.6, {0, 1}, {0, 1, 10.0});
    Eigen::VectorXd eig =
        closed_loop_generator(ops, alpha, fbar_matrix(ops, 1.0)).eigenvalues().real();
    std::sort(eig.data(), eig.data() + eig.size(), std::greater<>());
    const double e1 = std::abs(eig[0] - r1), e2 = std::abs(eig[1] - r2);
    if (prev1 > 0.0) {
      EXPECT_NEAR(std::log2(prev1 / e1), 2.0, 0.2) << "n=" << n;
      EXPECT_NEAR(std::log2(prev2 / e2), 2.0, 0.2) << "n=" << n;
    }
    prev1 = e1;
    prev2 = e2;
  }
}
