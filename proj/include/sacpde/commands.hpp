#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sacpde/experiments.hpp"
#include "sacpde/spectral.hpp"

namespace sacpde {

inline constexpr const char* kToolVersion = "0.1.0";

struct CommandOptions {
  std::string config_path;  ///< empty means all defaults
  std::filesystem::path output_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

/// Dispatches simulate, sweep, compare, analyze or gradient_check. Returns
/// 0 on success, 2 for configuration errors and 3 for numerical failures.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err);

struct GradientCheckRow {
  double tau = 0.0;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double relative_error = 0.0;
};

struct GradientCheckOptions {
  int points = 5;
  double lambda = 1e-4;
  /// Time-step refinement of the horizon grid relative to the SAC dt.
  int refinement = 1;
};

/// Compares p(tau)^T B (v - u1) with the Richardson-extrapolated difference
/// quotient 2 D(lambda/2) - D(lambda), D(l) = (J1(u_{l,tau,v}) - J1(u1)) / l,
/// on the first horizon of the scenario with u1 = 0 and v the SAC action at
/// tau. Times are tau_i = t0 + T (i + 1/2) / points snapped to the grid.
[[nodiscard]] std::vector<GradientCheckRow> gradient_check(const ScenarioConfig& cfg,
                                                           const GradientCheckOptions& options = {});

/// Stability analysis of the scenario's full-domain closed loop.
struct AnalysisReport {
  ModeSpectrum spectrum;
  StabilityReport stability;
  double initial_cost = 0.0;     ///< J1 of the uncontrolled first horizon
  double initial_alpha_d = 0.0;  ///< alpha_d the configured policy picks at t = 0
};

[[nodiscard]] AnalysisReport analyze(const ScenarioConfig& cfg, int k_max = 64);

/// Report text written by the analyze command.
[[nodiscard]] std::string format_analysis(const AnalysisReport& report);

}  // namespace sacpde
