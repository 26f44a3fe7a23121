#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sacpde/galerkin.hpp"
#include "sacpde/lqr.hpp"
#include "sacpde/sac.hpp"

namespace sacpde {

struct PlantConfig {
  double length = 1.0;
  int n_elements = 100;
  double mu = 1.35 * 9.8696044010893586188;  // 1.35 pi^2
  double beta = 1.6;
  /// y0(x) = amplitude * sin(mode * pi * x / L)
  double y0_amplitude = 0.2;
  int y0_mode = 1;

  bool operator==(const PlantConfig&) const = default;
};

struct ControlConfig {
  ControlSupport support;
  ObservationWindow observation;
  double weight = 1.0;  ///< R = weight * control mass matrix

  bool operator==(const ControlConfig&) const = default;
};

struct LqrConfig {
  /// Crossing threshold as a fraction of the initial L2 error.
  double acceptable_error = 0.05;
  double tolerance = 1e-8;
  int max_iterations = 60;

  bool operator==(const LqrConfig&) const = default;
};

struct DisturbanceConfig {
  double level = 0.0;  ///< xi uniform on [-level, level], mu_k = mu (1 + xi)
  std::uint64_t seed = 1;
  /// Reaction coefficient of the prediction model; the plant uses plant.mu.
  std::optional<double> model_mu;

  bool operator==(const DisturbanceConfig&) const = default;
};

struct OutputConfig {
  bool error = true;
  bool cost = true;
  bool control = true;
  bool state = true;
  bool plot_script = true;
  int snapshot_stride = 1;  ///< write every n-th sampling instant to state/control CSVs

  bool operator==(const OutputConfig&) const = default;
};

enum class SweepParameter { kGamma, kHorizon, kObservation };

struct SweepConfig {
  SweepParameter parameter = SweepParameter::kGamma;
  /// Values as written in the config; observation windows use "a:b".
  std::vector<std::string> values;

  bool operator==(const SweepConfig&) const = default;
};

struct ScenarioConfig {
  PlantConfig plant;
  ControlConfig control;
  SacConfig sac;
  LqrConfig lqr;
  double duration = 3.0;
  DisturbanceConfig disturbance;
  OutputConfig output;
  std::optional<SweepConfig> sweep;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  [[nodiscard]] double model_mu() const { return disturbance.model_mu.value_or(plant.mu); }

  bool operator==(const ScenarioConfig&) const = default;
};

/// Portable uniform draws: mt19937_64 output x mapped to (x >> 11) * 2^-53.
/// std::uniform_real_distribution is avoided because its output is not
/// specified across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1).
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// mu (1 + xi) with xi uniform on [-level, level]. Consumes one draw even
/// when level = 0 so sequences stay aligned across levels.
[[nodiscard]] double perturb_mu(double mu_nominal, double level, Rng& rng);

/// One draw per sampling interval.
[[nodiscard]] std::vector<double> disturbance_sequence(double mu_nominal, double level,
                                                       std::uint64_t seed, int steps);

/// FNV-1a 64 over raw bytes.
[[nodiscard]] std::uint64_t fnv1a64(const void* data, size_t size,
                                    std::uint64_t seed = 0xcbf29ce484222325ULL);
[[nodiscard]] std::uint64_t hash_sequence(const std::vector<double>& values);

/// Everything a run needs, derived deterministically from a ScenarioConfig.
struct ScenarioSetup {
  FemOperators model;  ///< prediction model (mu = model_mu)
  Vector y0;
  int steps = 0;
  /// Present whenever the plant differs from the model.
  std::optional<PlantDisturbance> disturbance;
  std::uint64_t disturbance_hash = 0;
};

[[nodiscard]] ScenarioSetup prepare_scenario(const ScenarioConfig& cfg);

/// SAC closed loop for the scenario.
[[nodiscard]] ClosedLoopResult run_scenario(const ScenarioConfig& cfg);

/// Least-squares slope of log(error) over samples with t in [t_begin, t_end].
/// Throws std::invalid_argument if a value in the window is not positive or
/// fewer than two samples fall in it.
[[nodiscard]] double decay_rate_fit(const std::vector<double>& times,
                                    const std::vector<double>& errors, double t_begin,
                                    double t_end);

struct SweepRow {
  std::string label;
  ScenarioConfig config;
  ClosedLoopResult result;
  bool ok = false;
  std::string failure;
  double final_error = 0.0;
  double min_error = 0.0;
  double decay_rate = 0.0;  ///< fit over the first half of the run
};

struct SweepResult {
  SweepParameter parameter = SweepParameter::kGamma;
  std::vector<SweepRow> rows;  ///< in the order of the requested values
  bool partial = false;        ///< a scenario failed; later rows were not run
};

/// Applies one sweep value to a copy of `base`. Throws ConfigError for
/// malformed values.
[[nodiscard]] ScenarioConfig apply_sweep_value(const ScenarioConfig& base,
                                               SweepParameter parameter,
                                               const std::string& value);

/// Runs every value on a worker pool; `workers` = 0 reads SACPDE_WORKERS and
/// falls back to the hardware concurrency.
[[nodiscard]] SweepResult sweep(const ScenarioConfig& base, SweepParameter parameter,
                                const std::vector<std::string>& values, int workers = 0);

[[nodiscard]] int worker_count_from_env();

struct ComparisonReport {
  ClosedLoopResult sac;
  ClosedLoopResult lqr;
  RiccatiSolution riccati;
  double care_seconds = 0.0;
  double threshold = 0.0;  ///< absolute L2 error defining "acceptable"
  std::optional<double> sac_crossing;
  std::optional<double> lqr_crossing;
  double sac_mean_step_seconds = 0.0;
  double sac_max_step_seconds = 0.0;
  double lqr_mean_step_seconds = 0.0;
  std::uint64_t sac_disturbance_hash = 0;
  std::uint64_t lqr_disturbance_hash = 0;

  [[nodiscard]] bool same_disturbance() const {
    return sac_disturbance_hash == lqr_disturbance_hash;
  }
  /// SAC per-sample compute (mean) below the offline CARE time.
  [[nodiscard]] bool sac_online_cheaper() const { return sac_mean_step_seconds < care_seconds; }
};

/// First sampling instant with error <= threshold; nullopt if never reached.
[[nodiscard]] std::optional<double> crossing_time(const std::vector<double>& times,
                                                  const std::vector<double>& errors,
                                                  double threshold);

/// Runs SAC and LQR on the same plant, initial state, sampling and
/// disturbance draws. The LQR weights are the SAC stage-cost weights (W, R).
[[nodiscard]] ComparisonReport compare_sac_lqr(const ScenarioConfig& cfg);

[[nodiscard]] std::string to_string(SweepParameter parameter);
[[nodiscard]] SweepParameter parse_sweep_parameter(const std::string& text);

}  // namespace sacpde
