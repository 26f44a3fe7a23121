#include "sacpde/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <boost/math/constants/constants.hpp>

#include "sacpde/errors.hpp"

namespace sacpde {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

void require_interval(double a, double b, double length, const std::string& what) {
  require(a >= 0.0 && a < b && b <= length, what + " must satisfy 0 <= a < b <= L");
}

double parse_double(const std::string& text, const std::string& what) {
  size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || text.find_first_not_of(" \t", used) != std::string::npos) {
    throw ConfigError(what + ": '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

void ScenarioConfig::validate() const {
  require(plant.length > 0.0, "plant.length must be positive");
  require(plant.n_elements >= 2, "plant.elements must be at least 2");
  require(std::isfinite(plant.mu), "plant.mu must be finite");
  require(plant.beta > 0.0, "plant.beta must be positive");
  require(plant.y0_mode >= 1, "plant.y0_mode must be at least 1");
  require_interval(control.support.a, control.support.b, plant.length, "control support");
  require_interval(control.observation.a, control.observation.b, plant.length,
                   "observation window");
  require(control.observation.q_bar >= 0.0, "control.q_bar must be nonnegative");
  require(control.weight > 0.0, "control.weight must be positive");
  sac.validate();
  require(lqr.acceptable_error > 0.0 && lqr.acceptable_error <= 1.0,
          "lqr.acceptable_error must lie in (0, 1]");
  require(lqr.tolerance > 0.0, "lqr.tolerance must be positive");
  require(lqr.max_iterations >= 1, "lqr.max_iterations must be at least 1");
  require(duration > 0.0, "simulation.duration must be positive");
  (void)sampling_steps(duration, sac.sampling);
  require(disturbance.level >= 0.0 && disturbance.level < 1.0,
          "disturbance.level must lie in [0, 1)");
  if (disturbance.model_mu) {
    require(std::isfinite(*disturbance.model_mu), "disturbance.model_mu must be finite");
  }
  require(output.snapshot_stride >= 1, "output.snapshot_stride must be at least 1");
  if (sweep) require(!sweep->values.empty(), "sweep.values must not be empty");
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double perturb_mu(double mu_nominal, double level, Rng& rng) {
  const double xi = level * (2.0 * rng.uniform() - 1.0);
  return mu_nominal * (1.0 + xi);
}

std::vector<double> disturbance_sequence(double mu_nominal, double level, std::uint64_t seed,
                                         int steps) {
  Rng rng(seed);
  std::vector<double> out(static_cast<size_t>(std::max(steps, 0)));
  for (double& mu : out) mu = perturb_mu(mu_nominal, level, rng);
  return out;
}

std::uint64_t fnv1a64(const void* data, size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_sequence(const std::vector<double>& values) {
  return fnv1a64(values.data(), values.size() * sizeof(double));
}

ScenarioSetup prepare_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioSetup setup;
  const Mesh mesh = build_mesh(cfg.plant.length, cfg.plant.n_elements);
  setup.model = assemble_operators(mesh, cfg.model_mu(), cfg.plant.beta, cfg.control.support,
                                   cfg.control.observation, cfg.control.weight);
  const double amplitude = cfg.plant.y0_amplitude;
  const double wave = cfg.plant.y0_mode * kPi / cfg.plant.length;
  setup.y0 = project_initial(setup.model, [=](double x) { return amplitude * std::sin(wave * x); });
  setup.steps = sampling_steps(cfg.duration, cfg.sac.sampling);
  if (cfg.disturbance.level > 0.0 || cfg.model_mu() != cfg.plant.mu) {
    PlantDisturbance d;
    d.mu_per_step = disturbance_sequence(cfg.plant.mu, cfg.disturbance.level,
                                         cfg.disturbance.seed, setup.steps);
    setup.disturbance_hash = hash_sequence(d.mu_per_step);
    setup.disturbance = std::move(d);
  }
  return setup;
}

ClosedLoopResult run_scenario(const ScenarioConfig& cfg) {
  const ScenarioSetup setup = prepare_scenario(cfg);
  return run_receding_horizon(setup.model, setup.y0, cfg.sac, cfg.duration,
                              setup.disturbance ? &*setup.disturbance : nullptr);
}

double decay_rate_fit(const std::vector<double>& times, const std::vector<double>& errors,
                      double t_begin, double t_end) {
  if (times.size() != errors.size()) throw std::invalid_argument("series length mismatch");
  double n = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (t < t_begin - 1e-12 || t > t_end + 1e-12) continue;
    if (!(errors[i] > 0.0)) {
      throw std::invalid_argument("decay_rate_fit: non-positive error at t = " +
                                  std::to_string(t));
    }
    const double y = std::log(errors[i]);
    n += 1.0;
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  if (n < 2.0) throw std::invalid_argument("decay_rate_fit: fewer than two samples in window");
  return (n * sty - st * sy) / (n * stt - st * st);
}

std::string to_string(SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::kGamma:
      return "gamma";
    case SweepParameter::kHorizon:
      return "horizon";
    case SweepParameter::kObservation:
      return "observation";
  }
  return "gamma";
}

SweepParameter parse_sweep_parameter(const std::string& text) {
  if (text == "gamma") return SweepParameter::kGamma;
  if (text == "horizon") return SweepParameter::kHorizon;
  if (text == "observation") return SweepParameter::kObservation;
  throw ConfigError("sweep.parameter must be gamma, horizon or observation, got '" + text + "'");
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& base, SweepParameter parameter,
                                 const std::string& value) {
  ScenarioConfig cfg = base;
  cfg.sweep.reset();
  switch (parameter) {
    case SweepParameter::kGamma:
      cfg.sac.alpha = AlphaPolicy::proportional(parse_double(value, "sweep gamma"));
      break;
    case SweepParameter::kHorizon:
      cfg.sac.horizon = parse_double(value, "sweep horizon");
      break;
    case SweepParameter::kObservation: {
      const auto colon = value.find(':');
      if (colon == std::string::npos) {
        throw ConfigError("sweep observation value '" + value + "' must be written a:b");
      }
      cfg.control.observation.a = parse_double(value.substr(0, colon), "sweep observation");
      cfg.control.observation.b = parse_double(value.substr(colon + 1), "sweep observation");
      break;
    }
  }
  cfg.validate();
  return cfg;
}

int worker_count_from_env() {
  if (const char* env = std::getenv("SACPDE_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult sweep(const ScenarioConfig& base, SweepParameter parameter,
                  const std::vector<std::string>& values, int workers) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  SweepResult out;
  out.parameter = parameter;
  out.rows.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out.rows[i].label = values[i];
    out.rows[i].config = apply_sweep_value(base, parameter, values[i]);
    out.rows[i].failure = "not run";
  }

  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&]() {
    for (;;) {
      if (failed.load()) return;
      const size_t i = next.fetch_add(1);
      if (i >= out.rows.size()) return;
      SweepRow& row = out.rows[i];
      try {
        row.result = run_scenario(row.config);
        const auto& e = row.result.errors;
        row.final_error = e.back();
        row.min_error = *std::min_element(e.begin(), e.end());
        row.decay_rate = (e.front() > 0.0 && row.min_error > 0.0)
                             ? decay_rate_fit(row.result.times, e, 0.0, 0.5 * row.config.duration)
                             : 0.0;
        row.ok = true;
        row.failure.clear();
      } catch (const std::exception& ex) {
        row.failure = ex.what();
        failed.store(true);
      }
    }
  };

  const int n_workers =
      std::clamp(workers > 0 ? workers : worker_count_from_env(), 1, static_cast<int>(values.size()));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  out.partial = std::any_of(out.rows.begin(), out.rows.end(), [](const SweepRow& r) { return !r.ok; });
  return out;
}

std::optional<double> crossing_time(const std::vector<double>& times,
                                    const std::vector<double>& errors, double threshold) {
  for (size_t i = 0; i < times.size() && i < errors.size(); ++i) {
    if (errors[i] <= threshold) return times[i];
  }
  return std::nullopt;
}

ComparisonReport compare_sac_lqr(const ScenarioConfig& cfg) {
  const ScenarioSetup setup = prepare_scenario(cfg);
  const PlantDisturbance* disturbance = setup.disturbance ? &*setup.disturbance : nullptr;
  ComparisonReport report;

  report.sac = run_receding_horizon(setup.model, setup.y0, cfg.sac, cfg.duration, disturbance);

  CareOptions options;
  options.tolerance = cfg.lqr.tolerance;
  options.max_iterations = cfg.lqr.max_iterations;
  const auto start = std::chrono::steady_clock::now();
  report.riccati = solve_care(setup.model, options);
  const Matrix gain = lqr_gain(setup.model, report.riccati.P);
  report.care_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.lqr = run_lqr_closed_loop(setup.model, setup.y0, gain, cfg.duration, cfg.sac.sampling,
                                   cfg.sac.substeps, disturbance);
  report.lqr.offline_seconds = report.care_seconds;

  report.threshold = cfg.lqr.acceptable_error * report.sac.errors.front();
  report.sac_crossing = crossing_time(report.sac.times, report.sac.errors, report.threshold);
  report.lqr_crossing = crossing_time(report.lqr.times, report.lqr.errors, report.threshold);

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  report.sac_mean_step_seconds = mean(report.sac.compute_seconds);
  report.sac_max_step_seconds =
      report.sac.compute_seconds.empty()
          ? 0.0
          : *std::max_element(report.sac.compute_seconds.begin(), report.sac.compute_seconds.end());
  report.lqr_mean_step_seconds = mean(report.lqr.compute_seconds);
  report.sac_disturbance_hash = hash_sequence(report.sac.realized_mu);
  report.lqr_disturbance_hash = hash_sequence(report.lqr.realized_mu);
  return report;
}

}  // namespace sacpde
