#include "sacpde/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "sacpde/config.hpp"
#include "sacpde/errors.hpp"
#include "sacpde/evolution.hpp"
#include "sacpde/lqr.hpp"

namespace sacpde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

// Run manifest: written with status "running" before any output and
// rewritten with hashes of every emitted file when the command ends.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command, const CommandOptions& options)
      : dir_(std::move(dir)) {
    doc_["tool"] = "sacpde";
    doc_["version"] = kToolVersion;
    doc_["command"] = std::move(command);
    doc_["config_path"] = options.config_path;
    doc_["status"] = "running";
    doc_["partial"] = false;
    doc_["outputs"] = json::array();
  }

  void set_config(const ScenarioConfig& cfg) {
    doc_["seed"] = cfg.disturbance.seed;
    doc_["config"] = emit_config(cfg);
  }

  void add_output(const std::string& name) { files_.push_back(name); }
  void set_partial() { doc_["partial"] = true; }

  void write() const {
    std::ofstream out(dir_ / "manifest.json");
    out << doc_.dump(2) << '\n';
  }

  void finalize(const std::string& status, const std::string& error = "") {
    doc_["status"] = status;
    if (!error.empty()) doc_["error"] = error;
    if (status != "ok") doc_["partial"] = true;
    json outputs = json::array();
    for (const auto& name : files_) {
      const fs::path p = dir_ / name;
      if (!fs::exists(p)) continue;
      outputs.push_back({{"file", name}, {"fnv1a64", file_hash(p)}});
    }
    doc_["outputs"] = outputs;
    write();
  }

 private:
  fs::path dir_;
  json doc_;
  std::vector<std::string> files_;
};

class Csv {
 public:
  Csv(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << '\n';
  }
  template <typename... Ts>
  void row(Ts... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << format_double(values), first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct Context {
  const CommandOptions& options;
  Manifest& manifest;
  std::ostream& out;

  fs::path path(const std::string& name) const {
    manifest.add_output(name);
    return options.output_dir / name;
  }
  void say(const std::string& line) const {
    if (!options.quiet) out << line << '\n';
  }
};

void write_error_series(const Context& ctx, const std::string& name,
                        const std::vector<double>& times, const std::vector<double>& errors) {
  Csv csv(ctx.path(name), "t,error");
  for (size_t i = 0; i < times.size(); ++i) csv.row(times[i], errors[i]);
}

void write_closed_loop(const Context& ctx, const ScenarioConfig& cfg, const FemOperators& ops,
                       const ClosedLoopResult& r, const std::string& prefix) {
  const int stride = cfg.output.snapshot_stride;
  if (cfg.output.error) {
    write_error_series(ctx, prefix + "error.csv", r.times, r.errors);
    write_error_series(ctx, prefix + "fine_error.csv", r.fine_times, r.fine_errors);
  }
  if (cfg.output.cost) {
    Csv csv(ctx.path(prefix + "cost.csv"), "t,predicted_cost,alpha_d");
    for (size_t k = 0; k < r.num_steps(); ++k) csv.row(r.times[k], r.costs[k], r.alphas[k]);
    // wall-clock data lives in its own file so the other CSVs stay reproducible
    Csv timing(ctx.path(prefix + "timing.csv"), "t,compute_seconds");
    for (size_t k = 0; k < r.num_steps(); ++k) timing.row(r.times[k], r.compute_seconds[k]);
  }
  if (cfg.output.control) {
    Csv csv(ctx.path(prefix + "control.csv"), "t,x,u");
    const Vector mid = ops.mesh.element_midpoints();
    for (size_t k = 0; k < r.num_steps(); k += static_cast<size_t>(stride)) {
      for (Eigen::Index e = 0; e < mid.size(); ++e) csv.row(r.times[k], mid[e], r.controls[k][e]);
    }
  }
  if (cfg.output.state) {
    Csv csv(ctx.path(prefix + "state.csv"), "t,x,y");
    const auto& nodes = ops.mesh.nodes();
    for (size_t k = 0; k < r.states.size(); k += static_cast<size_t>(stride)) {
      const Vector& y = r.states[k];
      for (size_t i = 0; i < nodes.size(); ++i) {
        const bool boundary = i == 0 || i + 1 == nodes.size();
        csv.row(r.times[k], nodes[i], boundary ? 0.0 : y[static_cast<Eigen::Index>(i) - 1]);
      }
    }
  }
}

void write_plot_script(const Context& ctx, const std::string& prefix, bool lqr) {
  std::ofstream gp(ctx.path(prefix + "plot.gp"));
  gp << "# gnuplot script: gnuplot " << prefix << "plot.gp\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output '" << prefix << "error.png'\n"
     << "set logscale y\nset xlabel 't'\nset ylabel 'L2 error'\n";
  if (lqr) {
    gp << "plot 'comparison.csv' using 1:2 skip 1 with lines title 'SAC', \\\n"
       << "     'comparison.csv' using 1:3 skip 1 with lines title 'LQR'\n";
    return;
  }
  gp << "plot '" << prefix << "fine_error.csv' using 1:2 skip 1 with lines title 'L2 error'\n"
     << "unset logscale y\nset xlabel 't'\nset ylabel 'x'\n"
     << "set output '" << prefix << "state.png'\nset zlabel 'y'\n"
     << "splot '" << prefix
     << "state.csv' using 1:2:3 skip 1 with points pt 7 ps 0.3 palette title 'state'\n"
     << "set output '" << prefix << "control.png'\nset zlabel 'u'\n"
     << "splot '" << prefix
     << "control.csv' using 1:2:3 skip 1 with points pt 7 ps 0.3 palette title 'control'\n";
}

double safe_decay_rate(const ClosedLoopResult& r, double t_end) {
  try {
    return decay_rate_fit(r.times, r.errors, 0.0, t_end);
  } catch (const std::invalid_argument&) {
    return 0.0;
  }
}

void cmd_simulate(const ScenarioConfig& cfg, const Context& ctx) {
  const ScenarioSetup setup = prepare_scenario(cfg);
  const ClosedLoopResult r = run_receding_horizon(
      setup.model, setup.y0, cfg.sac, cfg.duration, setup.disturbance ? &*setup.disturbance : nullptr);
  write_closed_loop(ctx, cfg, setup.model, r, "");
  if (cfg.output.plot_script) write_plot_script(ctx, "", false);

  const double min_error = *std::min_element(r.errors.begin(), r.errors.end());
  double mean_compute = 0.0;
  for (double s : r.compute_seconds) mean_compute += s;
  mean_compute /= std::max<size_t>(1, r.compute_seconds.size());
  std::ofstream summary(ctx.path("summary.txt"));
  summary << "steps: " << r.num_steps() << '\n'
          << "initial_error: " << format_double(r.errors.front()) << '\n'
          << "final_error: " << format_double(r.errors.back()) << '\n'
          << "min_error: " << format_double(min_error) << '\n'
          << "decay_rate_first_half: " << format_double(safe_decay_rate(r, 0.5 * cfg.duration))
          << '\n'
          << "nonmonotone_steps: " << r.nonmonotone_steps << '\n'
          << "uncertified_durations: " << r.uncertified_durations << '\n'
          << "mean_step_seconds: " << format_double(mean_compute) << '\n'
          << "disturbance_fnv1a64: " << hex64(setup.disturbance_hash) << '\n';
  ctx.say("simulate: " + std::to_string(r.num_steps()) + " steps, error " +
          format_double(r.errors.front()) + " -> " + format_double(r.errors.back()));
  if (r.nonmonotone_steps > 0) {
    ctx.say("warning: " + std::to_string(r.nonmonotone_steps) +
            " steps did not lower the predicted cost");
  }
}

void cmd_sweep(const ScenarioConfig& cfg, const Context& ctx) {
  if (!cfg.sweep) throw ConfigError("sweep needs a [sweep] section with parameter and values");
  const SweepResult result = sweep(cfg, cfg.sweep->parameter, cfg.sweep->values);
  std::ofstream summary(ctx.path("sweep_summary.csv"));
  summary << "index,parameter,value,final_error,min_error,decay_rate,ok\n";
  for (size_t i = 0; i < result.rows.size(); ++i) {
    const SweepRow& row = result.rows[i];
    if (row.ok) {
      write_error_series(ctx, "sweep_" + std::to_string(i) + "_error.csv", row.result.times,
                         row.result.errors);
    }
    summary << i << ',' << to_string(result.parameter) << ',' << row.label << ','
            << format_double(row.final_error) << ',' << format_double(row.min_error) << ','
            << format_double(row.decay_rate) << ',' << (row.ok ? 1 : 0) << '\n';
  }
  summary.close();
  if (result.partial) {
    ctx.manifest.set_partial();
    for (const SweepRow& row : result.rows) {
      if (!row.ok && row.failure != "not run") throw NumericalError("sweep value " + row.label +
                                                                    " failed: " + row.failure);
    }
  }
  ctx.say("sweep: " + std::to_string(result.rows.size()) + " scenarios over " +
          to_string(result.parameter));
}

void cmd_compare(const ScenarioConfig& cfg, const Context& ctx) {
  const ComparisonReport rep = compare_sac_lqr(cfg);
  {
    Csv csv(ctx.path("comparison.csv"), "t,sac_error,lqr_error");
    for (size_t i = 0; i < rep.sac.times.size(); ++i) {
      csv.row(rep.sac.times[i], rep.sac.errors[i], rep.lqr.errors[i]);
    }
  }
  if (cfg.output.plot_script) write_plot_script(ctx, "comparison_", true);
  auto crossing = [](const std::optional<double>& t) {
    return t ? format_double(*t) : std::string("never");
  };
  std::ostringstream text;
  text << "acceptable_error: " << format_double(rep.threshold) << '\n'
       << "sac_crossing_time: " << crossing(rep.sac_crossing) << '\n'
       << "lqr_crossing_time: " << crossing(rep.lqr_crossing) << '\n'
       << "sac_final_error: " << format_double(rep.sac.errors.back()) << '\n'
       << "lqr_final_error: " << format_double(rep.lqr.errors.back()) << '\n'
       << "care_seconds: " << format_double(rep.care_seconds) << '\n'
       << "care_iterations: " << rep.riccati.iterations << '\n'
       << "care_residual: " << format_double(rep.riccati.residual) << '\n'
       << "sac_mean_step_seconds: " << format_double(rep.sac_mean_step_seconds) << '\n'
       << "sac_max_step_seconds: " << format_double(rep.sac_max_step_seconds) << '\n'
       << "lqr_mean_step_seconds: " << format_double(rep.lqr_mean_step_seconds) << '\n'
       << "sac_online_cheaper_than_care: " << (rep.sac_online_cheaper() ? "yes" : "no") << '\n'
       << "same_disturbance: " << (rep.same_disturbance() ? "yes" : "no") << '\n'
       << "disturbance_fnv1a64: " << hex64(rep.sac_disturbance_hash) << '\n'
       << "lqr_gain: K = R^{-1} B^T M^{-1} P, u = -K y(t_k) held over each sample\n";
  std::ofstream(ctx.path("comparison_summary.txt")) << text.str();
  if (!ctx.options.quiet) ctx.out << text.str();
  if (!rep.same_disturbance()) throw NumericalError("SAC and LQR saw different disturbances");
}

void cmd_analyze(const ScenarioConfig& cfg, const Context& ctx) {
  const AnalysisReport report = analyze(cfg);
  const std::string text = format_analysis(report);
  std::ofstream(ctx.path("stability_report.txt")) << text;
  if (!ctx.options.quiet) ctx.out << text;
}

int cmd_gradient_check(const ScenarioConfig& cfg, const Context& ctx) {
  const auto rows = gradient_check(cfg);
  Csv csv(ctx.path("gradient_check.csv"), "tau,analytic,finite_difference,relative_error");
  double worst = 0.0;
  for (const auto& r : rows) {
    csv.row(r.tau, r.analytic, r.finite_difference, r.relative_error);
    worst = std::max(worst, r.relative_error);
    ctx.say("tau " + format_double(r.tau) + ": analytic " + format_double(r.analytic) +
            ", finite difference " + format_double(r.finite_difference) + ", relative error " +
            format_double(r.relative_error));
  }
  ctx.say("max relative error: " + format_double(worst));
  return worst < 1e-3 ? 0 : 3;
}

}  // namespace

std::vector<GradientCheckRow> gradient_check(const ScenarioConfig& cfg,
                                             const GradientCheckOptions& options) {
  if (options.points < 1 || !(options.lambda > 0.0) || options.refinement < 1) {
    throw ConfigError("gradient check needs points >= 1, lambda > 0 and refinement >= 1");
  }
  const ScenarioSetup setup = prepare_scenario(cfg);
  const FemOperators& ops = setup.model;
  const int n_steps = cfg.sac.horizon_steps() * options.refinement;
  const double dt = cfg.sac.dt() / options.refinement;
  const HorizonGrid grid(0.0, n_steps * dt, n_steps);
  const ImplicitEuler stepper(ops, dt);
  const ControlSignal u1 = ControlSignal::zeros(grid, ops.control_dim());
  const Trajectory forward = solve_forward(stepper, setup.y0, grid);
  const double alpha_d = choose_alpha_d(cfg.sac.alpha, stage_cost(ops, forward));
  const Trajectory adjoint = solve_adjoint(ops, stepper, forward);

  std::vector<GradientCheckRow> rows;
  for (int i = 0; i < options.points; ++i) {
    const double raw = grid.horizon * (i + 0.5) / options.points;
    const int k = std::clamp(static_cast<int>(std::lround(raw / dt)), 1, n_steps - 1);
    GradientCheckRow row;
    row.tau = grid.time(k);
    const Vector& p = adjoint.states[static_cast<size_t>(k)];
    const Vector zero = Vector::Zero(ops.control_dim());
    const Vector v = alpha_d == 0.0 ? zero : sac_action_at(ops, p, zero, alpha_d);
    row.analytic = mode_insertion_gradient(ops, p, zero, v);
    auto quotient = [&](double lambda) {
      const NeedleProbe probe = needle_variation_probe(ops, setup.y0, u1, row.tau, v, lambda, grid);
      return (probe.perturbed_cost - probe.reference_cost) / lambda;
    };
    row.finite_difference = 2.0 * quotient(0.5 * options.lambda) - quotient(options.lambda);
    const double scale = std::max(std::abs(row.analytic), 1e-300);
    row.relative_error =
        row.analytic == 0.0 && row.finite_difference == 0.0
            ? 0.0
            : std::abs(row.finite_difference - row.analytic) / scale;
    rows.push_back(row);
  }
  return rows;
}

AnalysisReport analyze(const ScenarioConfig& cfg, int k_max) {
  const ScenarioSetup setup = prepare_scenario(cfg);
  const FemOperators& ops = setup.model;
  if (!ops.full_control() || !ops.full_observation()) {
    throw ConfigError(
        "the modal stability analysis needs control and observation on the full domain");
  }
  AnalysisReport report;
  const double amplitude = cfg.plant.y0_amplitude;
  const double wave = cfg.plant.y0_mode * 3.14159265358979323846 / cfg.plant.length;
  report.spectrum = mode_coefficients([=](double x) { return amplitude * std::sin(wave * x); },
                                      dirichlet_eigenpairs(cfg.plant.length, ops.mu, k_max));
  report.stability =
      stability_threshold(report.spectrum, cfg.plant.beta, cfg.control.observation.q_bar,
                          cfg.sac.horizon);
  const HorizonGrid grid(0.0, cfg.sac.horizon_steps() * cfg.sac.dt(), cfg.sac.horizon_steps());
  report.initial_cost = stage_cost(ops, solve_forward(ImplicitEuler(ops, grid.dt()), setup.y0, grid));
  report.initial_alpha_d = choose_alpha_d(cfg.sac.alpha, report.initial_cost);
  return report;
}

std::string format_analysis(const AnalysisReport& report) {
  const StabilityReport& s = report.stability;
  std::ostringstream out;
  out << "mu: " << format_double(report.spectrum.mu) << '\n'
      << "beta: " << format_double(s.beta) << '\n'
      << "q_bar: " << format_double(s.q_bar) << '\n'
      << "horizon: " << format_double(s.horizon) << '\n'
      << "modes: " << report.spectrum.k_max() << '\n'
      << "unstable_modes: " << s.unstable.size() << '\n'
      << "margin_C: " << format_double(s.margin) << '\n'
      << "alpha_bar: " << format_double(s.alpha_bar) << '\n'
      << "alpha_boundary_r_equals_C: " << format_double(s.alpha_boundary) << '\n'
      << "initial_J1: " << format_double(report.initial_cost) << '\n'
      << "initial_alpha_d: " << format_double(report.initial_alpha_d) << '\n';
  out << "\nk,delta_k,chi_k,fbar_k,rate_at_alpha_bar\n";
  const int shown = std::min(report.spectrum.k_max(), 8);
  for (int i = 0; i < shown; ++i) {
    const Mode& m = report.spectrum.modes[static_cast<size_t>(i)];
    out << m.k << ',' << format_double(m.delta) << ',' << format_double(m.chi) << ','
        << format_double(fbar_eigenvalue(m.delta, s.q_bar, s.horizon)) << ','
        << format_double(closed_loop_rate(m.delta, s.alpha_bar, s.beta, s.q_bar, s.horizon))
        << '\n';
  }
  out << "\nalpha_d,max_rate,verdict\n";
  std::vector<double> candidates;
  if (s.alpha_bar < 0.0) {
    candidates = {s.alpha_bar, 2.0 * s.alpha_bar, 0.1 * s.alpha_bar, s.alpha_boundary};
  } else {
    candidates = {-1e-3};
  }
  if (report.initial_alpha_d < 0.0) candidates.push_back(report.initial_alpha_d);
  for (double a : candidates) {
    out << format_double(a) << ',' << format_double(s.max_rate(a)) << ','
        << (s.stable(a) ? "stable" : "unstable") << '\n';
  }
  return out.str();
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err) {
  static const std::vector<std::string> kCommands = {"simulate", "sweep", "compare", "analyze",
                                                     "gradient_check"};
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    err << "unknown command '" << command << "'\n";
    return 2;
  }
  std::error_code ec;
  fs::create_directories(options.output_dir, ec);
  if (ec) {
    err << "cannot create output directory " << options.output_dir << ": " << ec.message() << '\n';
    return 2;
  }
  Manifest manifest(options.output_dir, command, options);
  const Context ctx{options, manifest, out};
  int code = 0;
  try {
    ScenarioConfig cfg =
        options.config_path.empty() ? ScenarioConfig{} : parse_config(options.config_path);
    if (options.seed) cfg.disturbance.seed = *options.seed;
    cfg.validate();
    manifest.set_config(cfg);
    manifest.write();
    if (command == "simulate") {
      cmd_simulate(cfg, ctx);
    } else if (command == "sweep") {
      cmd_sweep(cfg, ctx);
    } else if (command == "compare") {
      cmd_compare(cfg, ctx);
    } else if (command == "analyze") {
      cmd_analyze(cfg, ctx);
    } else {
      code = cmd_gradient_check(cfg, ctx);
    }
    manifest.finalize(code == 0 ? "ok" : "check_failed");
    return code;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    manifest.finalize("failed", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << '\n';
    manifest.finalize("failed", e.what());
    return 2;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    manifest.finalize("failed", e.what());
    return 3;
  }
}

}  // namespace sacpde
