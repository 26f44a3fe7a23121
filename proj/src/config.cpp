#include "sacpde/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/math/constants/constants.hpp>

#include "sacpde/errors.hpp"

namespace sacpde {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

double parse_factor(const std::string& token) {
  const std::string t = boost::algorithm::trim_copy(token);
  if (t.empty()) throw std::invalid_argument("empty factor");
  const auto caret = t.find('^');
  if (caret != std::string::npos) {
    const double base = parse_factor(t.substr(0, caret));
    const double power = parse_factor(t.substr(caret + 1));
    return std::pow(base, power);
  }
  if (t == "pi") return kPi;
  if (t == "-pi") return -kPi;
  size_t used = 0;
  const double value = std::stod(t, &used);
  if (used != t.size()) throw std::invalid_argument("trailing characters");
  return value;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
 public:
  Reader(std::string source, std::map<std::string, Entry> entries)
      : source_(std::move(source)), entries_(std::move(entries)) {}

  [[noreturn]] void fail(const std::string& key, int line, const std::string& message) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + key + ": " + message);
  }

  // Calls `apply` with the raw value if the key is present; any exception from
  // `apply` is reported against the key's line.
  void with(const std::string& key, const std::function<void(const std::string&)>& apply) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return;
    used_.insert(key);
    try {
      apply(it->second.value);
    } catch (const ConfigError& e) {
      fail(key, it->second.line, e.what());
    } catch (const std::exception&) {
      fail(key, it->second.line, "cannot parse '" + it->second.value + "'");
    }
  }

  void number(const std::string& key, double& out,
              const std::function<bool(double)>& ok = nullptr, const char* rule = "") {
    with(key, [&](const std::string& v) {
      const double x = parse_number_expression(v);
      if (!std::isfinite(x)) throw ConfigError("value must be finite");
      if (ok && !ok(x)) throw ConfigError(rule);
      out = x;
    });
  }

  void integer(const std::string& key, int& out, int minimum) {
    with(key, [&](const std::string& v) {
      size_t used = 0;
      const long x = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument("not an integer");
      if (x < minimum) throw ConfigError("must be at least " + std::to_string(minimum));
      out = static_cast<int>(x);
    });
  }

  void boolean(const std::string& key, bool& out) {
    with(key, [&](const std::string& v) {
      const std::string t = boost::algorithm::to_lower_copy(v);
      if (t == "true" || t == "yes" || t == "1" || t == "on") {
        out = true;
      } else if (t == "false" || t == "no" || t == "0" || t == "off") {
        out = false;
      } else {
        throw ConfigError("expected true or false, got '" + v + "'");
      }
    });
  }

  [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) > 0; }
  [[nodiscard]] int line(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  void reject_unused() const {
    for (const auto& [key, entry] : entries_) {
      if (!used_.count(key)) fail(key, entry.line, "unknown key");
    }
  }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

auto positive = [](double x) { return x > 0.0; };
auto nonnegative = [](double x) { return x >= 0.0; };

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_number_expression(const std::string& text) {
  const std::string t = boost::algorithm::trim_copy(text);
  if (t.empty()) throw ConfigError("empty number");
  // split on '*' and '/' while keeping exponents like 1e-3 intact
  double value = 1.0;
  char op = '*';
  size_t start = 0;
  for (size_t i = 0; i <= t.size(); ++i) {
    const bool end = i == t.size();
    if (!end && t[i] != '*' && t[i] != '/') continue;
    double factor = 0.0;
    try {
      factor = parse_factor(t.substr(start, i - start));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse '" + t + "' as a number");
    }
    value = op == '*' ? value * factor : value / factor;
    if (!end) op = t[i];
    start = i + 1;
  }
  return value;
}

ScenarioConfig parse_config_string(const std::string& text, const std::string& source) {
  static const std::set<std::string> kSections = {"plant",       "control", "sac",    "lqr",
                                                  "simulation", "disturbance", "output", "sweep"};
  std::map<std::string, Entry> entries;
  std::set<std::string> seen_sections;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = boost::algorithm::trim_copy(line.substr(1, line.size() - 2));
      if (!kSections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      seen_sections.insert(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a section");
    const std::string key = section + "." + boost::algorithm::trim_copy(line.substr(0, eq));
    const std::string value = boost::algorithm::trim_copy(line.substr(eq + 1));
    if (entries.count(key)) throw ConfigError(where + key + ": duplicate key");
    entries[key] = Entry{value, line_no};
  }

  ScenarioConfig cfg;
  Reader r(source, std::move(entries));

  r.number("plant.length", cfg.plant.length, positive, "must be positive");
  r.integer("plant.elements", cfg.plant.n_elements, 2);
  r.number("plant.mu", cfg.plant.mu);
  r.number("plant.beta", cfg.plant.beta, positive, "must be positive");
  r.number("plant.y0_amplitude", cfg.plant.y0_amplitude);
  r.integer("plant.y0_mode", cfg.plant.y0_mode, 1);

  r.number("control.support_a", cfg.control.support.a, nonnegative, "must be nonnegative");
  r.number("control.support_b", cfg.control.support.b, positive, "must be positive");
  r.number("control.observation_a", cfg.control.observation.a, nonnegative,
           "must be nonnegative");
  r.number("control.observation_b", cfg.control.observation.b, positive, "must be positive");
  r.number("control.q_bar", cfg.control.observation.q_bar, nonnegative, "must be nonnegative");
  r.number("control.weight", cfg.control.weight, positive, "must be positive");

  r.number("sac.horizon", cfg.sac.horizon, positive, "must be positive");
  r.number("sac.sampling", cfg.sac.sampling, positive, "must be positive");
  r.integer("sac.substeps", cfg.sac.substeps, 1);
  if (r.has("sac.gamma") && r.has("sac.alpha_d")) {
    r.fail("sac.alpha_d", r.line("sac.alpha_d"), "gamma and alpha_d are mutually exclusive");
  }
  r.with("sac.gamma", [&](const std::string& v) {
    const double g = parse_number_expression(v);
    if (!(g < 0.0)) throw ConfigError("gamma must be negative");
    cfg.sac.alpha = AlphaPolicy::proportional(g);
  });
  r.with("sac.alpha_d", [&](const std::string& v) {
    const double a = parse_number_expression(v);
    if (!(a < 0.0)) throw ConfigError("alpha_d must be negative");
    cfg.sac.alpha = AlphaPolicy::fixed(a);
  });
  r.with("sac.duration_policy", [&](const std::string& v) {
    if (v == "fixed") {
      cfg.sac.duration.kind = DurationPolicy::Kind::kFixed;
    } else if (v == "line_search") {
      cfg.sac.duration.kind = DurationPolicy::Kind::kLineSearch;
    } else {
      throw ConfigError("expected fixed or line_search, got '" + v + "'");
    }
  });
  r.number("sac.max_duration", cfg.sac.duration.max_duration, positive, "must be positive");
  r.number("sac.shrink", cfg.sac.duration.shrink, [](double x) { return x > 0.0 && x < 1.0; },
           "must lie in (0, 1)");
  r.integer("sac.max_trials", cfg.sac.duration.max_trials, 1);
  r.with("sac.application_time", [&](const std::string& v) {
    if (v == "first_sample") {
      cfg.sac.application_time = ApplicationTimePolicy::kFirstSample;
    } else if (v == "min_gradient") {
      cfg.sac.application_time = ApplicationTimePolicy::kMinGradient;
    } else {
      throw ConfigError("expected first_sample or min_gradient, got '" + v + "'");
    }
  });
  if (r.has("sac.saturation_lower") != r.has("sac.saturation_upper")) {
    const std::string key = r.has("sac.saturation_lower") ? "sac.saturation_lower"
                                                          : "sac.saturation_upper";
    r.fail(key, r.line(key), "saturation needs both saturation_lower and saturation_upper");
  }
  if (r.has("sac.saturation_lower")) {
    Saturation sat;
    r.number("sac.saturation_lower", sat.lower);
    r.number("sac.saturation_upper", sat.upper);
    if (!(sat.lower < sat.upper)) {
      r.fail("sac.saturation_upper", r.line("sac.saturation_upper"),
             "must exceed saturation_lower");
    }
    cfg.sac.saturation = sat;
  }
  r.number("sac.t_calc", cfg.sac.t_calc, nonnegative, "must be nonnegative");

  r.number("lqr.acceptable_error", cfg.lqr.acceptable_error,
           [](double x) { return x > 0.0 && x <= 1.0; }, "must lie in (0, 1]");
  r.number("lqr.tolerance", cfg.lqr.tolerance, positive, "must be positive");
  r.integer("lqr.max_iterations", cfg.lqr.max_iterations, 1);

  r.number("simulation.duration", cfg.duration, positive, "must be positive");

  r.number("disturbance.level", cfg.disturbance.level,
           [](double x) { return x >= 0.0 && x < 1.0; }, "must lie in [0, 1)");
  r.with("disturbance.seed", [&](const std::string& v) {
    size_t used = 0;
    const unsigned long long s = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument("seed");
    cfg.disturbance.seed = s;
  });
  r.with("disturbance.model_mu", [&](const std::string& v) {
    const double m = parse_number_expression(v);
    if (!std::isfinite(m)) throw ConfigError("value must be finite");
    cfg.disturbance.model_mu = m;
  });

  r.boolean("output.error", cfg.output.error);
  r.boolean("output.cost", cfg.output.cost);
  r.boolean("output.control", cfg.output.control);
  r.boolean("output.state", cfg.output.state);
  r.boolean("output.plot_script", cfg.output.plot_script);
  r.integer("output.snapshot_stride", cfg.output.snapshot_stride, 1);

  if (seen_sections.count("sweep")) {
    SweepConfig sw;
    r.with("sweep.parameter",
           [&](const std::string& v) { sw.parameter = parse_sweep_parameter(v); });
    r.with("sweep.values", [&](const std::string& v) {
      std::vector<std::string> parts;
      boost::algorithm::split(parts, v, boost::algorithm::is_any_of(","));
      for (auto& p : parts) {
        boost::algorithm::trim(p);
        if (p.empty()) throw ConfigError("empty sweep value");
        sw.values.push_back(p);
      }
    });
    if (sw.values.empty()) throw ConfigError(source + ": sweep.values: missing or empty");
    cfg.sweep = sw;
  }

  r.reject_unused();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_string(buffer.str(), path);
}

std::string emit_config(const ScenarioConfig& cfg) {
  std::ostringstream out;
  auto num = [&](const char* key, double v) { out << key << " = " << format_double(v) << '\n'; };
  auto flag = [&](const char* key, bool v) { out << key << " = " << (v ? "true" : "false") << '\n'; };

  out << "[plant]\n";
  num("length", cfg.plant.length);
  out << "elements = " << cfg.plant.n_elements << '\n';
  num("mu", cfg.plant.mu);
  num("beta", cfg.plant.beta);
  num("y0_amplitude", cfg.plant.y0_amplitude);
  out << "y0_mode = " << cfg.plant.y0_mode << "\n\n";

  out << "[control]\n";
  num("support_a", cfg.control.support.a);
  num("support_b", cfg.control.support.b);
  num("observation_a", cfg.control.observation.a);
  num("observation_b", cfg.control.observation.b);
  num("q_bar", cfg.control.observation.q_bar);
  num("weight", cfg.control.weight);
  out << '\n';

  out << "[sac]\n";
  num("horizon", cfg.sac.horizon);
  num("sampling", cfg.sac.sampling);
  out << "substeps = " << cfg.sac.substeps << '\n';
  num(cfg.sac.alpha.kind == AlphaPolicy::Kind::kProportional ? "gamma" : "alpha_d",
      cfg.sac.alpha.value);
  out << "duration_policy = "
      << (cfg.sac.duration.kind == DurationPolicy::Kind::kFixed ? "fixed" : "line_search")
      << '\n';
  num("max_duration", cfg.sac.duration.max_duration);
  num("shrink", cfg.sac.duration.shrink);
  out << "max_trials = " << cfg.sac.duration.max_trials << '\n';
  out << "application_time = "
      << (cfg.sac.application_time == ApplicationTimePolicy::kFirstSample ? "first_sample"
                                                                           : "min_gradient")
      << '\n';
  if (cfg.sac.saturation) {
    num("saturation_lower", cfg.sac.saturation->lower);
    num("saturation_upper", cfg.sac.saturation->upper);
  }
  num("t_calc", cfg.sac.t_calc);
  out << '\n';

  out << "[lqr]\n";
  num("acceptable_error", cfg.lqr.acceptable_error);
  num("tolerance", cfg.lqr.tolerance);
  out << "max_iterations = " << cfg.lqr.max_iterations << "\n\n";

  out << "[simulation]\n";
  num("duration", cfg.duration);
  out << '\n';

  out << "[disturbance]\n";
  num("level", cfg.disturbance.level);
  out << "seed = " << cfg.disturbance.seed << '\n';
  if (cfg.disturbance.model_mu) num("model_mu", *cfg.disturbance.model_mu);
  out << '\n';

  out << "[output]\n";
  flag("error", cfg.output.error);
  flag("cost", cfg.output.cost);
  flag("control", cfg.output.control);
  flag("state", cfg.output.state);
  flag("plot_script", cfg.output.plot_script);
  out << "snapshot_stride = " << cfg.output.snapshot_stride << '\n';

  if (cfg.sweep) {
    out << "\n[sweep]\n";
    out << "parameter = " << to_string(cfg.sweep->parameter) << '\n';
    out << "values = " << boost::algorithm::join(cfg.sweep->values, ", ") << '\n';
  }
  return out.str();
}

}  // namespace sacpde
