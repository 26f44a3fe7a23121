#pragma once

#include <string>

#include "sacpde/experiments.hpp"

namespace sacpde {

/// Reads an INI-style scenario file. Sections: [plant], [control], [sac],
/// [lqr], [simulation], [disturbance], [output] and the optional [sweep].
/// Omitted keys keep their defaults. Errors (unknown section or key, bad
/// value, violated constraint) throw ConfigError naming file, line and key.
[[nodiscard]] ScenarioConfig parse_config(const std::string& path);
[[nodiscard]] ScenarioConfig parse_config_string(const std::string& text,
                                                 const std::string& source = "<config>");

/// Writes every field, numbers with 17 significant digits, so that
/// parse_config_string(emit_config(c)) == c.
[[nodiscard]] std::string emit_config(const ScenarioConfig& cfg);

/// Evaluates a product such as "1.35*pi^2", "pi^2/4" or "-0.5". Factors are
/// numbers or `pi`, optionally raised to a numeric power.
[[nodiscard]] double parse_number_expression(const std::string& text);

/// Formats a double with 17 significant digits.
[[nodiscard]] std::string format_double(double value);

}  // namespace sacpde
