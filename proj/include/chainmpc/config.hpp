#pragma once

#include "chainmpc/monte_carlo.hpp"

#include <stdexcept>
#include <string>

namespace chainmpc {

/// Invalid or unknown configuration entry; the message names the key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything one run needs. Defaults give the standard ellipse scenario.
struct RunConfig {
  SimConfig sim;
  McConfig mc;
  /// Grid of the exported dense reference.
  double reference_dt{0.005};
  std::string output_dir{"out"};
};

RunConfig default_config();

/// Merges a JSON document over the defaults. Unknown keys and wrong types throw ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Full JSON document for a configuration (angles in degrees).
std::string dump_config(const RunConfig& cfg);

/// Cross-field checks; throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace chainmpc
