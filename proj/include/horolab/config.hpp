#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "horolab/fuchsian.hpp"

namespace horolab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain `key = value` settings with `#` comments. Unknown keys are errors.
struct Config {
  std::string group_preset = "bolza";  // a preset name, or file:<path> for a generator file
  int ode_steps = 256;
  int shoot_restarts = 8;
  std::size_t max_ball_size = 1000000;
  double tol_eq = 1e-9;
  double tol_det = 1e-12;
  double ode_tol = 1e-11;
  double xcheck_tol = 1e-9;
  std::uint64_t seed = 1;

  /// Sets one key from its text form; ConfigError names the key on failure.
  void set(const std::string& key, const std::string& value);
  /// All tolerances positive, counts positive.
  void validate() const;

  MetricOptions metric_options() const;
  FuchsianOptions fuchsian_options() const;
  Tolerances tolerances() const;
  FuchsianGroup make_group() const;

  /// Every key, full precision; parse(dump()) reproduces the settings.
  std::string dump() const;
  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config load_file(const std::string& path);
};

/// Environment variable naming the config file when --config is absent.
inline constexpr const char* kConfigEnv = "HOROLAB_CONFIG";

}  // namespace horolab
