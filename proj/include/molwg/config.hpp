#pragma once

// Experiment configuration: an INI file with one section per concern.
// Numeric values may carry an uncertainty as "value +- sigma".

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "molwg/budget.hpp"
#include "molwg/coupling.hpp"
#include "molwg/photostats.hpp"

namespace molwg::config {

/// All validation problems found in a configuration, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct DetectionConfig {
  double efficiency = 1.0;
  double background_hz = 0.0;
  /// When in (0, 1], overrides background_hz so that S/(S+B) equals it.
  double signal_fraction = 0.0;
  double dead_time_ns = 0.0;
  double bin_width_ps = 500.0;
  double window_ns = 60.0;
  std::string timetag_format = "binary";  ///< binary | csv
};

struct ExperimentConfig {
  coupling::DeviceModel device_model;  ///< geometry, wavelength, dipole orientation, grid
  std::size_t max_modes = 4;
  double dy_nm = 10.0;                 ///< dipole height above the ridge top
  double numerical_aperture = 0.6;
  stratified::Hemisphere collection_side = stratified::Hemisphere::Up;

  photostats::EmitterParams emitter;
  double duration_ns = 1e7;
  DetectionConfig detection;

  budget::EfficiencyBudget device;
  budget::SaturationProfile best_device;

  std::vector<double> sweep_dy_nm{10, 20, 30, 40, 50, 60, 70, 80, 90};
  std::vector<double> sweep_h_nm{50, 100, 150, 200};

  std::map<std::string, std::uint64_t> seeds{{"emitter", 1}, {"detection", 2}, {"split", 3}};
  std::string output_dir = "out";

  std::string source_text;  ///< raw file contents, for the digest
  std::vector<std::string> warnings;
};

/// Parses and validates. Unknown keys are warnings, or errors when strict.
/// Throws ConfigError listing every problem.
ExperimentConfig parse_config_text(const std::string& text, bool strict = false);
ExperimentConfig parse_config(const std::string& path, bool strict = false);

/// "value", "value +- sigma" or "value ± sigma".
std::pair<double, double> parse_value(const std::string& text);

}  // namespace molwg::config
