#pragma once

#include "biascal/calibration.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace biascal {

struct BandGrid {
  Points x;
  Points eta;  // zero columns unless the run is extended
};

struct PreparedRun {
  nlohmann::ordered_json config;  // the configuration as read
  CalibrationConfig calibration;
  std::unique_ptr<ForwardModel> model;
  Dataset data;
  BandGrid grid;
  std::filesystem::path output_dir;
};

// Builds everything a run needs; relative paths resolve against base_dir.
// Unknown keys and malformed values raise ConfigError.
[[nodiscard]] PreparedRun prepare_run(const nlohmann::ordered_json& config, const std::filesystem::path& base_dir);
[[nodiscard]] PreparedRun load_run(const std::filesystem::path& config_file);

[[nodiscard]] Hyperparameter parse_hyperparameter(const nlohmann::ordered_json& j, const std::string& where);
// Heteroscedastic anchors are given in raw input units (or "training") and
// mapped through the same scaling as the bias inputs.
[[nodiscard]] Kernel parse_kernel(const nlohmann::ordered_json& j, const Points& scaled_training_inputs,
                                  const AffineScaling& scaling);

// Preset configurations for the three shipped benchmarks.
[[nodiscard]] nlohmann::ordered_json benchmark_config(const std::string& name, Method method, std::uint64_t seed,
                                                      bool extended = false);

}  // namespace biascal
