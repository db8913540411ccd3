#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sscalib/cloud_features.hpp"
#include "sscalib/image_features.hpp"
#include "sscalib/registration.hpp"

namespace sscalib {

/// Everything a calibration run needs besides its input files. Serialized as
/// one flat JSON object; see README for the key list.
struct CalibrationConfig {
  std::string preset = "3m";  // 3m, 5m, 8m or custom
  std::uint64_t seed = 0;
  int boards = 1;
  double lidar_fov = 70.4;  // deg
  CloudThresholds cloud;
  RansacOptions plane_ransac = default_plane_ransac();
  RansacOptions line_ransac = default_line_ransac();
  ImageThresholds image;
  SolverConfig solver;

  void validate() const;
};

/// Margin step, range, plane and line thresholds per working distance.
/// Throws ParseError for an unknown name; "custom" leaves `cfg` untouched.
void apply_preset(CalibrationConfig& cfg, const std::string& name);

/// Defaults, then the preset (`preset_override` wins over the document's
/// "preset" key), then every explicit key. Unknown keys are rejected.
CalibrationConfig config_from_json(const std::string& text, const std::optional<std::string>& preset_override = {});
CalibrationConfig load_config(const std::filesystem::path& path,
                              const std::optional<std::string>& preset_override = {});

std::string config_to_json(const CalibrationConfig& cfg);

}  // namespace sscalib
