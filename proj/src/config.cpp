#include "sscalib/config.hpp"

#include <json.hpp>

#include "sscalib/io.hpp"

namespace sscalib {

using nlohmann::json;

namespace {

struct Preset {
  const char* name;
  double margin_step_deg, range_threshold, plane_threshold, line_threshold;
};

constexpr Preset kPresets[] = {
    {"3m", 0.20, 0.2, 0.05, 0.01},
    {"5m", 0.15, 0.4, 0.05, 0.015},
    {"8m", 0.10, 0.5, 0.06, 0.02},
};

// Visits every serializable field with its flat key. Shared by load and save
// so the two cannot drift apart.
template <typename Cfg, typename F>
void for_each_field(Cfg& c, F&& f) {
  f("seed", c.seed);
  f("boards", c.boards);
  f("lidar_fov", c.lidar_fov);
  f("margin_step_deg", c.cloud.margin_step_deg);
  f("range_threshold", c.cloud.range_threshold);
  f("plane_threshold", c.cloud.plane_threshold);
  f("line_threshold", c.cloud.line_threshold);
  f("sparseness_radius", c.cloud.sparseness_radius);
  f("sparseness_min_count", c.cloud.sparseness_min_count);
  f("board_length", c.cloud.board_length);
  f("hole_edge", c.cloud.hole_edge);
  f("deflation_sigma", c.cloud.deflation_sigma);
  f("deflation_multiplier", c.cloud.deflation_multiplier);
  f("mode_population_gate", c.cloud.mode_population_gate);
  f("mode_min_points", c.cloud.mode_min_points);
  f("plane_max_iterations", c.plane_ransac.max_iterations);
  f("plane_min_support", c.plane_ransac.min_support);
  f("plane_max_models", c.plane_ransac.max_models);
  f("line_max_iterations", c.line_ransac.max_iterations);
  f("line_min_support", c.line_ransac.min_support);
  f("line_max_models", c.line_ransac.max_models);
  f("area_min", c.image.area_min);
  f("area_max", c.image.area_max);
  f("rectangularity_max", c.image.rectangularity_max);
  f("circularity_min", c.image.circularity_range[0]);
  f("circularity_max", c.image.circularity_range[1]);
  f("solver_max_iterations", c.solver.max_iterations);
  f("step_tolerance", c.solver.step_tolerance);
  f("residual_tolerance", c.solver.residual_tolerance);
  f("damping_init", c.solver.damping_init);
  f("damping_scale", c.solver.damping_scale);
  f("damping_shrink", c.solver.damping_shrink);
}

void check_ransac(const RansacOptions& o, const std::string& prefix) {
  if (o.max_iterations <= 0) throw Error(ErrorCode::kInvalidThreshold, prefix + "_max_iterations must be positive");
  if (o.min_support < 2) throw Error(ErrorCode::kInvalidThreshold, prefix + "_min_support must be at least 2");
  if (o.max_models < o.min_models || o.max_models <= 0) {
    throw Error(ErrorCode::kInvalidThreshold, prefix + "_max_models must be positive and not below min_models");
  }
}

}  // namespace

void CalibrationConfig::validate() const {
  if (boards < 1) throw Error(ErrorCode::kInvalidThreshold, "boards must be at least 1");
  if (!(lidar_fov > 0.0 && lidar_fov < 180.0)) throw Error(ErrorCode::kInvalidThreshold, "lidar_fov must lie in (0, 180)");
  cloud.validate();
  check_ransac(plane_ransac, "plane");
  check_ransac(line_ransac, "line");
  if (plane_ransac.max_models < boards) {
    throw Error(ErrorCode::kInvalidThreshold, "plane_max_models is smaller than the number of boards");
  }
  image.validate();
  solver.validate();
}

void apply_preset(CalibrationConfig& cfg, const std::string& name) {
  if (name == "custom") {
    cfg.preset = name;
    return;
  }
  for (const Preset& p : kPresets) {
    if (name == p.name) {
      cfg.preset = name;
      cfg.cloud.margin_step_deg = p.margin_step_deg;
      cfg.cloud.range_threshold = p.range_threshold;
      cfg.cloud.plane_threshold = p.plane_threshold;
      cfg.cloud.line_threshold = p.line_threshold;
      return;
    }
  }
  throw Error(ErrorCode::kParseError, "unknown preset '" + name + "' (expected 3m, 5m, 8m or custom)");
}

CalibrationConfig config_from_json(const std::string& text, const std::optional<std::string>& preset_override) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "config: expected a JSON object");

  CalibrationConfig cfg;
  std::string preset = cfg.preset;
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) throw Error(ErrorCode::kParseError, "config: 'preset' must be a string");
    preset = doc["preset"].get<std::string>();
  }
  if (preset_override) preset = *preset_override;
  apply_preset(cfg, preset);

  std::size_t known = doc.contains("preset") ? 1 : 0;
  for_each_field(cfg, [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    ++known;
    using T = std::decay_t<decltype(field)>;
    const json& v = doc[key];
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw Error(ErrorCode::kParseError, std::string("config: '") + key + "' must be a number");
      field = v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) {
        throw Error(ErrorCode::kParseError, std::string("config: '") + key + "' must be a non-negative integer");
      }
      field = v.get<T>();
    } else {
      if (!v.is_number_integer()) throw Error(ErrorCode::kParseError, std::string("config: '") + key + "' must be an integer");
      field = v.get<T>();
    }
  });
  if (known != doc.size()) {
    for (const auto& [key, value] : doc.items()) {
      bool found = key == "preset";
      for_each_field(cfg, [&](const char* k, auto&) { found = found || key == k; });
      if (!found) throw Error(ErrorCode::kParseError, "config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

CalibrationConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset_override) {
  return config_from_json(read_text(path), preset_override);
}

std::string config_to_json(const CalibrationConfig& cfg) {
  json doc = json::object();
  doc["preset"] = cfg.preset;
  for_each_field(cfg, [&](const char* key, const auto& field) { doc[key] = field; });
  return doc.dump(2) + "\n";
}

}  // namespace sscalib
