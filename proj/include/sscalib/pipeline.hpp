#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sscalib/cloud_features.hpp"
#include "sscalib/config.hpp"
#include "sscalib/evaluation.hpp"
#include "sscalib/image_features.hpp"
#include "sscalib/io.hpp"
#include "sscalib/registration.hpp"
#include "sscalib/synthesis.hpp"

namespace sscalib {

namespace fs = std::filesystem;

/// Records every file a run writes and refuses to write a name twice.
class ArtifactSink {
 public:
  ArtifactSink() = default;
  explicit ArtifactSink(fs::path dir) : dir_(std::move(dir)) {}

  bool enabled() const { return !dir_.empty(); }
  /// Reserves `name` inside the dump directory.
  fs::path claim(const std::string& name);
  void record(const std::string& name, const fs::path& path);

  const std::vector<std::pair<std::string, fs::path>>& written() const { return written_; }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, fs::path>> written_;
};

struct SceneLayout {
  double distance = 3.0;  // m, along the LiDAR x axis
  double lateral = 0.1;
  double height = 0.05;
  double yaw_deg = 20.0;
  double pitch_deg = 10.0;
  double roll_deg = 12.0;
  int boards = 1;
  double board_spacing = 1.5;  // center to center when boards = 2
  double clearance = 1.5;
  int points = 200000;
  double fov_deg = 70.4;
};

SceneSpec make_scene(const SceneLayout& layout);

struct SynthRequest {
  SceneLayout layout;
  NoiseSpec noise;
  Intrinsics intrinsics;
  Pose3d extrinsic = default_extrinsic();
  std::uint64_t seed = 0;
  PlyFormat ply_format = PlyFormat::kBinaryLittleEndian;
};

/// Writes cloud.ply, image.png, intrinsics.json and ground_truth.json.
std::vector<fs::path> run_synth(const SynthRequest& req, const fs::path& out_dir);

struct GroundTruth {
  Pose3d extrinsic;
  std::vector<Vec3> corners_3d;
  std::vector<Pixel> corners_2d;  // exact projections
  std::vector<std::vector<Vec3>> board_outlines;
  std::vector<std::vector<Vec3>> board_holes;  // 16 corners per board
};

std::string ground_truth_to_json(const GroundTruth& gt);
GroundTruth read_ground_truth(const fs::path& path);

/// Reads the "extrinsic" object of a report or ground-truth file.
Pose3d read_pose(const fs::path& path);
std::string pose_to_json_text(const Pose3d& pose);

CloudExtraction run_extract_cloud(const PointCloud& cloud, const CalibrationConfig& cfg, ArtifactSink* dumps = nullptr);
ImageExtraction run_extract_image(const Image& image, const Intrinsics& k, const CalibrationConfig& cfg,
                                  ArtifactSink* dumps = nullptr);

struct CalibrationResult {
  SolverReport solver;
  Pose3d initial;
  CorrespondenceSet correspondences;
  ReprojectionStats stats;
  std::vector<double> normalized;
  std::string report_json;
  std::vector<std::pair<std::string, fs::path>> artifacts;
};

/// Cloud and image branches, registration, linear initialization, LM
/// refinement and residual statistics. Errors carry the failing stage name.
CalibrationResult run_calibrate(const fs::path& cloud_path, const fs::path& image_path,
                                const fs::path& intrinsics_path, const CalibrationConfig& cfg,
                                const std::optional<fs::path>& report_path = {},
                                const std::optional<fs::path>& dump_dir = {});

/// In-memory variant used by run_calibrate and the tests.
CalibrationResult calibrate(const PointCloud& cloud, const Image& image, const Intrinsics& k,
                            const CalibrationConfig& cfg, ArtifactSink* dumps = nullptr);

struct EvaluationResult {
  double rotation_error_deg = 0.0;
  double translation_error_m = 0.0;
  double board_drift = 0.0;  // px
  std::optional<double> uncolored_distance;  // m
  std::size_t n_corners = 0;
  ReprojectionStats stats;
  std::string json;
};

/// Compares an estimated extrinsic against ground truth. Uncolored distance
/// is computed when a cloud and image are supplied.
EvaluationResult evaluate(const Pose3d& estimate, const GroundTruth& gt, const Intrinsics& k,
                          const PointCloud* cloud = nullptr, const Image* image = nullptr);

EvaluationResult run_evaluate(const fs::path& pose_path, const fs::path& ground_truth_path,
                              const fs::path& intrinsics_path, const std::optional<fs::path>& cloud_path,
                              const std::optional<fs::path>& image_path, const std::optional<fs::path>& out_path);

/// Writes colored.ply and overlay.png into `out_dir`.
std::vector<fs::path> run_colorize(const fs::path& cloud_path, const fs::path& image_path,
                                   const fs::path& intrinsics_path, const Pose3d& pose, const fs::path& out_dir);

}  // namespace sscalib
