#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "sscalib/pipeline.hpp"

using namespace sscalib;

namespace {

struct Common {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string dump_dir;
  bool quiet = false;
};

CalibrationConfig build_config(const Common& c) {
  std::optional<std::string> preset;
  if (!c.preset.empty()) preset = c.preset;
  CalibrationConfig cfg = c.config_path.empty() ? config_from_json("{}", preset) : load_config(c.config_path, preset);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

void print_pose(const Pose3d& p) {
  const auto& r = p.rotation();
  const auto& t = p.translation();
  for (int i = 0; i < 3; ++i) {
    std::printf("  [% .9f % .9f % .9f | % .6f]\n", r(i, 0), r(i, 1), r(i, 2), t(i));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera / solid-state LiDAR extrinsic calibration from a four-hole board"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--preset", common.preset, "Threshold preset")->check(CLI::IsMember({"3m", "5m", "8m", "custom"}));
  app.add_option("--seed", common.seed, "Random seed");
  app.add_option("--dump-dir", common.dump_dir, "Directory for intermediate artifacts");
  app.add_flag("--quiet", common.quiet, "Print nothing on success");

  // synth
  auto* synth = app.add_subcommand("synth", "Render a synthetic cloud, image and ground truth");
  SynthRequest sreq;
  std::string synth_out = "synth", synth_intrinsics;
  bool ascii = false;
  synth->add_option("--out-dir", synth_out, "Output directory")->capture_default_str();
  synth->add_option("--distance", sreq.layout.distance, "Board distance (m)")->capture_default_str();
  synth->add_option("--lateral", sreq.layout.lateral, "Board offset to the left (m)")->capture_default_str();
  synth->add_option("--height", sreq.layout.height, "Board offset upwards (m)")->capture_default_str();
  synth->add_option("--yaw", sreq.layout.yaw_deg, "Board yaw (deg)")->capture_default_str();
  synth->add_option("--pitch", sreq.layout.pitch_deg, "Board pitch (deg)")->capture_default_str();
  synth->add_option("--roll", sreq.layout.roll_deg, "Board roll about its normal (deg)")->capture_default_str();
  synth->add_option("--boards", sreq.layout.boards, "Number of boards (1 or 2)")->check(CLI::Range(1, 2));
  synth->add_option("--points", sreq.layout.points, "Rosette points")->check(CLI::PositiveNumber);
  synth->add_option("--clearance", sreq.layout.clearance, "Board to wall gap (m)")->capture_default_str();
  synth->add_option("--range-sigma", sreq.noise.range_sigma, "Range noise (m)")->capture_default_str();
  synth->add_option("--vacant-fraction", sreq.noise.vacant_fraction, "Vacant point rate")->capture_default_str();
  synth->add_option("--pixel-sigma", sreq.noise.pixel_sigma, "Corner jitter (px)")->capture_default_str();
  synth->add_option("--intrinsics", synth_intrinsics, "Camera intrinsics JSON")->check(CLI::ExistingFile);
  synth->add_flag("--ascii", ascii, "Write an ascii PLY");

  std::string cloud_path, image_path, intrinsics_path, output, report_path, gt_path, out_dir = ".";
  bool identity = false;

  auto* xcloud = app.add_subcommand("extract-cloud", "Detect the 3-D hole corners in a cloud");
  xcloud->add_option("--cloud", cloud_path, "PLY or CSV cloud")->required()->check(CLI::ExistingFile);
  xcloud->add_option("--output", output, "Corner JSON")->capture_default_str();

  auto* ximage = app.add_subcommand("extract-image", "Detect the 2-D hole corners in an image");
  ximage->add_option("--image", image_path, "PNG or PGM image")->required()->check(CLI::ExistingFile);
  ximage->add_option("--intrinsics", intrinsics_path, "Camera intrinsics JSON")->required()->check(CLI::ExistingFile);
  ximage->add_option("--output", output, "Corner JSON");

  auto* calib = app.add_subcommand("calibrate", "Estimate the LiDAR to camera extrinsic");
  calib->add_option("--cloud", cloud_path, "PLY or CSV cloud")->required()->check(CLI::ExistingFile);
  calib->add_option("--image", image_path, "PNG or PGM image")->required()->check(CLI::ExistingFile);
  calib->add_option("--intrinsics", intrinsics_path, "Camera intrinsics JSON")->required()->check(CLI::ExistingFile);
  calib->add_option("--output", output, "Report JSON (default report.json)");

  auto* eval = app.add_subcommand("evaluate", "Compare an extrinsic against ground truth");
  eval->add_option("--report", report_path, "Report or pose JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--ground-truth", gt_path, "Ground truth JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--intrinsics", intrinsics_path, "Camera intrinsics JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--cloud", cloud_path, "Cloud for the uncolored distance")->check(CLI::ExistingFile);
  eval->add_option("--image", image_path, "Image for the uncolored distance")->check(CLI::ExistingFile);
  eval->add_option("--output", output, "Evaluation JSON (default evaluation.json)");

  auto* color = app.add_subcommand("colorize", "Write a colored cloud and a projection overlay");
  color->add_option("--cloud", cloud_path, "PLY or CSV cloud")->required()->check(CLI::ExistingFile);
  color->add_option("--image", image_path, "PNG or PGM image")->required()->check(CLI::ExistingFile);
  color->add_option("--intrinsics", intrinsics_path, "Camera intrinsics JSON")->required()->check(CLI::ExistingFile);
  auto* pose_opt = color->add_option("--report", report_path, "Report or pose JSON")->check(CLI::ExistingFile);
  color->add_flag("--identity", identity, "Use the bare axis permutation (no offset)")->excludes(pose_opt);
  color->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  for (auto* sub : {synth, xcloud, ximage, calib, eval, color}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorCode::kInvalidArgument);
  }

  try {
    if (synth->parsed()) {
      sreq.seed = common.seed.value_or(0);
      sreq.ply_format = ascii ? PlyFormat::kAscii : PlyFormat::kBinaryLittleEndian;
      if (!synth_intrinsics.empty()) sreq.intrinsics = read_intrinsics(synth_intrinsics);
      const auto paths = run_synth(sreq, synth_out);
      if (!common.quiet) {
        for (const auto& p : paths) std::cout << "wrote " << p.string() << "\n";
      }
      return 0;
    }

    const CalibrationConfig cfg = in_stage("config", [&] { return build_config(common); });
    ArtifactSink sink = common.dump_dir.empty() ? ArtifactSink() : ArtifactSink(common.dump_dir);

    if (xcloud->parsed()) {
      const PointCloud cloud = in_stage("io", [&] { return read_cloud(cloud_path); });
      const CloudExtraction ex = in_stage("cloud_features", [&] { return run_extract_cloud(cloud, cfg, &sink); });
      std::string text = "[\n";
      for (std::size_t g = 0; g < ex.grids.size(); ++g) {
        for (std::size_t i = 0; i < 16; ++i) {
          const Vec3& c = ex.grids[g].corners[i];
          char buf[128];
          std::snprintf(buf, sizeof buf, "  [%.9f, %.9f, %.9f]%s\n", c.x(), c.y(), c.z(),
                        (g + 1 == ex.grids.size() && i == 15) ? "" : ",");
          text += buf;
        }
      }
      text += "]\n";
      write_text(output.empty() ? "corners_3d.json" : output, text);
      if (!common.quiet) {
        std::cout << ex.margins.size() << " margin points, " << ex.planes.size() << " planes, " << ex.grids.size()
                  << " boards\n";
      }
      return 0;
    }

    if (ximage->parsed()) {
      const Image image = in_stage("io", [&] { return read_image(image_path); });
      const Intrinsics k = in_stage("io", [&] { return read_intrinsics(intrinsics_path); });
      const ImageExtraction ex = in_stage("image_features", [&] { return run_extract_image(image, k, cfg, &sink); });
      std::string text = "[\n";
      for (std::size_t i = 0; i < ex.corners.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  [%.3f, %.3f]%s\n", ex.corners[i].x(), ex.corners[i].y(),
                      i + 1 == ex.corners.size() ? "" : ",");
        text += buf;
      }
      text += "]\n";
      write_text(output.empty() ? "corners_2d.json" : output, text);
      if (!common.quiet) std::cout << ex.contours.size() << " contours, " << ex.corners.size() << " corners\n";
      return 0;
    }

    if (calib->parsed()) {
      const CalibrationResult res = run_calibrate(cloud_path, image_path, intrinsics_path, cfg,
                                                  fs::path(output.empty() ? "report.json" : output),
                                                  opt_path(common.dump_dir));
      if (!common.quiet) {
        std::printf("%s after %d iterations, rms %.4f px\n", res.solver.converged ? "converged" : "NOT converged",
                    res.solver.iterations, res.solver.final_rms);
        print_pose(res.solver.pose);
      }
      if (!res.solver.converged) {
        std::cerr << "error: solve_pnp: NotConverged: iteration budget exhausted\n";
        return static_cast<int>(ErrorCode::kNotConverged);
      }
      return 0;
    }

    if (eval->parsed()) {
      const EvaluationResult r = run_evaluate(report_path, gt_path, intrinsics_path, opt_path(cloud_path),
                                              opt_path(image_path), fs::path(output.empty() ? "evaluation.json" : output));
      if (!common.quiet) {
        std::printf("rotation error %.4f deg, translation error %.4f m, board drift %.4f px\n", r.rotation_error_deg,
                    r.translation_error_m, r.board_drift);
        if (r.uncolored_distance) std::printf("uncolored distance %.4f m\n", *r.uncolored_distance);
      }
      return 0;
    }

    if (color->parsed()) {
      if (!identity && report_path.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "colorize needs --report or --identity");
      }
      const Pose3d pose = identity ? nominal_extrinsic() : read_pose(report_path);
      const auto paths = run_colorize(cloud_path, image_path, intrinsics_path, pose, out_dir);
      if (!common.quiet) {
        for (const auto& p : paths) std::cout << "wrote " << p.string() << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << (e.stage().empty() ? "" : e.stage() + ": ") << to_string(e.code()) << ": " << e.what()
              << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
