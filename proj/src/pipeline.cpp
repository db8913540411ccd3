#include "sscalib/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sscalib {

using nlohmann::json;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json pix_json(const Pixel& p) { return json::array({p.x(), p.y()}); }

json pose_json(const Pose3d& pose) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    rot.push_back(json::array({pose.rotation()(r, 0), pose.rotation()(r, 1), pose.rotation()(r, 2)}));
  }
  return {{"rotation", rot}, {"translation", vec_json(pose.translation())}};
}

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kParseError, "expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Pixel pix_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::kParseError, "expected a pixel pair");
  return Pixel(j[0].get<double>(), j[1].get<double>());
}

Pose3d pose_from(const json& j) {
  if (!j.is_object() || !j.contains("rotation") || !j.contains("translation")) {
    throw Error(ErrorCode::kParseError, "pose needs 'rotation' and 'translation'");
  }
  const json& r = j["rotation"];
  if (!r.is_array() || r.size() != 3) throw Error(ErrorCode::kParseError, "rotation must be 3x3");
  Matrix3<double> m;
  for (int i = 0; i < 3; ++i) m.row(i) = vec_from(r[i]).transpose();
  if (!((m.transpose() * m - Matrix3<double>::Identity()).norm() < 1e-6 && m.determinant() > 0.0)) {
    throw Error(ErrorCode::kParseError, "rotation is not orthonormal");
  }
  return Pose3d(m, vec_from(j["translation"]));
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, what + ": " + e.what());
  }
}

json stats_json(const ReprojectionStats& s) {
  auto axis = [](const AxisStats& a) {
    return json{{"p25", a.p25}, {"p50", a.p50}, {"p75", a.p75}, {"mean", a.mean}, {"rms", a.rms}};
  };
  return {{"u", axis(s.u)}, {"v", axis(s.v)}, {"mean", s.mean}, {"rms", s.rms}};
}

// Runs `f`, tagging any untagged error with `stage`.
template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

PointCloud margin_cloud(const MarginPointSet& m, const PointCloud& source) {
  PointCloud out;
  out.points = m.points;
  if (source.has_labels()) {
    for (std::uint32_t s : m.source) out.labels.push_back(source.labels[s]);
  }
  return out;
}

void draw_contour(Image& rgb, const ContourShape& c, const Rgb& color) {
  for (const Pixel& p : c.pixels) {
    const int x = static_cast<int>(std::lround(p.x()));
    const int y = static_cast<int>(std::lround(p.y()));
    if (!rgb.contains(x, y)) continue;
    for (int ch = 0; ch < 3; ++ch) rgb.at(x, y, ch) = color[ch];
  }
}

}  // namespace

fs::path ArtifactSink::claim(const std::string& name) {
  for (const auto& [n, p] : written_) {
    if (n == name) throw Error(ErrorCode::kInvalidArgument, "artifact '" + name + "' written twice");
  }
  const fs::path path = dir_ / name;
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir_.string() + ": " + ec.message());
  written_.emplace_back(name, path);
  return path;
}

void ArtifactSink::record(const std::string& name, const fs::path& path) {
  for (const auto& [n, p] : written_) {
    if (n == name) throw Error(ErrorCode::kInvalidArgument, "artifact '" + name + "' written twice");
  }
  written_.emplace_back(name, path);
}

SceneSpec make_scene(const SceneLayout& layout) {
  if (layout.boards < 1 || layout.boards > 2) throw Error(ErrorCode::kInvalidArgument, "scenes hold one or two boards");
  SceneSpec scene;
  scene.boards.clear();
  for (int b = 0; b < layout.boards; ++b) {
    const double side = layout.boards == 1 ? 0.0 : (b == 0 ? 0.5 : -0.5) * layout.board_spacing;
    BoardSpec board;
    board.pose_world = facing_board_pose(layout.distance, layout.lateral + side, layout.height, layout.yaw_deg,
                                         layout.pitch_deg, layout.roll_deg);
    scene.boards.push_back(board);
  }
  scene.board_clearance = layout.clearance;
  scene.lidar_fov = layout.fov_deg;
  scene.duration_equivalent = layout.points;
  scene.validate();
  return scene;
}

std::string ground_truth_to_json(const GroundTruth& gt) {
  json c3 = json::array(), c2 = json::array(), boards = json::array();
  for (const Vec3& p : gt.corners_3d) c3.push_back(vec_json(p));
  for (const Pixel& p : gt.corners_2d) c2.push_back(pix_json(p));
  for (std::size_t b = 0; b < gt.board_outlines.size(); ++b) {
    json outline = json::array(), holes = json::array();
    for (const Vec3& p : gt.board_outlines[b]) outline.push_back(vec_json(p));
    for (const Vec3& p : gt.board_holes[b]) holes.push_back(vec_json(p));
    boards.push_back({{"outline", outline}, {"hole_corners", holes}});
  }
  json doc = {{"extrinsic", pose_json(gt.extrinsic)}, {"corners_3d", c3}, {"corners_2d", c2}, {"boards", boards}};
  return doc.dump(2) + "\n";
}

GroundTruth read_ground_truth(const fs::path& path) {
  const json doc = parse_json(read_text(path), path.string());
  GroundTruth gt;
  try {
    gt.extrinsic = pose_from(doc.at("extrinsic"));
    for (const json& p : doc.at("corners_3d")) gt.corners_3d.push_back(vec_from(p));
    for (const json& p : doc.at("corners_2d")) gt.corners_2d.push_back(pix_from(p));
    for (const json& b : doc.at("boards")) {
      std::vector<Vec3> outline, holes;
      for (const json& p : b.at("outline")) outline.push_back(vec_from(p));
      for (const json& p : b.at("hole_corners")) holes.push_back(vec_from(p));
      gt.board_outlines.push_back(outline);
      gt.board_holes.push_back(holes);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  if (gt.corners_3d.size() != gt.corners_2d.size()) {
    throw Error(ErrorCode::kParseError, path.string() + ": corner lists differ in length");
  }
  return gt;
}

Pose3d read_pose(const fs::path& path) {
  const json doc = parse_json(read_text(path), path.string());
  if (!doc.is_object() || !doc.contains("extrinsic")) {
    throw Error(ErrorCode::kParseError, path.string() + ": no 'extrinsic' object");
  }
  try {
    return pose_from(doc["extrinsic"]);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

std::string pose_to_json_text(const Pose3d& pose) { return json{{"extrinsic", pose_json(pose)}}.dump(2) + "\n"; }

std::vector<fs::path> run_synth(const SynthRequest& req, const fs::path& out_dir) {
  req.noise.validate();
  const SceneSpec scene = make_scene(req.layout);
  const SyntheticScan scan = render_scan(scene, req.noise, req.seed);
  const SyntheticImage shot = render_image(scene, req.intrinsics, req.extrinsic, req.noise, req.seed);

  GroundTruth gt;
  gt.extrinsic = req.extrinsic;
  gt.corners_3d = scene.corners_world();
  gt.corners_2d = shot.corners_exact;
  for (const BoardSpec& b : scene.boards) {
    const auto outline = b.outline_world();
    const auto holes = b.corners_world();
    gt.board_outlines.emplace_back(outline.begin(), outline.end());
    gt.board_holes.emplace_back(holes.begin(), holes.end());
  }

  const std::vector<fs::path> paths = {out_dir / "cloud.ply", out_dir / "image.png", out_dir / "intrinsics.json",
                                       out_dir / "ground_truth.json"};
  write_ply(paths[0], scan.cloud, req.ply_format);
  write_image(paths[1], shot.image);
  write_text(paths[2], intrinsics_to_json(req.intrinsics));
  write_text(paths[3], ground_truth_to_json(gt));
  return paths;
}

CloudExtraction run_extract_cloud(const PointCloud& cloud, const CalibrationConfig& cfg, ArtifactSink* dumps) {
  cfg.validate();
  const bool dump = dumps && dumps->enabled();
  CloudExtraction out;
  try {
    out = extract_cloud_corners(cloud.points, cfg.cloud, cfg.lidar_fov, cfg.boards, cfg.seed, cfg.plane_ransac,
                                cfg.line_ransac);
  } catch (const Error&) {
    if (dump) {
      // Margins are cheap to recompute and are the first thing to look at
      // when plane or line fitting fails.
      try {
        const VoxelGrid grid = voxelize(cloud.points, cfg.cloud, cfg.lidar_fov);
        const MarginPointSet margins = extract_margins(grid, cfg.cloud);
        write_ply(dumps->claim("margins.ply"), margin_cloud(margins, cloud));
        write_ply(dumps->claim("filtered.ply"), margin_cloud(sparseness_filter(margins, cfg.cloud), cloud));
      } catch (const Error&) {
      }
    }
    throw;
  }
  if (!dump) return out;

  write_ply(dumps->claim("margins.ply"), margin_cloud(out.margins, cloud));
  write_ply(dumps->claim("filtered.ply"), margin_cloud(out.filtered, cloud));

  json planes = json::array();
  for (std::size_t i = 0; i < out.planes.size(); ++i) {
    const bool board = std::find(out.board_planes.begin(), out.board_planes.end(), i) != out.board_planes.end();
    planes.push_back({{"normal", vec_json(out.planes[i].normal)},
                      {"offset", out.planes[i].offset},
                      {"support", out.planes[i].inliers.size()},
                      {"board", board}});
  }
  write_text(dumps->claim("planes.json"), planes.dump(2) + "\n");

  json lines = json::array();
  for (const auto& board : out.lines) {
    json bl = json::array();
    for (const SpatialLine& l : board) {
      const char* label = l.label == LineLabel::kHorizontal ? "horizontal"
                          : l.label == LineLabel::kVertical ? "vertical"
                                                            : "unlabeled";
      bl.push_back({{"anchor", vec_json(l.anchor)}, {"direction", vec_json(l.direction)}, {"support", l.support},
                    {"label", label}});
    }
    lines.push_back(bl);
  }
  write_text(dumps->claim("lines.json"), lines.dump(2) + "\n");

  json corners = json::array();
  for (const CornerGrid3D& g : out.grids) {
    for (const Vec3& c : g.corners) corners.push_back(vec_json(c));
  }
  write_text(dumps->claim("corners_3d.json"), corners.dump(2) + "\n");
  return out;
}

ImageExtraction run_extract_image(const Image& image, const Intrinsics& k, const CalibrationConfig& cfg,
                                  ArtifactSink* dumps) {
  cfg.validate();
  const bool dump = dumps && dumps->enabled();
  ImageExtraction out;
  out.rectified = rectify(image.to_gray(), k);
  out.binary = binarize(out.rectified);
  if (dump) write_image(dumps->claim("binary.png"), out.binary);
  out.contours = trace_contours(out.binary);
  const ImageThresholds th = cfg.image.resolved(image.width, image.height);

  auto dump_contours = [&] {
    if (!dump) return;
    Image overlay = out.rectified.to_rgb();
    for (std::size_t i = 0; i < out.contours.size(); ++i) {
      const bool kept = std::find(out.selected.begin(), out.selected.end(), i) != out.selected.end();
      draw_contour(overlay, out.contours[i], kept ? Rgb{0, 255, 0} : Rgb{255, 0, 0});
    }
    write_image(dumps->claim("contours.png"), overlay);
  };
  try {
    out.selected = contour_filter(out.contours, th, 4 * static_cast<std::size_t>(cfg.boards));
  } catch (const Error&) {
    dump_contours();
    throw;
  }
  dump_contours();
  for (std::size_t id : out.selected) {
    out.quads.push_back(extract_quad(out.contours[id], cfg.seed + id, static_cast<int>(id)));
  }
  out.corners = order_quads(out.quads);
  if (dump) {
    json corners = json::array();
    for (const Pixel& p : out.corners) corners.push_back(pix_json(p));
    write_text(dumps->claim("corners_2d.json"), corners.dump(2) + "\n");
  }
  return out;
}

CalibrationResult calibrate(const PointCloud& cloud, const Image& image, const Intrinsics& k,
                            const CalibrationConfig& cfg, ArtifactSink* dumps) {
  staged("config", [&] { cfg.validate(); });
  const CloudExtraction cx = staged("cloud_features", [&] { return run_extract_cloud(cloud, cfg, dumps); });
  const ImageExtraction ix = staged("image_features", [&] { return run_extract_image(image, k, cfg, dumps); });

  CalibrationResult res;
  res.correspondences =
      staged("registration", [&] { return register_corners(std::span<const CornerGrid3D>(cx.grids), ix.corners); });
  res.initial = staged("initial_guess", [&] { return initial_guess(res.correspondences, k); });
  res.solver = staged("solve_pnp", [&] { return solve_pnp(res.correspondences, k, res.initial, cfg.solver); });
  staged("evaluation", [&] {
    res.stats = reprojection_stats(res.solver.pose, res.correspondences, k);
    res.normalized = normalized_reprojection(res.solver.pose, res.correspondences, k);
  });

  json c3 = json::array(), c2 = json::array();
  for (const Vec3& p : res.correspondences.points) c3.push_back(vec_json(p));
  for (const Pixel& p : res.correspondences.pixels) c2.push_back(pix_json(p));
  json report = {
      {"converged", res.solver.converged},
      {"iterations", res.solver.iterations},
      {"final_rms", res.solver.final_rms},
      {"extrinsic", pose_json(res.solver.pose)},
      {"initial_guess", pose_json(res.initial)},
      {"per_point_residuals", res.solver.per_point_residuals},
      {"reprojection", stats_json(res.stats)},
      {"normalized_reprojection", res.normalized},
      {"corners_3d", c3},
      {"corners_2d", c2},
      {"config", json::parse(config_to_json(cfg))},
  };
  res.report_json = report.dump(2) + "\n";
  if (dumps) res.artifacts = dumps->written();
  return res;
}

CalibrationResult run_calibrate(const fs::path& cloud_path, const fs::path& image_path,
                                const fs::path& intrinsics_path, const CalibrationConfig& cfg,
                                const std::optional<fs::path>& report_path, const std::optional<fs::path>& dump_dir) {
  const PointCloud cloud = staged("io", [&] { return read_cloud(cloud_path); });
  const Image image = staged("io", [&] { return read_image(image_path); });
  const Intrinsics k = staged("io", [&] { return read_intrinsics(intrinsics_path); });
  ArtifactSink sink = dump_dir ? ArtifactSink(*dump_dir) : ArtifactSink();
  if (dump_dir) staged("io", [&] { fs::create_directories(*dump_dir); });
  CalibrationResult res = calibrate(cloud, image, k, cfg, &sink);
  if (report_path) {
    staged("io", [&] { write_text(*report_path, res.report_json); });
    sink.record("report", *report_path);
  }
  res.artifacts = sink.written();
  return res;
}

EvaluationResult evaluate(const Pose3d& estimate, const GroundTruth& gt, const Intrinsics& k, const PointCloud* cloud,
                          const Image* image) {
  EvaluationResult r;
  r.rotation_error_deg = rotation_distance(estimate.rotation(), gt.extrinsic.rotation()) * kRadToDeg;
  r.translation_error_m = (estimate.translation() - gt.extrinsic.translation()).norm();
  r.n_corners = gt.corners_3d.size();

  std::vector<Pixel> overlaid;
  for (const Vec3& p : gt.corners_3d) overlaid.push_back(project(estimate * p, k));
  r.board_drift = board_drift(gt.corners_2d, overlaid);
  r.stats = reprojection_stats(estimate, CorrespondenceSet{gt.corners_3d, gt.corners_2d}, k);

  json doc = {{"rotation_error_deg", r.rotation_error_deg},
              {"translation_error_m", r.translation_error_m},
              {"board_drift", r.board_drift},
              {"n_corners", r.n_corners},
              {"reprojection", stats_json(r.stats)}};
  if (cloud && image) {
    const PointCloud colored = colorize(*cloud, *image, estimate, k);
    double worst = 0.0;
    for (std::size_t b = 0; b < gt.board_outlines.size(); ++b) {
      std::vector<Vec3> edges = sample_polygon_edges(gt.board_outlines[b], 0.01);
      for (std::size_t h = 0; h + 4 <= gt.board_holes[b].size(); h += 4) {
        const auto hole = sample_polygon_edges(std::span<const Vec3>(gt.board_holes[b]).subspan(h, 4), 0.01);
        edges.insert(edges.end(), hole.begin(), hole.end());
      }
      worst = std::max(worst, uncolored_distance(edges, colored));
    }
    r.uncolored_distance = worst;
    doc["uncolored_distance"] = worst;
  }
  r.json = doc.dump(2) + "\n";
  return r;
}

EvaluationResult run_evaluate(const fs::path& pose_path, const fs::path& ground_truth_path,
                              const fs::path& intrinsics_path, const std::optional<fs::path>& cloud_path,
                              const std::optional<fs::path>& image_path, const std::optional<fs::path>& out_path) {
  const Pose3d pose = staged("io", [&] { return read_pose(pose_path); });
  const GroundTruth gt = staged("io", [&] { return read_ground_truth(ground_truth_path); });
  const Intrinsics k = staged("io", [&] { return read_intrinsics(intrinsics_path); });
  std::optional<PointCloud> cloud;
  std::optional<Image> image;
  if (cloud_path && image_path) {
    cloud = staged("io", [&] { return read_cloud(*cloud_path); });
    image = staged("io", [&] { return read_image(*image_path); });
  }
  EvaluationResult r = staged("evaluation", [&] {
    return evaluate(pose, gt, k, cloud ? &*cloud : nullptr, image ? &*image : nullptr);
  });
  if (out_path) staged("io", [&] { write_text(*out_path, r.json); });
  return r;
}

std::vector<fs::path> run_colorize(const fs::path& cloud_path, const fs::path& image_path,
                                   const fs::path& intrinsics_path, const Pose3d& pose, const fs::path& out_dir) {
  const PointCloud cloud = staged("io", [&] { return read_cloud(cloud_path); });
  const Image image = staged("io", [&] { return read_image(image_path); });
  const Intrinsics k = staged("io", [&] { return read_intrinsics(intrinsics_path); });
  const PointCloud colored = staged("colorize", [&] { return colorize(cloud, image, pose, k); });
  const Image overlay = staged("colorize", [&] { return project_overlay(cloud, image, pose, k); });
  const std::vector<fs::path> paths = {out_dir / "colored.ply", out_dir / "overlay.png"};
  staged("io", [&] {
    write_ply(paths[0], colored);
    write_image(paths[1], overlay);
  });
  return paths;
}

}  // namespace sscalib
