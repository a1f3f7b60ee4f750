#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pano3d/fusion.hpp"
#include "pano3d/geometry.hpp"
#include "pano3d/splat.hpp"
#include "pano3d/synth.hpp"

namespace pano3d {

enum class DepthSource { Files, Synth };

struct TrajectoryConfig {
  int n_yaw = 8;
  std::vector<double> pitches_deg{-45.0, 0.0, 45.0};
  double fov_deg = 90.0;
  int view_width = 512;
  int view_height = 512;
};

struct AlignmentConfig {
  ScaleSolver solver = ScaleSolver::GradientDescent;
  double step = 0.05;
  int max_iters = 500;
  double tol = 1e-7;
  int dilate_radius = 1;
  bool enabled = true;
  bool masking = true;
};

struct SplatConfig {
  int knn = 3;
  splat::LearningRates lr;
  int iterations = 200;
  Color background = Color::Zero();
  splat::Optimizer optimizer = splat::Optimizer::Adam;
  /// Add Omega projections at half-step yaws of every ring as extra supervision.
  bool augment = true;
};

struct SynthConfig {
  synth::BoxScene scene;
  int pano_width = 2048;
  bool perturb = true;
  double perturb_lo = 0.7;
  double perturb_hi = 1.4;
};

struct HeldOutPose {
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  Vec3 translation = Vec3::Zero();

  CameraPose pose() const;
};

struct EvalConfig {
  std::vector<HeldOutPose> poses;
  int width = 256;
  int height = 256;
  double fov_deg = 90.0;
};

struct PipelineConfig {
  /// Input panorama (PNG). Optional with the synth depth source, which then
  /// renders the box room panorama itself.
  std::string panorama;
  DepthSource depth_source = DepthSource::Synth;
  /// Directory holding depth_000.pfm, depth_001.pfm, ... (z-depth) for the files source.
  std::string depth_dir;
  TrajectoryConfig trajectory;
  AlignmentConfig alignment;
  SplatConfig splat;
  SynthConfig synth;
  EvalConfig eval;
  std::string output_dir = "pano3d_out";
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
  FusionConfig fusion() const;
  splat::OptimizeOptions optimize_options() const;
};

/// Four translated held-out poses used to score novel views.
std::vector<HeldOutPose> default_heldout_poses();

/// Synthetic benchmark: median solver, 256x256 views, perturbed depths,
/// 200 optimizer iterations, four held-out poses.
PipelineConfig benchmark_config();

/// JSON (de)serialization. Missing keys keep their defaults; unknown keys are errors.
PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::string& path);

/// Manifest describing a set of views on disk. Paths are relative to the
/// manifest's directory. Poses are serialized as 9 row-major rotation floats
/// plus 3 translation floats.
struct ViewRecord {
  int index = 0;
  std::string image;
  std::string depth;
  CameraPose pose;
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  double depth_scale = 1.0;
};

struct Manifest {
  Intrinsics intrinsics;
  std::string panorama;
  std::vector<ViewRecord> views;
};

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text);
void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

}  // namespace pano3d
