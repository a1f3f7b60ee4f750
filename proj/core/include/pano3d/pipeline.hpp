#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pano3d/alignment.hpp"
#include "pano3d/config.hpp"
#include "pano3d/metrics.hpp"

namespace pano3d {

/// A stage failure. stage() is one of panorama, views, depth, fuse, splat,
/// render, write; view_index() is -1 unless a specific view failed.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, int view_index, const std::string& what)
      : std::runtime_error("stage '" + stage + "'" + (view_index >= 0 ? " view " + std::to_string(view_index) : "") +
                           ": " + what),
        stage_(std::move(stage)),
        view_index_(view_index) {}
  const std::string& stage() const { return stage_; }
  int view_index() const { return view_index_; }

 private:
  std::string stage_;
  int view_index_;
};

struct PipelineReport {
  /// Depth scale applied to each input view (1 unless perturbed).
  std::vector<double> input_scales;
  std::vector<AlignmentResult> alignments;
  std::size_t omega_points = 0;
  std::size_t gaussians = 0;
  std::vector<double> loss_history;
  /// One report per evaluated pose: the configured held-out poses (or
  /// default_heldout_poses() when none are set) with the synth source, the
  /// trajectory poses with the files source.
  std::vector<MetricReport> eval;
  MetricReport mean;
  double seconds = 0.0;
};

using LogFn = std::function<void(const std::string&)>;

/// Runs panorama -> views -> depth -> fuse -> splat -> render, writing every
/// artifact under config.output_dir:
///   panorama.png, views/view_NNN.png, depths/depth_NNN.pfm, manifest.json,
///   omega.ply, alignment.json, gaussians.ply, renders/eval_NN.png,
///   renders/oracle_NN.png (synth only), metrics.json
/// Deterministic for a fixed config (including seed).
PipelineReport run_pipeline(const PipelineConfig& config, const LogFn& log = {});

/// JSON text for a MetricReport (infinite PSNR written as 99).
std::string metric_report_json(const MetricReport& report);

}  // namespace pano3d
