#pragma once

#include <vector>

#include "pano3d/alignment.hpp"
#include "pano3d/geometry.hpp"
#include "pano3d/pointcloud.hpp"

namespace pano3d {

enum class ScaleSolver { GradientDescent, WeightedMedian };

struct FusionConfig {
  ScaleSolver solver = ScaleSolver::GradientDescent;
  GdOptions gd;
  int dilate_radius = 1;
  /// Disable to lift every valid pixel of every view (no duplicate removal).
  bool use_masking = true;
  /// Disable to keep every d_i = 1 (no depth-scale correction).
  bool align_scales = true;
};

struct RgbdView {
  PerspectiveView view;
  DepthMap depth;
};

struct FusionResult {
  PointCloud omega;
  /// One entry per view; entry 0 is the fixed reference (scale 1).
  std::vector<AlignmentResult> alignments;
  /// Number of points each view contributed to omega.
  std::vector<std::size_t> added;
};

/// Cyclic fusion: view 0 is lifted unmasked; every later view is scale-aligned
/// against the cloud accumulated so far, then lifted with the pixels that cloud
/// projected cloud point's z with the view's depth resampled (in inverse depth) at the point's
/// projected cloud point's z with the view's depth resampled at the point's
/// sub-pixel position, over the undilated coverage. Throws AlignmentError naming the
/// view when a view has no overlap with the accumulated cloud.
FusionResult fuse_views(const std::vector<RgbdView>& views, const Intrinsics& intr, const FusionConfig& config = {});

}  // namespace pano3d
