#include "pano3d/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace pano3d {
namespace {

DepthMap scaled(const DepthMap& depth, double s) {
  DepthMap out = depth;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (out.valid[i]) out.values[i] *= s;
  return out;
}

// Bilinear depth at pixel index coordinates; nullopt unless all four
// neighbors are valid.
std::optional<double> sample_depth(const DepthMap& d, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const int x0 = static_cast<int>(std::clamp(fu, 0.0, d.width - 1.0)), y0 = static_cast<int>(std::clamp(fv, 0.0, d.height - 1.0));
  const int x1 = std::min(x0 + 1, d.width - 1), y1 = std::min(y0 + 1, d.height - 1);
  if (!d.is_valid(x0, y0) || !d.is_valid(x1, y0) || !d.is_valid(x0, y1) || !d.is_valid(x1, y1)) return std::nullopt;
  const double tx = std::clamp(u - x0, 0.0, 1.0), ty = std::clamp(v - y0, 0.0, 1.0);
  // Inverse depth is affine in pixel coordinates across a plane, so
  // interpolating it is exact on planar patches.
  const double top = (1.0 - tx) / d.at(x0, y0) + tx / d.at(x1, y0);
  const double bottom = (1.0 - tx) / d.at(x0, y1) + tx / d.at(x1, y1);
  return 1.0 / ((1.0 - ty) * top + ty * bottom);
}

// The view's own depth along the ray of each projected cloud point: the
// cloud point at pixel p lands at a sub-pixel position, so D is resampled
// there. Comparing that to the point's z keeps both samples on one ray.
DepthMap depth_along_points(const DepthMap& depth, const Projection& proj, const PointCloud& cloud,
                            const Intrinsics& intr, const CameraPose& pose) {
  DepthMap out(depth.width, depth.height);
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      const std::int64_t k = proj.point_index[proj.mask.index(x, y)];
      if (k < 0) continue;
      const auto uv = camera_to_pixel(intr, pose.to_camera(cloud.positions[static_cast<std::size_t>(k)]));
      if (!uv) continue;
      if (const auto d = sample_depth(depth, uv->x(), uv->y())) out.set(x, y, *d);
    }
  return out;
}

}  // namespace

FusionResult fuse_views(const std::vector<RgbdView>& views, const Intrinsics& intr, const FusionConfig& config) {
  if (views.empty()) throw std::invalid_argument("fusion needs at least one view");
  intr.validate();
  if (config.dilate_radius < 0) throw std::invalid_argument("fusion: dilate_radius must be non-negative");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    if (v.view.image.width() != intr.width || v.view.image.height() != intr.height || v.depth.width != intr.width ||
        v.depth.height != intr.height)
      throw std::invalid_argument("fusion: view " + std::to_string(i) + " does not match the intrinsics size");
  }

  FusionResult result;
  result.omega = lift_rgbd(views[0].view.image, views[0].depth, intr, views[0].view.pose, 0);
  result.alignments.push_back(AlignmentResult{1.0, 0.0, 0, true});
  result.added.push_back(result.omega.size());

  for (std::size_t i = 1; i < views.size(); ++i) {
    const auto& [view, depth] = views[i];
    const int id = static_cast<int>(i);
    const Projection proj = project_cloud(result.omega, intr, view.pose);
    const CoverageMask mask = dilate_mask(proj.mask, config.dilate_radius);

    AlignmentResult alignment{1.0, 0.0, 0, true};
    if (config.align_scales) {
      try {
        const DepthMap along = depth_along_points(depth, proj, result.omega, intr, view.pose);
        alignment = config.solver == ScaleSolver::WeightedMedian ? align_scale_median(along, proj.mask, intr)
                                                                 : align_scale_gd(along, proj.mask, intr, config.gd);
      } catch (const AlignmentError& e) {
        throw AlignmentError(e.what(), id);
      }
    }

    const DepthMap corrected = scaled(depth, alignment.scale);
    const PointCloud rho = lift_rgbd(view.image, corrected, intr, view.pose, id, config.use_masking ? &mask : nullptr);
    result.omega.append(rho);
    result.alignments.push_back(alignment);
    result.added.push_back(rho.size());
  }
  return result;
}

}  // namespace pano3d
