#include "pano3d/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pano3d {

void DepthMap::set(int x, int y, double d) {
  const std::size_t i = index(x, y);
  const bool ok = std::isfinite(d) && d > 0.0;
  values[i] = ok ? d : 0.0;
  valid[i] = ok ? 1 : 0;
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](auto v) { return v != 0; }));
}

void PointCloud::append(const PointCloud& other) {
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  colors.insert(colors.end(), other.colors.begin(), other.colors.end());
  view_ids.insert(view_ids.end(), other.view_ids.begin(), other.view_ids.end());
}

std::size_t CoverageMask::covered_count() const {
  return static_cast<std::size_t>(std::count_if(covered.begin(), covered.end(), [](auto v) { return v != 0; }));
}

Mask CoverageMask::as_mask() const {
  Mask m(width, height);
  m.bits = covered;
  return m;
}

PointCloud lift_rgbd(const Image& image, const DepthMap& depth, const Intrinsics& intr, const CameraPose& pose,
                     int view_id, const CoverageMask* exclude) {
  if (image.width() != depth.width || image.height() != depth.height)
    throw std::invalid_argument("lift_rgbd: image and depth dimensions differ");
  if (intr.width != depth.width || intr.height != depth.height)
    throw std::invalid_argument("lift_rgbd: intrinsics do not match depth dimensions");
  if (exclude != nullptr && (exclude->width != depth.width || exclude->height != depth.height))
    throw std::invalid_argument("lift_rgbd: exclusion mask dimensions differ");

  PointCloud cloud;
  cloud.reserve(depth.valid_count());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.is_valid(u, v)) continue;
      if (exclude != nullptr && exclude->is_covered(u, v)) continue;
      const double d = depth.at(u, v);
      const Vec3 p_cam(d * (u + 0.5 - intr.cx) / intr.fx, d * (v + 0.5 - intr.cy) / intr.fy, d);
      cloud.push_back(pose.to_world(p_cam), image.at(u, v), view_id);
    }
  }
  return cloud;
}

PointCloud lift_rgbd(const PerspectiveView& view, const DepthMap& depth, int view_id, const CoverageMask* exclude) {
  return lift_rgbd(view.image, depth, view.intrinsics, view.pose, view_id, exclude);
}

Projection project_cloud(const PointCloud& cloud, const Intrinsics& intr, const CameraPose& pose) {
  Projection out{Image(intr.width, intr.height), DepthMap(intr.width, intr.height),
                 CoverageMask(intr.width, intr.height), {}};
  out.point_index.assign(out.mask.covered.size(), -1);
  std::vector<std::size_t> winner(out.mask.covered.size(), std::numeric_limits<std::size_t>::max());
  const Mat3 rt = pose.rotation.transpose();

  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const Vec3 p = rt * (cloud.positions[k] - pose.translation);
    const auto px = camera_to_pixel(intr, p);
    if (!px) continue;
    const double fu = std::floor(px->x() + 0.5), fv = std::floor(px->y() + 0.5);
    if (!(fu >= 0.0 && fu < intr.width && fv >= 0.0 && fv < intr.height)) continue;
    const std::size_t idx = out.mask.index(static_cast<int>(fu), static_cast<int>(fv));
    if (winner[idx] == std::numeric_limits<std::size_t>::max() || p.z() < out.mask.ref_depth[idx]) {
      winner[idx] = k;
      out.mask.ref_depth[idx] = p.z();
    }
  }

  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const std::size_t idx = out.mask.index(u, v);
      if (winner[idx] == std::numeric_limits<std::size_t>::max()) continue;
      out.mask.covered[idx] = 1;
      out.point_index[idx] = static_cast<std::int64_t>(winner[idx]);
      out.depth.set(u, v, out.mask.ref_depth[idx]);
      out.image.set(u, v, cloud.colors[winner[idx]]);
    }
  }
  return out;
}

CoverageMask dilate_mask(const CoverageMask& mask, int radius) {
  if (radius < 0) throw std::invalid_argument("dilation radius must be non-negative");
  CoverageMask out = mask;
  if (radius == 0) return out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.is_covered(x, y)) continue;
      int best_cheb = radius + 1, best_sq = 0;
      double best_depth = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= mask.height) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= mask.width || !mask.is_covered(xx, yy)) continue;
          const int cheb = std::max(std::abs(dx), std::abs(dy));
          const int sq = dx * dx + dy * dy;
          if (cheb < best_cheb || (cheb == best_cheb && sq < best_sq)) {
            best_cheb = cheb;
            best_sq = sq;
            best_depth = mask.ref_depth[mask.index(xx, yy)];
          }
        }
      }
      if (best_cheb <= radius) {
        const std::size_t idx = out.index(x, y);
        out.covered[idx] = 1;
        out.ref_depth[idx] = best_depth;
      }
    }
  }
  return out;
}

}  // namespace pano3d
