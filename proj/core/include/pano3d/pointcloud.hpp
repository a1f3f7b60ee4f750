#pragma once

#include <cstdint>
#include <vector>

#include "pano3d/geometry.hpp"
#include "pano3d/image.hpp"

namespace pano3d {

/// z-depth (distance along camera +z) per pixel. Invalid pixels carry 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0), valid(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  double at(int x, int y) const { return values[index(x, y)]; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  /// Stores d and marks the pixel valid iff d is finite and > 0.
  void set(int x, int y, double d);
  std::size_t valid_count() const;

  bool operator==(const DepthMap&) const = default;
};

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Color> colors;
  std::vector<int> view_ids;  // -1 when the source view is unknown

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  void push_back(const Vec3& p, const Color& c, int view_id) {
    positions.push_back(p);
    colors.push_back(c);
    view_ids.push_back(view_id);
  }
  void append(const PointCloud& other);
  void reserve(std::size_t n) {
    positions.reserve(n);
    colors.reserve(n);
    view_ids.reserve(n);
  }
};

/// Pixels of a view explained by an existing cloud, with the depth of the
/// nearest projected point.
struct CoverageMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> covered;
  std::vector<double> ref_depth;

  CoverageMask() = default;
  CoverageMask(int w, int h)
      : width(w), height(h), covered(static_cast<std::size_t>(w) * h, 0), ref_depth(static_cast<std::size_t>(w) * h, 0.0) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool is_covered(int x, int y) const { return covered[index(x, y)] != 0; }
  std::size_t covered_count() const;
  Mask as_mask() const;
};

/// Back-projects every valid-depth pixel (skipping pixels covered by
/// `exclude`) into world space: p = R * D * ((u+0.5-cx)/fx, (v+0.5-cy)/fy, 1) + T.
PointCloud lift_rgbd(const Image& image, const DepthMap& depth, const Intrinsics& intr, const CameraPose& pose,
                     int view_id = 0, const CoverageMask* exclude = nullptr);

/// Convenience overload taking image, intrinsics and pose from the view.
PointCloud lift_rgbd(const PerspectiveView& view, const DepthMap& depth, int view_id = 0,
                     const CoverageMask* exclude = nullptr);

struct Projection {
  Image image;
  DepthMap depth;
  CoverageMask mask;
  /// Index of the winning point per pixel, -1 where uncovered.
  std::vector<std::int64_t> point_index;
};

/// Nearest-pixel z-buffered point projection. Points with camera z <= 1e-6 are
/// skipped; the smallest z wins and ties go to the lowest point index.
Projection project_cloud(const PointCloud& cloud, const Intrinsics& intr, const CameraPose& pose);

/// Chebyshev dilation. Newly covered pixels take the depth of the nearest
/// originally covered pixel (Chebyshev, then Euclidean distance, then scan order).
CoverageMask dilate_mask(const CoverageMask& mask, int radius);

}  // namespace pano3d
