#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pano3d/geometry.hpp"
#include "pano3d/pointcloud.hpp"

namespace pano3d::synth {

enum Face : int { PosX = 0, NegX = 1, Floor = 2, Ceiling = 3, PosZ = 4, NegZ = 5 };

/// Axis-aligned box room centered on the world origin, seen from inside.
/// Faces are ordered +x, -x, +y (floor, since +y points down), -y (ceiling), +z, -z.
struct BoxScene {
  Vec3 half_extents{2.0, 1.5, 2.0};
  std::array<Color, 6> face_colors{Color(0.80, 0.35, 0.30), Color(0.30, 0.65, 0.35), Color(0.55, 0.45, 0.30),
                                   Color(0.85, 0.85, 0.80), Color(0.30, 0.40, 0.80), Color(0.75, 0.70, 0.25)};
  /// Checker squares along each face edge; 0 gives flat faces.
  int checker_count = 4;
  /// Brightness multiplier applied to the dark checker squares.
  double checker_dark = 0.7;

  void validate() const;
  double diagonal() const { return 2.0 * half_extents.norm(); }
  /// Distance from p to the nearest face plane (p inside the box).
  double distance_to_surface(const Vec3& p) const;
};

struct Hit {
  double distance = 0.0;
  Face face = PosZ;
  Color color = Color::Zero();
};

/// Nearest face hit along origin + t * dir (t > 0). `origin` must lie strictly inside the box.
Hit cast_ray(const BoxScene& scene, const Vec3& origin, const Vec3& dir);

struct EquirectRender {
  EquirectImage image;
  DepthMap radial_depth;  // distance along the ray, not z-depth
};

/// Ray casts every pixel-center direction from the origin.
EquirectRender render_scene_equirect(const BoxScene& scene, int pano_w, int pano_h);

struct PerspectiveRender {
  Image image;
  DepthMap depth;  // z-depth along camera +z
};

/// Ray casts every pixel from the pose center (translation may be non-zero).
PerspectiveRender render_scene_perspective(const BoxScene& scene, const CameraPose& pose, const Intrinsics& intr);

struct PerturbResult {
  std::vector<DepthMap> depths;
  std::vector<double> scales;
};

/// Multiplies every valid depth of view i by scales[i].
std::vector<DepthMap> perturb_depths(const std::vector<DepthMap>& depths, const std::vector<double>& scales);

/// Draws scales uniformly from [lo, hi] with a seeded generator. When
/// anchor_first is set, view 0 keeps scale 1 and defines the world scale.
PerturbResult perturb_depths_seeded(const std::vector<DepthMap>& depths, std::uint64_t seed, double lo, double hi,
                                    bool anchor_first = true);

}  // namespace pano3d::synth
