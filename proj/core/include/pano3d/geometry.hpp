#pragma once

// Camera conventions used throughout pano3d:
//   camera frame  +x right, +y down, +z forward
//   world frame   camera frame of the first trajectory pose (all centers coincide)
//   pixel (i, j)  covers [i, i+1) x [j, j+1); its center sits at (i+0.5, j+0.5)
//
// Perspective pixel coordinates passed to pixel_to_ray / returned by
// camera_to_pixel are "index" coordinates: u = i addresses the center of
// column i. Panorama coordinates are continuous: u = i + 0.5 is the center of
// column i.

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "pano3d/image.hpp"

namespace pano3d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument unless fx, fy > 0 and the principal point lies inside the image.
  void validate() const;

  /// Ray-length factor of pixel (u, v): |((u+0.5-cx)/fx, (v+0.5-cy)/fy, 1)|.
  double ray_length_factor(double u, double v) const;

  bool operator==(const Intrinsics&) const = default;
};

/// Rotation is camera-to-world: p_world = rotation * p_cam + translation.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
  Vec3 to_camera(const Vec3& p_world) const { return rotation.transpose() * (p_world - translation); }

  /// Max-abs entry of R^T R - I.
  double orthonormality_error() const;

  bool operator==(const CameraPose& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

/// RGB panorama with width == 2 * height; horizontally periodic.
class EquirectImage {
 public:
  EquirectImage() = default;
  /// Throws std::invalid_argument unless width == 2 * height (and non-empty).
  explicit EquirectImage(Image pixels);

  const Image& pixels() const { return pixels_; }
  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }

 private:
  Image pixels_;
};

struct PerspectiveView {
  Image image;
  CameraPose pose;
  Intrinsics intrinsics;
};

struct Trajectory {
  std::vector<CameraPose> poses;
  std::vector<double> yaw_deg;
  std::vector<double> pitch_deg;
  double fov_deg = 90.0;
  int view_width = 0;
  int view_height = 0;

  Intrinsics intrinsics() const;
};

double deg_to_rad(double deg);
double rad_to_deg(double rad);

Intrinsics intrinsics_from_fov(double fov_deg, int width, int height);

/// R = R_yaw(yaw) * R_pitch(pitch). The yaw factor rotates about +y
/// ([[c,0,s],[0,1,0],[-s,0,c]]); positive pitch tilts the optical axis up
/// (towards -y). Translation is zero.
CameraPose make_pose(double yaw_rad, double pitch_rad);

/// Pitch rings ordered by |pitch| (ties: lower pitch first), so the middle
/// ring comes first, then bottom, then top. Within a ring yaw_k = k * 360 / n_yaw.
Trajectory generate_trajectory(int n_yaw, const std::vector<double>& pitches_deg, double fov_deg,
                               int view_width, int view_height);

/// Unit ray through pixel index (u, v) in the camera frame.
Vec3 pixel_to_ray(const Intrinsics& intr, double u, double v);

/// Projects a camera-frame point to pixel index coordinates; nullopt when z <= min_z.
std::optional<Vec2> camera_to_pixel(const Intrinsics& intr, const Vec3& p_cam, double min_z = 1e-6);

/// True when the camera-frame direction falls inside the image rectangle
/// [0, width] x [0, height] (continuous coordinates).
bool in_frustum(const Intrinsics& intr, const Vec3& dir_cam);

/// World direction -> continuous panorama coordinates.
/// lon = atan2(x, z), lat = asin(-y), u = (lon/2pi + 0.5) W, v = (0.5 - lat/pi) H.
Vec2 dir_to_equirect(const Vec3& dir, int pano_w, int pano_h);

/// Inverse of dir_to_equirect: continuous panorama coordinates -> unit world direction.
Vec3 equirect_to_dir(double u, double v, int pano_w, int pano_h);

/// Bilinear sample at continuous coordinates, wrapping horizontally and clamping vertically.
Color sample_equirect(const EquirectImage& pano, double u, double v);

/// Bilinear sample of a perspective image at pixel index coordinates (edge clamped).
Color sample_bilinear_clamped(const Image& img, double u, double v);

PerspectiveView extract_perspective(const EquirectImage& pano, const CameraPose& pose,
                                    const Intrinsics& intr);

struct RestitchResult {
  EquirectImage panorama;
  Mask covered;
  double coverage = 0.0;
};

/// Averages, for every panorama pixel, the colors of all views whose frustum
/// contains its direction. Uncovered pixels are black and unset in `covered`.
RestitchResult restitch_panorama(const std::vector<PerspectiveView>& views, int pano_w, int pano_h);

}  // namespace pano3d
