#include "pano3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pano3d/parallel.hpp"

namespace pano3d {

using std::numbers::pi;

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (width < 1 || height < 1) throw std::invalid_argument("intrinsics: image size must be at least 1x1");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    throw std::invalid_argument("intrinsics: principal point outside the image");
}

double Intrinsics::ray_length_factor(double u, double v) const {
  const double x = (u + 0.5 - cx) / fx;
  const double y = (v + 0.5 - cy) / fy;
  return std::sqrt(x * x + y * y + 1.0);
}

double CameraPose::orthonormality_error() const {
  return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

EquirectImage::EquirectImage(Image pixels) : pixels_(std::move(pixels)) {
  if (pixels_.empty() || pixels_.width() != 2 * pixels_.height())
    throw std::invalid_argument("equirectangular image must have width == 2 * height, got " +
                                std::to_string(pixels_.width()) + "x" + std::to_string(pixels_.height()));
}

Intrinsics Trajectory::intrinsics() const { return intrinsics_from_fov(fov_deg, view_width, view_height); }

double deg_to_rad(double deg) { return deg * pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / pi; }

Intrinsics intrinsics_from_fov(double fov_deg, int width, int height) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0))
    throw std::invalid_argument("field of view must lie in (0, 180) degrees, got " + std::to_string(fov_deg));
  if (width < 1 || height < 1) throw std::invalid_argument("view dimensions must be at least 1x1");
  Intrinsics k;
  k.fx = k.fy = (width / 2.0) / std::tan(deg_to_rad(fov_deg) / 2.0);
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.width = width;
  k.height = height;
  return k;
}

CameraPose make_pose(double yaw_rad, double pitch_rad) {
  if (!std::isfinite(yaw_rad)) throw std::invalid_argument("yaw must be finite");
  if (!(std::abs(pitch_rad) < pi / 2)) throw std::invalid_argument("pitch must lie in (-pi/2, pi/2)");
  const double cy = std::cos(yaw_rad), sy = std::sin(yaw_rad);
  const double cp = std::cos(pitch_rad), sp = std::sin(pitch_rad);
  Mat3 yaw;
  yaw << cy, 0, sy,
         0, 1, 0,
         -sy, 0, cy;
  Mat3 pitch;
  pitch << 1, 0, 0,
           0, cp, -sp,
           0, sp, cp;
  CameraPose pose;
  pose.rotation = yaw * pitch;
  pose.translation.setZero();
  return pose;
}

Trajectory generate_trajectory(int n_yaw, const std::vector<double>& pitches_deg, double fov_deg,
                               int view_width, int view_height) {
  if (n_yaw < 1) throw std::invalid_argument("trajectory needs at least one yaw step");
  if (pitches_deg.empty()) throw std::invalid_argument("trajectory needs at least one pitch ring");
  for (double p : pitches_deg)
    if (!(std::abs(p) < 90.0)) throw std::invalid_argument("pitch rings must lie in (-90, 90) degrees");
  // validates fov and size
  (void)intrinsics_from_fov(fov_deg, view_width, view_height);

  std::vector<double> rings = pitches_deg;
  std::stable_sort(rings.begin(), rings.end(), [](double a, double b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
    return a < b;
  });

  Trajectory t;
  t.fov_deg = fov_deg;
  t.view_width = view_width;
  t.view_height = view_height;
  for (double pitch : rings) {
    for (int k = 0; k < n_yaw; ++k) {
      const double yaw = k * (360.0 / n_yaw);
      t.poses.push_back(make_pose(deg_to_rad(yaw), deg_to_rad(pitch)));
      t.yaw_deg.push_back(yaw);
      t.pitch_deg.push_back(pitch);
    }
  }
  return t;
}

Vec3 pixel_to_ray(const Intrinsics& intr, double u, double v) {
  return Vec3((u + 0.5 - intr.cx) / intr.fx, (v + 0.5 - intr.cy) / intr.fy, 1.0).normalized();
}

std::optional<Vec2> camera_to_pixel(const Intrinsics& intr, const Vec3& p_cam, double min_z) {
  if (!(p_cam.z() > min_z)) return std::nullopt;
  return Vec2(intr.fx * p_cam.x() / p_cam.z() + intr.cx - 0.5, intr.fy * p_cam.y() / p_cam.z() + intr.cy - 0.5);
}

bool in_frustum(const Intrinsics& intr, const Vec3& dir_cam) {
  if (!(dir_cam.z() > 0.0)) return false;
  const double u = intr.fx * dir_cam.x() / dir_cam.z() + intr.cx;
  const double v = intr.fy * dir_cam.y() / dir_cam.z() + intr.cy;
  return u >= 0.0 && u <= intr.width && v >= 0.0 && v <= intr.height;
}

Vec2 dir_to_equirect(const Vec3& dir, int pano_w, int pano_h) {
  const double n = dir.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("direction must be a non-zero finite vector");
  const Vec3 d = dir / n;
  const double lon = std::atan2(d.x(), d.z());
  const double lat = std::asin(std::clamp(-d.y(), -1.0, 1.0));
  return {(lon / (2.0 * pi) + 0.5) * pano_w, (0.5 - lat / pi) * pano_h};
}

Vec3 equirect_to_dir(double u, double v, int pano_w, int pano_h) {
  const double lon = (u / pano_w - 0.5) * 2.0 * pi;
  const double lat = (0.5 - v / pano_h) * pi;
  const double cl = std::cos(lat);
  return {cl * std::sin(lon), -std::sin(lat), cl * std::cos(lon)};
}

namespace {

int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

Color lerp_pixels(const Image& img, int x0, int x1, int y0, int y1, double fx, double fy) {
  const Color c00 = img.at(x0, y0), c10 = img.at(x1, y0);
  const Color c01 = img.at(x0, y1), c11 = img.at(x1, y1);
  return (1 - fy) * ((1 - fx) * c00 + fx * c10) + fy * ((1 - fx) * c01 + fx * c11);
}

}  // namespace

Color sample_equirect(const EquirectImage& pano, double u, double v) {
  const Image& img = pano.pixels();
  const int w = img.width(), h = img.height();
  const double x = u - 0.5, y = v - 0.5;
  const double xf = std::floor(x), yf = std::floor(y);
  const int xi = static_cast<int>(xf), yi = static_cast<int>(yf);
  const double ax = x - xf, ay = y - yf;
  return lerp_pixels(img, wrap(xi, w), wrap(xi + 1, w), std::clamp(yi, 0, h - 1), std::clamp(yi + 1, 0, h - 1), ax,
                     ay);
}

Color sample_bilinear_clamped(const Image& img, double u, double v) {
  const int w = img.width(), h = img.height();
  const double x = std::clamp(u, 0.0, w - 1.0), y = std::clamp(v, 0.0, h - 1.0);
  const int x0 = std::min(static_cast<int>(x), w - 1), y0 = std::min(static_cast<int>(y), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  return lerp_pixels(img, x0, x1, y0, y1, x - x0, y - y0);
}

PerspectiveView extract_perspective(const EquirectImage& pano, const CameraPose& pose, const Intrinsics& intr) {
  intr.validate();
  PerspectiveView view{Image(intr.width, intr.height), pose, intr};
  parallel_rows(intr.height, [&](int j) {
    double* row = view.image.row(j);
    for (int i = 0; i < intr.width; ++i) {
      const Vec3 ray = pose.rotation * pixel_to_ray(intr, i, j);
      const Vec2 uv = dir_to_equirect(ray, pano.width(), pano.height());
      const Color c = sample_equirect(pano, uv.x(), uv.y());
      row[3 * i + 0] = c[0];
      row[3 * i + 1] = c[1];
      row[3 * i + 2] = c[2];
    }
  });
  return view;
}

RestitchResult restitch_panorama(const std::vector<PerspectiveView>& views, int pano_w, int pano_h) {
  if (views.empty()) throw std::invalid_argument("restitch needs at least one view");
  Image out(pano_w, pano_h);
  Mask covered(pano_w, pano_h);
  parallel_rows(pano_h, [&](int j) {
    for (int i = 0; i < pano_w; ++i) {
      const Vec3 dir = equirect_to_dir(i + 0.5, j + 0.5, pano_w, pano_h);
      Color sum = Color::Zero();
      int hits = 0;
      for (const auto& view : views) {
        const Vec3 d_cam = view.pose.rotation.transpose() * dir;
        if (!in_frustum(view.intrinsics, d_cam)) continue;
        const auto px = camera_to_pixel(view.intrinsics, d_cam, 0.0);
        sum += sample_bilinear_clamped(view.image, px->x(), px->y());
        ++hits;
      }
      if (hits > 0) {
        out.set(i, j, sum / hits);
        covered.set(i, j, true);
      }
    }
  });
  RestitchResult result{EquirectImage(std::move(out)), covered, 0.0};
  result.coverage = static_cast<double>(covered.count()) / (static_cast<double>(pano_w) * pano_h);
  return result;
}

}  // namespace pano3d
