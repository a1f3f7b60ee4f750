#include "pano3d/synth.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "pano3d/parallel.hpp"

namespace pano3d::synth {

void BoxScene::validate() const {
  if (!(half_extents.minCoeff() > 0.0)) throw std::invalid_argument("box half extents must be positive");
  if (checker_count < 0) throw std::invalid_argument("checker_count must be non-negative");
}

double BoxScene::distance_to_surface(const Vec3& p) const {
  return (half_extents - p.cwiseAbs()).cwiseAbs().minCoeff();
}

namespace {

// Face-local texture axes (indices into x,y,z) for the checkerboard.
constexpr std::array<std::array<int, 2>, 3> kTextureAxes{{{2, 1}, {0, 2}, {0, 1}}};

Color face_color(const BoxScene& scene, Face face, const Vec3& p) {
  const Color& base = scene.face_colors[face];
  if (scene.checker_count == 0) return base;
  const int axis = face / 2;
  int parity = 0;
  for (int a : kTextureAxes[axis]) {
    const double h = scene.half_extents[a];
    const double t = (p[a] + h) / (2.0 * h) * scene.checker_count;
    parity += static_cast<int>(std::floor(t));
  }
  return (parity & 1) ? Color(base * scene.checker_dark) : base;
}

}  // namespace

Hit cast_ray(const BoxScene& scene, const Vec3& origin, const Vec3& dir) {
  if (!((origin.cwiseAbs() - scene.half_extents).maxCoeff() < 0.0))
    throw std::invalid_argument("ray origin must lie strictly inside the box");
  Hit hit;
  hit.distance = std::numeric_limits<double>::infinity();
  const double len = dir.norm();
  if (!(len > 0.0)) throw std::invalid_argument("ray direction must be non-zero");
  const Vec3 d = dir / len;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) continue;
    const double plane = d[axis] > 0.0 ? scene.half_extents[axis] : -scene.half_extents[axis];
    const double t = (plane - origin[axis]) / d[axis];
    if (t > 0.0 && t < hit.distance) {
      hit.distance = t;
      hit.face = static_cast<Face>(2 * axis + (d[axis] > 0.0 ? 0 : 1));
    }
  }
  Vec3 p = origin + hit.distance * d;
  // snap the hit coordinate onto its plane so the texture lookup is exact
  const int axis = hit.face / 2;
  p[axis] = (hit.face % 2 == 0) ? scene.half_extents[axis] : -scene.half_extents[axis];
  hit.color = face_color(scene, hit.face, p);
  return hit;
}

EquirectRender render_scene_equirect(const BoxScene& scene, int pano_w, int pano_h) {
  scene.validate();
  if (pano_h < 1 || pano_w != 2 * pano_h) throw std::invalid_argument("panorama must satisfy width == 2 * height");
  Image img(pano_w, pano_h);
  DepthMap depth(pano_w, pano_h);
  parallel_rows(pano_h, [&](int j) {
    for (int i = 0; i < pano_w; ++i) {
      const Hit hit = cast_ray(scene, Vec3::Zero(), equirect_to_dir(i + 0.5, j + 0.5, pano_w, pano_h));
      img.set(i, j, hit.color);
      depth.set(i, j, hit.distance);
    }
  });
  return {EquirectImage(std::move(img)), std::move(depth)};
}

PerspectiveRender render_scene_perspective(const BoxScene& scene, const CameraPose& pose, const Intrinsics& intr) {
  scene.validate();
  intr.validate();
  PerspectiveRender out{Image(intr.width, intr.height), DepthMap(intr.width, intr.height)};
  parallel_rows(intr.height, [&](int v) {
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 ray_cam = pixel_to_ray(intr, u, v);
      const Hit hit = cast_ray(scene, pose.translation, pose.rotation * ray_cam);
      out.image.set(u, v, hit.color);
      out.depth.set(u, v, hit.distance * ray_cam.z());
    }
  });
  return out;
}

std::vector<DepthMap> perturb_depths(const std::vector<DepthMap>& depths, const std::vector<double>& scales) {
  if (depths.size() != scales.size())
    throw std::invalid_argument("perturb_depths: expected one scale per depth map");
  std::vector<DepthMap> out = depths;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(scales[k] > 0.0) || !std::isfinite(scales[k]))
      throw std::invalid_argument("perturb_depths: scales must be finite and positive");
    if (scales[k] == 1.0) continue;
    for (std::size_t i = 0; i < out[k].values.size(); ++i)
      if (out[k].valid[i]) out[k].values[i] *= scales[k];
  }
  return out;
}

PerturbResult perturb_depths_seeded(const std::vector<DepthMap>& depths, std::uint64_t seed, double lo, double hi,
                                    bool anchor_first) {
  if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("perturb_depths: need 0 < lo <= hi");
  // mt19937_64 output is fully specified, so the drawn scales are portable
  std::mt19937_64 rng(seed);
  PerturbResult result;
  result.scales.reserve(depths.size());
  for (std::size_t k = 0; k < depths.size(); ++k) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    result.scales.push_back((anchor_first && k == 0) ? 1.0 : lo + (hi - lo) * unit);
  }
  result.depths = perturb_depths(depths, result.scales);
  return result;
}

}  // namespace pano3d::synth
