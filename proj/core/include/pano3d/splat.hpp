#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pano3d/geometry.hpp"
#include "pano3d/image.hpp"
#include "pano3d/pointcloud.hpp"

namespace pano3d::splat {

/// Isotropic Gaussian with a fixed center. Opacity and scale are stored as
/// unconstrained parameters: opacity = sigmoid(opacity_logit), sigma = exp(log_scale).
struct Gaussian {
  Vec3 position = Vec3::Zero();
  Color color = Color::Zero();
  double opacity_logit = 0.0;
  double log_scale = 0.0;

  double opacity() const { return 1.0 / (1.0 + std::exp(-opacity_logit)); }
  double sigma() const { return std::exp(log_scale); }
};

struct GaussianCloud {
  std::vector<Gaussian> gaussians;
  Color background = Color::Zero();

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

double logit(double p);

/// One Gaussian per point: color copied, opacity 0.8, sigma = mean distance
/// to the knn nearest points clamped to [1e-4, 0.1] x bounding-box diagonal.
GaussianCloud init_gaussians(const PointCloud& omega, int knn, const Color& background);

/// Rasterization constants.
inline constexpr double kMinDepth = 1e-6;
inline constexpr double kFootprintSigmas = 3.0;
inline constexpr double kMaxAlpha = 0.999;
inline constexpr double kMinTransmittance = 1e-4;

/// Front-to-back splatting. Each Gaussian covers the pixels within
/// 3 sigma_s (Chebyshev) of its projected center, sigma_s = fx * sigma / z;
/// per pixel the covering Gaussians are composited in ascending z (ties by
/// index) with alpha = min(opacity * exp(-r^2 / (2 sigma_s^2)), 0.999) until
/// transmittance drops below 1e-4; the rest goes to the background.
Image render(const GaussianCloud& cloud, const CameraPose& pose, const Intrinsics& intr);

struct GaussianGrad {
  Color color = Color::Zero();
  double opacity_logit = 0.0;
  double log_scale = 0.0;
};

struct RenderGrads {
  double loss = 0.0;
  Image image;
  std::vector<GaussianGrad> grads;  // one per Gaussian; positions are fixed
  std::size_t valid_pixels = 0;
};

/// Masked L1 loss, mean over valid pixels and channels, with analytic
/// gradients through the compositing chain.
RenderGrads render_with_grads(const GaussianCloud& cloud, const CameraPose& pose, const Intrinsics& intr,
                              const Image& target, const Mask& valid);

struct SupervisionItem {
  Image image;
  Mask valid;
  CameraPose pose;
  Intrinsics intrinsics;
};

struct SupervisionSet {
  std::vector<SupervisionItem> items;
  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

/// Projects omega into every pose; the raw coverage becomes the validity mask.
SupervisionSet augment_supervision(const PointCloud& omega, const std::vector<CameraPose>& poses,
                                   const Intrinsics& intr);

struct LearningRates {
  double color = 0.002;
  double opacity = 0.002;
  double scale = 0.001;
};

enum class Optimizer { GradientDescent, Adam };

struct OptimizeOptions {
  LearningRates lr;
  int iterations = 200;
  Optimizer method = Optimizer::Adam;
};

/// Raised when an optimization step produces a non-finite loss.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, int iteration) : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct OptimizeResult {
  GaussianCloud cloud;
  std::vector<double> loss_history;
};

/// Round-robin over the supervision items, one item per iteration. Only
/// color, opacity_logit and log_scale change; colors stay clamped to [0,1].
OptimizeResult optimize(GaussianCloud cloud, const SupervisionSet& supervision, const OptimizeOptions& options);

}  // namespace pano3d::splat
