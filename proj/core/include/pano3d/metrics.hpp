#pragma once

#include <limits>

#include "pano3d/image.hpp"

namespace pano3d {

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t n_pixels = 0;
};

/// Cap used when an infinite PSNR is written as text.
inline constexpr double kPsnrTextCap = 99.0;

/// 10 log10(1 / MSE) over all channels of the valid pixels (all pixels when
/// mask is null). Identical inputs give +infinity.
double psnr(const Image& a, const Image& b, const Mask* mask = nullptr);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, averaged over channels and all fully-inside window positions.
double ssim(const Image& a, const Image& b);

/// psnr with mask + unmasked ssim.
MetricReport evaluate_images(const Image& rendered, const Image& reference, const Mask* mask = nullptr);

}  // namespace pano3d
