#include "pano3d/metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pano3d {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    taps[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Valid-mode separable filtering of a single-channel w x h plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::array<double, kWindow>& g) {
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * plane[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

void check_same_size(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw std::invalid_argument("metrics: image dimensions differ");
}

}  // namespace

double psnr(const Image& a, const Image& b, const Mask* mask) {
  check_same_size(a, b);
  if (mask != nullptr && (mask->width != a.width() || mask->height != a.height()))
    throw std::invalid_argument("psnr: mask dimensions differ");
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    if (mask != nullptr && !mask->bits[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = a.data()[3 * i + c] - b.data()[3 * i + c];
      sse += d * d;
    }
    ++n;
  }
  if (n == 0) throw std::invalid_argument("psnr: no valid pixels to compare");
  const double mse = sse / (3.0 * static_cast<double>(n));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  check_same_size(a, b);
  const int w = a.width(), h = a.height();
  if (w < kWindow || h < kWindow) throw std::invalid_argument("ssim: images must be at least 11x11");
  const auto g = gaussian_taps();
  const std::size_t n = a.pixel_count();

  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = a.data()[3 * i + c];
      pb[i] = b.data()[3 * i + c];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, w, h, g);
    const auto mu_b = filter_valid(pb, w, h, g);
    const auto e_aa = filter_valid(paa, w, h, g);
    const auto e_bb = filter_valid(pbb, w, h, g);
    const auto e_ab = filter_valid(pab, w, h, g);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (var_a + var_b + kC2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricReport evaluate_images(const Image& rendered, const Image& reference, const Mask* mask) {
  MetricReport r;
  r.psnr = psnr(rendered, reference, mask);
  r.ssim = ssim(rendered, reference);
  r.n_pixels = mask != nullptr ? mask->count() : rendered.pixel_count();
  return r;
}

}  // namespace pano3d
