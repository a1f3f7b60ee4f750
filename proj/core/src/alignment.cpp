#include "pano3d/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pano3d {
namespace {

void check_dims(const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr) {
  if (depth.width != mask.width || depth.height != mask.height)
    throw std::invalid_argument("alignment: depth and mask dimensions differ");
  if (intr.width != depth.width || intr.height != depth.height)
    throw std::invalid_argument("alignment: intrinsics do not match depth dimensions");
}

struct Sample {
  double depth;
  double ref;
  double weight;  // ray length factor
};

std::vector<Sample> overlap_samples(const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr) {
  check_dims(depth, mask, intr);
  std::vector<Sample> samples;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const std::size_t i = depth.index(u, v);
      if (!mask.covered[i] || !depth.valid[i]) continue;
      samples.push_back({depth.values[i], mask.ref_depth[i], intr.ray_length_factor(u, v)});
    }
  }
  if (samples.empty()) throw AlignmentError("alignment impossible: view does not overlap the reference cloud");
  return samples;
}

AlignmentLoss evaluate(double scale, const std::vector<Sample>& samples) {
  double loss = 0.0, grad = 0.0;
  for (const auto& s : samples) {
    const double r = scale * s.depth - s.ref;
    loss += s.weight * std::abs(r);
    if (r > 0.0)
      grad += s.weight * s.depth;
    else if (r < 0.0)
      grad -= s.weight * s.depth;
  }
  const double n = static_cast<double>(samples.size());
  return {loss / n, grad / n, samples.size()};
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

AlignmentLoss alignment_loss(double scale, const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr) {
  if (!(scale > 0.0)) throw std::invalid_argument("alignment: scale must be positive");
  return evaluate(scale, overlap_samples(depth, mask, intr));
}

AlignmentResult align_scale_gd(const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr,
                               const GdOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("alignment: step must be positive");
  if (options.max_iters < 0) throw std::invalid_argument("alignment: max_iters must be non-negative");
  const auto samples = overlap_samples(depth, mask, intr);

  double mean_wd = 0.0;
  for (const auto& s : samples) mean_wd += s.weight * s.depth;
  mean_wd /= static_cast<double>(samples.size());

  AlignmentResult result;
  result.converged = false;
  double d = 1.0;
  double step = options.step;
  int prev_sign = 0;
  for (int it = 0; it < options.max_iters; ++it) {
    const double g = evaluate(d, samples).gradient / mean_wd;
    const int s = sign(g);
    if (s == 0) {
      result.converged = true;
      break;
    }
    if (prev_sign != 0 && s != prev_sign) step *= 0.5;
    prev_sign = s;
    const double delta = -step * g;
    result.iterations = it + 1;
    if (d + delta <= 0.0) {
      d = 1e-6;
      break;
    }
    d += delta;
    if (std::abs(delta) < options.tol) {
      result.converged = true;
      break;
    }
  }
  if (options.max_iters == 0) result.converged = evaluate(d, samples).gradient == 0.0;
  result.scale = d;
  result.final_loss = evaluate(d, samples).loss;
  return result;
}

AlignmentResult align_scale_median(const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr) {
  const auto samples = overlap_samples(depth, mask, intr);
  struct Ratio {
    double value;
    double weight;
  };
  std::vector<Ratio> ratios;
  ratios.reserve(samples.size());
  double total = 0.0;
  for (const auto& s : samples) {
    ratios.push_back({s.ref / s.depth, s.weight * s.depth});
    total += s.weight * s.depth;
  }
  std::stable_sort(ratios.begin(), ratios.end(), [](const Ratio& a, const Ratio& b) { return a.value < b.value; });

  double cumulative = 0.0;
  double median = ratios.back().value;
  for (const auto& r : ratios) {
    cumulative += r.weight;
    if (cumulative >= 0.5 * total) {
      median = r.value;
      break;
    }
  }
  AlignmentResult result;
  result.scale = median;
  result.final_loss = evaluate(median, samples).loss;
  result.iterations = 0;
  result.converged = true;
  return result;
}

}  // namespace pano3d
