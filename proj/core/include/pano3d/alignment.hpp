#pragma once

#include <stdexcept>
#include <string>

#include "pano3d/geometry.hpp"
#include "pano3d/pointcloud.hpp"

namespace pano3d {

/// Raised when a view shares no valid pixels with the reference cloud, so no
/// depth scale can be estimated. view_index is -1 when unknown.
class AlignmentError : public std::runtime_error {
 public:
  explicit AlignmentError(const std::string& what, int view_index = -1)
      : std::runtime_error(what), view_index_(view_index) {}
  int view_index() const { return view_index_; }

 private:
  int view_index_;
};

struct AlignmentResult {
  double scale = 1.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct AlignmentLoss {
  double loss = 0.0;
  double gradient = 0.0;
  std::size_t count = 0;
};

/// Mean ray-weighted L1 residual between the scaled depth and the reference
/// depth over V = {covered and valid}:
///   loss = 1/|V| sum w_p |d D_p - Dref_p|,  w_p = ray length factor of p,
/// so every summand is the 3D distance between the two points on the shared ray.
/// gradient = 1/|V| sum w_p D_p sign(d D_p - Dref_p) with sign(0) = 0.
AlignmentLoss alignment_loss(double scale, const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr);

struct GdOptions {
  double step = 0.05;
  int max_iters = 500;
  double tol = 1e-7;
};

/// Gradient descent on alignment_loss starting from d = 1. The gradient is
/// divided by mean(w D) over V so steps are measured in scale-ratio units;
/// the step halves whenever the gradient changes sign.
AlignmentResult align_scale_gd(const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr,
                               const GdOptions& options = {});

/// Exact minimizer of alignment_loss: the weighted lower median of
/// Dref_p / D_p with weights w_p D_p.
AlignmentResult align_scale_median(const DepthMap& depth, const CoverageMask& mask, const Intrinsics& intr);

}  // namespace pano3d
