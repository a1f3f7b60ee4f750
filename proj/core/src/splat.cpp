#include "pano3d/splat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "pano3d/knn.hpp"
#include "pano3d/parallel.hpp"

namespace pano3d::splat {

double logit(double p) { return std::log(p / (1.0 - p)); }

GaussianCloud init_gaussians(const PointCloud& omega, int knn, const Color& background) {
  if (omega.empty()) throw std::invalid_argument("init_gaussians: point cloud is empty");
  if (knn < 1) throw std::invalid_argument("init_gaussians: knn must be at least 1");

  Vec3 lo = omega.positions[0], hi = omega.positions[0];
  for (const auto& p : omega.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double diag = (hi - lo).norm();
  if (!(diag > 0.0)) diag = 1.0;
  const double min_sigma = 1e-4 * diag, max_sigma = 0.1 * diag;

  const auto dist = knn_mean_distances(omega.positions, knn);
  GaussianCloud cloud;
  cloud.background = background;
  cloud.gaussians.resize(omega.size());
  const double opacity_logit = logit(0.8);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    auto& g = cloud.gaussians[i];
    g.position = omega.positions[i];
    g.color = omega.colors[i];
    g.opacity_logit = opacity_logit;
    g.log_scale = std::log(std::clamp(dist[i], min_sigma, max_sigma));
  }
  return cloud;
}

namespace {

struct Splat {
  int id;
  double u, v, z;
  double sigma_s;
  double opacity;
  Color color;
  int x0, x1, y0, y1;

  std::size_t area() const { return static_cast<std::size_t>(x1 - x0 + 1) * static_cast<std::size_t>(y1 - y0 + 1); }
};

// Per-pixel depth-ordered lists of covering splats (CSR layout). Splats are
// sorted by (z, id) before binning, so each pixel list is already in
// compositing order.
class Rasterizer {
 public:
  Rasterizer(const GaussianCloud& cloud, const CameraPose& pose, const Intrinsics& intr, bool track_slots)
      : cloud_(cloud), intr_(intr) {
    const Mat3 rt = pose.rotation.transpose();
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      const Gaussian& g = cloud.gaussians[k];
      const Vec3 p = rt * (g.position - pose.translation);
      if (!(p.z() > kMinDepth)) continue;
      Splat s;
      s.id = static_cast<int>(k);
      s.z = p.z();
      s.u = intr.fx * p.x() / p.z() + intr.cx - 0.5;
      s.v = intr.fy * p.y() / p.z() + intr.cy - 0.5;
      s.sigma_s = intr.fx * g.sigma() / p.z();
      const double reach = kFootprintSigmas * s.sigma_s;
      const double fx0 = std::ceil(s.u - reach), fx1 = std::floor(s.u + reach);
      const double fy0 = std::ceil(s.v - reach), fy1 = std::floor(s.v + reach);
      if (!(fx1 >= 0.0 && fy1 >= 0.0 && fx0 <= intr.width - 1.0 && fy0 <= intr.height - 1.0)) continue;
      if (fx0 > fx1 || fy0 > fy1) continue;
      s.x0 = static_cast<int>(std::max(fx0, 0.0));
      s.x1 = static_cast<int>(std::min(fx1, intr.width - 1.0));
      s.y0 = static_cast<int>(std::max(fy0, 0.0));
      s.y1 = static_cast<int>(std::min(fy1, intr.height - 1.0));
      s.opacity = g.opacity();
      s.color = g.color;
      splats_.push_back(s);
    }
    std::stable_sort(splats_.begin(), splats_.end(), [](const Splat& a, const Splat& b) { return a.z < b.z; });

    const std::size_t npix = static_cast<std::size_t>(intr.width) * intr.height;
    offsets_.assign(npix + 1, 0);
    for (const auto& s : splats_)
      for (int y = s.y0; y <= s.y1; ++y)
        for (int x = s.x0; x <= s.x1; ++x) ++offsets_[pixel(x, y) + 1];
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());

    slot_splat_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    if (track_slots) {
      splat_slot_offsets_.assign(splats_.size() + 1, 0);
      for (std::size_t k = 0; k < splats_.size(); ++k)
        splat_slot_offsets_[k + 1] = splat_slot_offsets_[k] + splats_[k].area();
      splat_slots_.resize(splat_slot_offsets_.back());
    }
    for (std::size_t k = 0; k < splats_.size(); ++k) {
      const Splat& s = splats_[k];
      std::size_t t = track_slots ? splat_slot_offsets_[k] : 0;
      for (int y = s.y0; y <= s.y1; ++y)
        for (int x = s.x0; x <= s.x1; ++x) {
          const std::size_t slot = cursor[pixel(x, y)]++;
          slot_splat_[slot] = static_cast<int>(k);
          if (track_slots) splat_slots_[t++] = slot;
        }
    }
  }

  std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * intr_.width + x; }

  struct Contribution {
    std::size_t slot;
    double transmittance;  // before this splat
    double alpha;
    double r2;
    bool clamped;
  };

  // Composites pixel (x, y). When trace is non-null it receives every
  // contribution actually used. Returns the final transmittance.
  double composite(int x, int y, Color& out, std::vector<Contribution>* trace) const {
    const std::size_t p = pixel(x, y);
    double T = 1.0;
    Color c = Color::Zero();
    for (std::size_t slot = offsets_[p]; slot < offsets_[p + 1]; ++slot) {
      const Splat& s = splats_[slot_splat_[slot]];
      const double dx = x - s.u, dy = y - s.v;
      const double r2 = dx * dx + dy * dy;
      double alpha = s.opacity * std::exp(-r2 / (2.0 * s.sigma_s * s.sigma_s));
      const bool clamped = alpha > kMaxAlpha;
      if (clamped) alpha = kMaxAlpha;
      if (trace != nullptr) trace->push_back({slot, T, alpha, r2, clamped});
      c += (T * alpha) * s.color;
      T *= 1.0 - alpha;
      if (T < kMinTransmittance) break;
    }
    out = c + T * cloud_.background;
    return T;
  }

  const std::vector<Splat>& splats() const { return splats_; }
  std::size_t slot_count() const { return slot_splat_.size(); }
  const std::vector<std::size_t>& splat_slot_offsets() const { return splat_slot_offsets_; }
  const std::vector<std::size_t>& splat_slots() const { return splat_slots_; }
  int slot_splat(std::size_t slot) const { return slot_splat_[slot]; }

 private:
  const GaussianCloud& cloud_;
  const Intrinsics& intr_;
  std::vector<Splat> splats_;
  std::vector<std::size_t> offsets_;
  std::vector<int> slot_splat_;
  std::vector<std::size_t> splat_slot_offsets_;
  std::vector<std::size_t> splat_slots_;
};

}  // namespace

Image render(const GaussianCloud& cloud, const CameraPose& pose, const Intrinsics& intr) {
  intr.validate();
  Image out(intr.width, intr.height, cloud.background);
  if (cloud.empty()) return out;
  const Rasterizer raster(cloud, pose, intr, false);
  parallel_rows(intr.height, [&](int y) {
    double* row = out.row(y);
    Color c;
    for (int x = 0; x < intr.width; ++x) {
      raster.composite(x, y, c, nullptr);
      row[3 * x + 0] = c[0];
      row[3 * x + 1] = c[1];
      row[3 * x + 2] = c[2];
    }
  });
  return out;
}

RenderGrads render_with_grads(const GaussianCloud& cloud, const CameraPose& pose, const Intrinsics& intr,
                              const Image& target, const Mask& valid) {
  intr.validate();
  if (target.width() != intr.width || target.height() != intr.height)
    throw std::invalid_argument("render_with_grads: target size does not match intrinsics");
  if (valid.width != intr.width || valid.height != intr.height)
    throw std::invalid_argument("render_with_grads: validity mask size does not match intrinsics");
  const std::size_t n_valid = valid.count();
  if (n_valid == 0) throw std::invalid_argument("render_with_grads: no valid pixels");

  RenderGrads out;
  out.valid_pixels = n_valid;
  out.image = Image(intr.width, intr.height, cloud.background);
  out.grads.assign(cloud.size(), GaussianGrad{});
  const double norm = 1.0 / (3.0 * static_cast<double>(n_valid));

  const Rasterizer raster(cloud, pose, intr, true);
  const std::size_t npix = static_cast<std::size_t>(intr.width) * intr.height;
  std::vector<Color> pixel_grad(npix, Color::Zero());
  // per-slot partial derivatives, reduced per Gaussian afterwards in a fixed order
  std::vector<double> slot_weight(raster.slot_count(), 0.0);
  std::vector<double> slot_dlogit(raster.slot_count(), 0.0);
  std::vector<double> slot_dscale(raster.slot_count(), 0.0);
  std::vector<double> row_loss(intr.height, 0.0);

  parallel_rows(intr.height, [&](int y) {
    std::vector<Rasterizer::Contribution> trace;
    for (int x = 0; x < intr.width; ++x) {
      trace.clear();
      Color c;
      const double t_final = raster.composite(x, y, c, &trace);
      out.image.set(x, y, c);
      const std::size_t p = raster.pixel(x, y);
      if (!valid.bits[p]) continue;

      const Color residual = c - target.at(x, y);
      Color g;
      for (int ch = 0; ch < 3; ++ch) {
        row_loss[y] += std::abs(residual[ch]);
        g[ch] = norm * static_cast<double>((residual[ch] > 0.0) - (residual[ch] < 0.0));
      }
      pixel_grad[p] = g;
      if (g.isZero()) continue;

      // S accumulates everything composited behind the current splat
      Color behind = t_final * cloud.background;
      for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
        const auto& s = raster.splats()[raster.slot_splat(it->slot)];
        const double weight = it->transmittance * it->alpha;
        slot_weight[it->slot] = weight;
        if (!it->clamped) {
          const double dalpha = g.dot(it->transmittance * s.color - behind / (1.0 - it->alpha));
          slot_dlogit[it->slot] = dalpha * it->alpha * (1.0 - s.opacity);
          slot_dscale[it->slot] = dalpha * it->alpha * it->r2 / (s.sigma_s * s.sigma_s);
        }
        behind += weight * s.color;
      }
    }
  });

  const auto& offsets = raster.splat_slot_offsets();
  const auto& slots = raster.splat_slots();
  parallel_rows(static_cast<int>(raster.splats().size()), [&](int k) {
    const auto& s = raster.splats()[k];
    GaussianGrad& grad = out.grads[s.id];
    std::size_t t = offsets[k];
    for (int y = s.y0; y <= s.y1; ++y)
      for (int x = s.x0; x <= s.x1; ++x, ++t) {
        const std::size_t slot = slots[t];
        grad.color += slot_weight[slot] * pixel_grad[raster.pixel(x, y)];
        grad.opacity_logit += slot_dlogit[slot];
        grad.log_scale += slot_dscale[slot];
      }
  });

  double loss = 0.0;
  for (double l : row_loss) loss += l;
  out.loss = loss * norm;
  return out;
}

SupervisionSet augment_supervision(const PointCloud& omega, const std::vector<CameraPose>& poses,
                                   const Intrinsics& intr) {
  intr.validate();
  SupervisionSet set;
  set.items.reserve(poses.size());
  for (const auto& pose : poses) {
    Projection proj = project_cloud(omega, intr, pose);
    set.items.push_back({std::move(proj.image), proj.mask.as_mask(), pose, intr});
  }
  return set;
}

OptimizeResult optimize(GaussianCloud cloud, const SupervisionSet& supervision, const OptimizeOptions& options) {
  if (options.iterations < 0) throw std::invalid_argument("optimize: iterations must be non-negative");
  if (options.iterations > 0 && supervision.empty()) throw std::invalid_argument("optimize: supervision set is empty");

  OptimizeResult result;
  result.loss_history.reserve(options.iterations);
  const std::size_t n = cloud.size();

  // Adam state: 5 parameters per Gaussian (rgb, opacity_logit, log_scale)
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-15;
  std::vector<double> m, v;
  if (options.method == Optimizer::Adam) {
    m.assign(5 * n, 0.0);
    v.assign(5 * n, 0.0);
  }
  const std::array<double, 5> lr{options.lr.color, options.lr.color, options.lr.color, options.lr.opacity,
                                 options.lr.scale};

  for (int it = 0; it < options.iterations; ++it) {
    const auto& item = supervision.items[static_cast<std::size_t>(it) % supervision.size()];
    const RenderGrads rg = render_with_grads(cloud, item.pose, item.intrinsics, item.image, item.valid);
    if (!std::isfinite(rg.loss))
      throw OptimizationError("optimize: non-finite loss at iteration " + std::to_string(it), it);
    result.loss_history.push_back(rg.loss);

    const double bc1 = 1.0 - std::pow(kBeta1, it + 1), bc2 = 1.0 - std::pow(kBeta2, it + 1);
    for (std::size_t k = 0; k < n; ++k) {
      Gaussian& g = cloud.gaussians[k];
      const GaussianGrad& d = rg.grads[k];
      const std::array<double, 5> grad{d.color[0], d.color[1], d.color[2], d.opacity_logit, d.log_scale};
      std::array<double, 5> step{};
      for (int j = 0; j < 5; ++j) {
        if (options.method == Optimizer::Adam) {
          double& mj = m[5 * k + j];
          double& vj = v[5 * k + j];
          mj = kBeta1 * mj + (1.0 - kBeta1) * grad[j];
          vj = kBeta2 * vj + (1.0 - kBeta2) * grad[j] * grad[j];
          step[j] = lr[j] * (mj / bc1) / (std::sqrt(vj / bc2) + kEps);
        } else {
          step[j] = lr[j] * grad[j];
        }
      }
      for (int c = 0; c < 3; ++c) g.color[c] = std::clamp(g.color[c] - step[c], 0.0, 1.0);
      g.opacity_logit -= step[3];
      g.log_scale -= step[4];
    }
  }
  result.cloud = std::move(cloud);
  return result;
}

}  // namespace pano3d::splat
