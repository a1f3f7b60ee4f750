#include "pano3d/knn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace pano3d {
namespace {

class HashGrid {
 public:
  HashGrid(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell) {
    lo_ = points[0];
    hi_ = points[0];
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor((hi_[a] - lo_[a]) / cell_)) + 1;

    order_.resize(points.size());
    std::vector<std::int64_t> keys(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      order_[i] = static_cast<int>(i);
      keys[i] = key(coord(points[i]));
    }
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return keys[a] < keys[b]; });
    for (std::size_t s = 0; s < order_.size();) {
      std::size_t e = s;
      const auto k = keys[order_[s]];
      while (e < order_.size() && keys[order_[e]] == k) ++e;
      ranges_.emplace(k, std::pair<std::size_t, std::size_t>{s, e});
      s = e;
    }
  }

  std::array<int, 3> coord(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
    return c;
  }

  std::int64_t key(const std::array<int, 3>& c) const {
    return (static_cast<std::int64_t>(c[0]) * dims_[1] + c[1]) * dims_[2] + c[2];
  }

  int max_shell() const { return std::max({dims_[0], dims_[1], dims_[2]}); }

  double mean_knn(int query, int k) const {
    const Vec3& q = points_[query];
    const auto c = coord(q);
    std::priority_queue<double> best;  // max-heap of the k smallest distances
    auto visit = [&](int x, int y, int z) {
      if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return;
      const auto it = ranges_.find(key({x, y, z}));
      if (it == ranges_.end()) return;
      for (std::size_t s = it->second.first; s < it->second.second; ++s) {
        const int j = order_[s];
        if (j == query) continue;
        const double d = (points_[j] - q).norm();
        if (static_cast<int>(best.size()) < k) {
          best.push(d);
        } else if (d < best.top()) {
          best.pop();
          best.push(d);
        }
      }
    };
    for (int shell = 0; shell <= max_shell(); ++shell) {
      for (int dx = -shell; dx <= shell; ++dx)
        for (int dy = -shell; dy <= shell; ++dy)
          for (int dz = -shell; dz <= shell; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != shell) continue;
            visit(c[0] + dx, c[1] + dy, c[2] + dz);
          }
      // anything in a farther shell is at least shell * cell away
      if (static_cast<int>(best.size()) == k && best.top() <= shell * cell_) break;
    }
    double sum = 0.0;
    const auto n = best.size();
    while (!best.empty()) {
      sum += best.top();
      best.pop();
    }
    return sum / static_cast<double>(n);
  }

 private:
  const std::vector<Vec3>& points_;
  double cell_;
  Vec3 lo_, hi_;
  std::array<int, 3> dims_{};
  std::vector<int> order_;
  std::unordered_map<std::int64_t, std::pair<std::size_t, std::size_t>> ranges_;
};

}  // namespace

std::vector<double> knn_mean_distances(const std::vector<Vec3>& points, int k) {
  if (k < 1) throw std::invalid_argument("knn: k must be at least 1");
  const std::size_t n = points.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  const int kk = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), n - 1));

  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  if (diag == 0.0) return out;
  // points are mostly on surfaces, so size cells for ~kk points per 2D patch
  double cell = diag * std::sqrt(std::max(kk, 4) / static_cast<double>(n));
  // keep the grid below ~2^21 cells per axis
  cell = std::max(cell, diag / 1.0e6);

  const HashGrid grid(points, cell);
  for (std::size_t i = 0; i < n; ++i) out[i] = grid.mean_knn(static_cast<int>(i), kk);
  return out;
}

}  // namespace pano3d
