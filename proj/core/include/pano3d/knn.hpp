#pragma once

#include <vector>

#include "pano3d/geometry.hpp"

namespace pano3d {

/// For every point, the mean Euclidean distance to its k nearest other points
/// (k is reduced to n - 1 for tiny clouds; a single point gets 0). Exact
/// search over a uniform hash grid.
std::vector<double> knn_mean_distances(const std::vector<Vec3>& points, int k);

}  // namespace pano3d
