#include "pano3d/image.hpp"

#include <algorithm>
#include <numeric>

namespace pano3d {

Image::Image(int width, int height, const Color& fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::invalid_argument("image dimensions must be non-negative");
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    data_[3 * i + 0] = fill[0];
    data_[3 * i + 1] = fill[1];
    data_[3 * i + 2] = fill[2];
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

void clamp_unit(Image& img) {
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace pano3d
