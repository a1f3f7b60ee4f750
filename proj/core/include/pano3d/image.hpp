#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pano3d {

using Color = Eigen::Vector3d;

/// Thrown when a file cannot be read or written, or its contents are malformed.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Row-major interleaved RGB raster with channel values nominally in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, const Color& fill = Color::Zero());

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return pixel_count() == 0; }

  Color at(int x, int y) const {
    const double* p = &data_[index(x, y) * 3];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, const Color& c) {
    double* p = &data_[index(x, y) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  double* row(int y) { return &data_[static_cast<std::size_t>(y) * width_ * 3]; }
  const double* row(int y) const { return &data_[static_cast<std::size_t>(y) * width_ * 3]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x);
  }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel boolean raster.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h, bool fill = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;
};

/// Clamps every channel to [0,1].
void clamp_unit(Image& img);

}  // namespace pano3d
