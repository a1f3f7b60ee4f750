#pragma once

// File formats:
//   PNG  8-bit RGB. Colors are rounded to the nearest 1/255 step on write.
//   PFM  grayscale ("Pf"), scale -1.0 (little endian), rows stored bottom to
//        top. Invalid depths are written as 0 and read back as invalid.
//   PLY  binary_little_endian 1.0, one "vertex" element:
//          point cloud:    float x y z, uchar red green blue
//          Gaussian cloud: the above plus float opacity (the logit) and
//                          float scale (log sigma)

#include <string>
#include <vector>

#include "pano3d/image.hpp"
#include "pano3d/pointcloud.hpp"
#include "pano3d/splat.hpp"

namespace pano3d::io {

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

/// Writes a mask as a black/white PNG.
void write_mask_png(const std::string& path, const Mask& mask);

DepthMap read_pfm(const std::string& path);
void write_pfm(const std::string& path, const DepthMap& depth);

/// Property names declared for the vertex element, in header order.
std::vector<std::string> read_ply_properties(const std::string& path);

PointCloud read_ply_points(const std::string& path);
void write_ply(const std::string& path, const PointCloud& cloud);

splat::GaussianCloud read_ply_gaussians(const std::string& path);
void write_ply(const std::string& path, const splat::GaussianCloud& cloud);

/// 8-bit quantization used by the PNG and PLY writers.
std::uint8_t quantize_unit(double v);

}  // namespace pano3d::io
