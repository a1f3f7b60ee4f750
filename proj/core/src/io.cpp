#include "pano3d/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pano3d::io {
namespace {

template <typename T>
void put_le(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get_bytes(const char* src, bool little_endian) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, src, sizeof(T));
  if ((std::endian::native == std::endian::little) != little_endian) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

}  // namespace

std::uint8_t quantize_unit(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

// ---------------------------------------------------------------- PNG

Image read_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError(path, "cannot read PNG: " + msg);
  }
  if (img.format != PNG_FORMAT_RGB) {
    png_image_free(&img);
    throw IoError(path, "expected an 8-bit RGB PNG");
  }
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError(path, "corrupt PNG stream: " + msg);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (std::size_t i = 0; i < buffer.size(); ++i) out.data()[i] = buffer[i] / 255.0;
  return out;
}

void write_png(const std::string& path, const Image& image) {
  if (image.empty()) throw IoError(path, "cannot write an empty image");
  std::vector<png_byte> buffer(image.data().size());
  for (std::size_t i = 0; i < buffer.size(); ++i) buffer[i] = quantize_unit(image.data()[i]);
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError(path, "cannot write PNG: " + msg);
  }
}

void write_mask_png(const std::string& path, const Mask& mask) {
  Image img(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (mask.bits[i]) img.data()[3 * i] = img.data()[3 * i + 1] = img.data()[3 * i + 2] = 1.0;
  write_png(path, img);
}

// ---------------------------------------------------------------- PFM

DepthMap read_pfm(const std::string& path) {
  const std::string bytes = slurp(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const std::string magic = token();
  if (magic == "PF") throw IoError(path, "color PFM (PF) is not a depth map; expected Pf");
  if (magic != "Pf") throw IoError(path, "bad PFM magic '" + magic + "'");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    throw IoError(path, "malformed PFM header");
  }
  if (w < 1 || h < 1) throw IoError(path, "bad PFM dimensions");
  if (scale == 0.0 || !std::isfinite(scale)) throw IoError(path, "bad PFM scale");
  ++pos;  // single whitespace byte after the scale
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4;
  if (pos > bytes.size() || bytes.size() - pos < need) throw IoError(path, "PFM payload is truncated");
  const bool little = scale < 0.0;

  DepthMap depth(w, h);
  const char* data = bytes.data() + pos;
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      const float v = get_bytes<float>(data + (static_cast<std::size_t>(row) * w + x) * 4, little);
      depth.set(x, y, static_cast<double>(v));
    }
  }
  return depth;
}

void write_pfm(const std::string& path, const DepthMap& depth) {
  if (depth.width < 1 || depth.height < 1) throw IoError(path, "cannot write an empty depth map");
  std::string buf = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n";
  buf.reserve(buf.size() + depth.values.size() * 4);
  for (int row = 0; row < depth.height; ++row) {
    const int y = depth.height - 1 - row;
    for (int x = 0; x < depth.width; ++x)
      put_le(buf, depth.is_valid(x, y) ? static_cast<float>(depth.at(x, y)) : 0.0f);
  }
  dump(path, buf);
}

// ---------------------------------------------------------------- PLY

namespace {

const std::vector<std::string> kPointSchema{"x", "y", "z", "red", "green", "blue"};
const std::vector<std::string> kGaussianSchema{"x", "y", "z", "red", "green", "blue", "opacity", "scale"};

struct PlyHeader {
  std::size_t count = 0;
  std::vector<std::string> properties;
  std::vector<std::string> types;
  std::vector<std::string> comments;
  std::size_t body = 0;
};

PlyHeader parse_ply_header(const std::string& path, const std::string& bytes) {
  PlyHeader h;
  std::size_t pos = 0;
  auto line = [&]() {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) throw IoError(path, "PLY header is truncated");
    std::string l = bytes.substr(pos, end - pos);
    if (!l.empty() && l.back() == '\r') l.pop_back();
    pos = end + 1;
    return l;
  };
  if (line() != "ply") throw IoError(path, "missing 'ply' magic");
  bool saw_format = false, saw_vertex = false;
  for (;;) {
    const std::string l = line();
    std::istringstream ls(l);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "binary_little_endian" || ver != "1.0")
        throw IoError(path, "unsupported PLY format '" + fmt + " " + ver + "'");
      saw_format = true;
    } else if (kw == "comment") {
      h.comments.push_back(l.size() > 8 ? l.substr(8) : "");
    } else if (kw == "element") {
      std::string name;
      std::size_t n = 0;
      ls >> name >> n;
      if (name != "vertex" || saw_vertex) throw IoError(path, "unexpected PLY element '" + name + "'");
      h.count = n;
      saw_vertex = true;
    } else if (kw == "property") {
      std::string type, name;
      ls >> type >> name;
      if (!saw_vertex) throw IoError(path, "PLY property before any element");
      h.types.push_back(type);
      h.properties.push_back(name);
    } else if (!kw.empty() && kw != "obj_info") {
      throw IoError(path, "unexpected PLY header line '" + l + "'");
    }
  }
  if (!saw_format) throw IoError(path, "PLY header has no format line");
  if (!saw_vertex) throw IoError(path, "PLY header has no vertex element");
  h.body = pos;
  return h;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : " ") + s;
  return out;
}

void require_schema(const std::string& path, const PlyHeader& h, const std::vector<std::string>& schema) {
  if (h.properties != schema)
    throw IoError(path, "PLY properties [" + join(h.properties) + "] do not match the expected schema [" +
                            join(schema) + "]");
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const bool is_color = i >= 3 && i < 6;
    const std::string& t = h.types[i];
    if (is_color ? (t != "uchar" && t != "uint8") : (t != "float" && t != "float32"))
      throw IoError(path, "PLY property '" + schema[i] + "' has unexpected type '" + t + "'");
  }
}

std::string ply_header(std::size_t n, bool gaussian, const std::vector<std::string>& comments) {
  std::string s = "ply\nformat binary_little_endian 1.0\n";
  for (const auto& c : comments) s += "comment " + c + "\n";
  s += "element vertex " + std::to_string(n) + "\n";
  s += "property float x\nproperty float y\nproperty float z\n";
  s += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (gaussian) s += "property float opacity\nproperty float scale\n";
  s += "end_header\n";
  return s;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

std::vector<std::string> read_ply_properties(const std::string& path) {
  return parse_ply_header(path, slurp(path)).properties;
}

PointCloud read_ply_points(const std::string& path) {
  const std::string bytes = slurp(path);
  const PlyHeader h = parse_ply_header(path, bytes);
  require_schema(path, h, kPointSchema);
  constexpr std::size_t stride = 3 * 4 + 3;
  if ((bytes.size() - h.body) < h.count * stride) throw IoError(path, "PLY body is truncated");
  PointCloud cloud;
  cloud.reserve(h.count);
  const char* p = bytes.data() + h.body;
  for (std::size_t i = 0; i < h.count; ++i, p += stride) {
    const Vec3 pos(get_bytes<float>(p, true), get_bytes<float>(p + 4, true), get_bytes<float>(p + 8, true));
    const Color col(static_cast<unsigned char>(p[12]) / 255.0, static_cast<unsigned char>(p[13]) / 255.0,
                    static_cast<unsigned char>(p[14]) / 255.0);
    cloud.push_back(pos, col, -1);
  }
  return cloud;
}

void write_ply(const std::string& path, const PointCloud& cloud) {
  std::string buf = ply_header(cloud.size(), false, {"pano3d point cloud"});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) put_le(buf, static_cast<float>(cloud.positions[i][a]));
    for (int c = 0; c < 3; ++c) buf.push_back(static_cast<char>(quantize_unit(cloud.colors[i][c])));
  }
  dump(path, buf);
}

splat::GaussianCloud read_ply_gaussians(const std::string& path) {
  const std::string bytes = slurp(path);
  const PlyHeader h = parse_ply_header(path, bytes);
  require_schema(path, h, kGaussianSchema);
  constexpr std::size_t stride = 3 * 4 + 3 + 2 * 4;
  if ((bytes.size() - h.body) < h.count * stride) throw IoError(path, "PLY body is truncated");

  splat::GaussianCloud cloud;
  for (const auto& c : h.comments) {
    std::istringstream cs(c);
    std::string key;
    cs >> key;
    if (key != "background") continue;
    double r = 0, g = 0, b = 0;
    if (!(cs >> r >> g >> b)) throw IoError(path, "malformed background comment");
    cloud.background = Color(r, g, b);
  }
  cloud.gaussians.resize(h.count);
  const char* p = bytes.data() + h.body;
  for (std::size_t i = 0; i < h.count; ++i, p += stride) {
    auto& g = cloud.gaussians[i];
    g.position = Vec3(get_bytes<float>(p, true), get_bytes<float>(p + 4, true), get_bytes<float>(p + 8, true));
    g.color = Color(static_cast<unsigned char>(p[12]) / 255.0, static_cast<unsigned char>(p[13]) / 255.0,
                    static_cast<unsigned char>(p[14]) / 255.0);
    g.opacity_logit = get_bytes<float>(p + 15, true);
    g.log_scale = get_bytes<float>(p + 19, true);
  }
  return cloud;
}

void write_ply(const std::string& path, const splat::GaussianCloud& cloud) {
  const auto& bg = cloud.background;
  std::string buf = ply_header(cloud.size(), true,
                               {"pano3d gaussian cloud: opacity is a logit, scale is log(sigma)",
                                "background " + format_double(bg[0]) + " " + format_double(bg[1]) + " " +
                                    format_double(bg[2])});
  for (const auto& g : cloud.gaussians) {
    for (int a = 0; a < 3; ++a) put_le(buf, static_cast<float>(g.position[a]));
    for (int c = 0; c < 3; ++c) buf.push_back(static_cast<char>(quantize_unit(g.color[c])));
    put_le(buf, static_cast<float>(g.opacity_logit));
    put_le(buf, static_cast<float>(g.log_scale));
  }
  dump(path, buf);
}

}  // namespace pano3d::io
