#include "pano3d/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pano3d/image.hpp"

namespace pano3d {

using nlohmann::json;

namespace {

// Reads optional fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument(where_ + ": expected a JSON object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw std::invalid_argument(where_ + ": unknown key '" + key + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec3_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(where + ": expected an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string solver_name(ScaleSolver s) { return s == ScaleSolver::WeightedMedian ? "median" : "gd"; }
ScaleSolver solver_from(const std::string& s) {
  if (s == "gd") return ScaleSolver::GradientDescent;
  if (s == "median") return ScaleSolver::WeightedMedian;
  throw std::invalid_argument("alignment.solver must be 'gd' or 'median', got '" + s + "'");
}

std::string optimizer_name(splat::Optimizer o) { return o == splat::Optimizer::Adam ? "adam" : "gd"; }
splat::Optimizer optimizer_from(const std::string& s) {
  if (s == "adam") return splat::Optimizer::Adam;
  if (s == "gd") return splat::Optimizer::GradientDescent;
  throw std::invalid_argument("splat.optimizer must be 'adam' or 'gd', got '" + s + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << text;
  if (!out) throw IoError(path, "write failed");
}

json pose_json(const CameraPose& pose) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  return {{"rotation", rot}, {"translation", vec3_json(pose.translation)}};
}

CameraPose pose_from(const json& j, const std::string& where) {
  CameraPose pose;
  const auto& rot = j.at("rotation");
  if (!rot.is_array() || rot.size() != 9) throw std::invalid_argument(where + ".rotation: expected 9 numbers");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[3 * r + c].get<double>();
  pose.translation = vec3_from(j.at("translation"), where + ".translation");
  return pose;
}

}  // namespace

CameraPose HeldOutPose::pose() const {
  CameraPose p = make_pose(deg_to_rad(yaw_deg), deg_to_rad(pitch_deg));
  p.translation = translation;
  return p;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (depth_source == DepthSource::Files && (panorama.empty() || depth_dir.empty()))
    fail("the files depth source needs both 'panorama' and 'depth_dir'");
  if (trajectory.n_yaw < 1) fail("trajectory.n_yaw must be >= 1");
  if (trajectory.pitches_deg.empty()) fail("trajectory.pitches_deg must not be empty");
  for (double p : trajectory.pitches_deg)
    if (!(std::abs(p) < 90.0)) fail("trajectory.pitches_deg entries must lie in (-90, 90)");
  if (!(trajectory.fov_deg > 0.0 && trajectory.fov_deg < 180.0)) fail("trajectory.fov_deg must lie in (0, 180)");
  if (trajectory.view_width < 1 || trajectory.view_height < 1) fail("trajectory view size must be >= 1");
  if (!(alignment.step > 0.0)) fail("alignment.step must be > 0");
  if (alignment.max_iters < 0) fail("alignment.max_iters must be >= 0");
  if (!(alignment.tol > 0.0)) fail("alignment.tol must be > 0");
  if (alignment.dilate_radius < 0) fail("alignment.dilate_radius must be >= 0");
  if (splat.knn < 1) fail("splat.knn must be >= 1");
  if (splat.iterations < 0) fail("splat.iterations must be >= 0");
  if (!(splat.lr.color >= 0.0 && splat.lr.opacity >= 0.0 && splat.lr.scale >= 0.0))
    fail("splat learning rates must be >= 0");
  if (synth.pano_width < 2 || synth.pano_width % 2 != 0) fail("synth.pano_width must be even and >= 2");
  if (!(synth.perturb_lo > 0.0 && synth.perturb_hi >= synth.perturb_lo)) fail("synth perturbation range invalid");
  if (!(synth.scene.half_extents.minCoeff() > 0.0)) fail("synth.scene.half_extents must be positive");
  if (synth.scene.checker_count < 0) fail("synth.scene.checker_count must be >= 0");
  if (eval.width < 11 || eval.height < 11) fail("eval size must be at least 11x11");
  if (!(eval.fov_deg > 0.0 && eval.fov_deg < 180.0)) fail("eval.fov_deg must lie in (0, 180)");
  for (const auto& p : eval.poses) {
    if (!(std::abs(p.pitch_deg) < 90.0)) fail("eval pose pitch must lie in (-90, 90)");
    if (depth_source == DepthSource::Synth &&
        !((p.translation.cwiseAbs() - synth.scene.half_extents).maxCoeff() < 0.0))
      fail("eval pose translation must lie inside the synthetic room");
  }
}

FusionConfig PipelineConfig::fusion() const {
  FusionConfig f;
  f.solver = alignment.solver;
  f.gd = GdOptions{alignment.step, alignment.max_iters, alignment.tol};
  f.dilate_radius = alignment.dilate_radius;
  f.use_masking = alignment.masking;
  f.align_scales = alignment.enabled;
  return f;
}

splat::OptimizeOptions PipelineConfig::optimize_options() const {
  return splat::OptimizeOptions{splat.lr, splat.iterations, splat.optimizer};
}

std::vector<HeldOutPose> default_heldout_poses() {
  return {
      {22.5, 10.0, Vec3(0.35, 0.10, -0.25)},
      {112.5, -20.0, Vec3(-0.30, 0.00, 0.30)},
      {200.0, 25.0, Vec3(0.25, -0.20, 0.25)},
      {290.0, 0.0, Vec3(-0.25, 0.20, -0.35)},
  };
}

PipelineConfig benchmark_config() {
  PipelineConfig c;
  c.depth_source = DepthSource::Synth;
  c.trajectory.view_width = 256;
  c.trajectory.view_height = 256;
  c.alignment.solver = ScaleSolver::WeightedMedian;
  c.splat.iterations = 200;
  c.synth.perturb = true;
  c.eval.poses = default_heldout_poses();
  c.eval.width = 256;
  c.eval.height = 256;
  return c;
}

PipelineConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig c;
  {
    ObjectReader r(root, "config");
    r.get("panorama", c.panorama);
    std::string source = c.depth_source == DepthSource::Synth ? "synth" : "files";
    r.get("depth_source", source);
    if (source == "synth")
      c.depth_source = DepthSource::Synth;
    else if (source == "files")
      c.depth_source = DepthSource::Files;
    else
      throw std::invalid_argument("config.depth_source must be 'files' or 'synth'");
    r.get("depth_dir", c.depth_dir);
    r.get("output_dir", c.output_dir);
    r.get("seed", c.seed);

    if (const json* t = r.child("trajectory")) {
      ObjectReader tr(*t, r.path("trajectory"));
      tr.get("n_yaw", c.trajectory.n_yaw);
      tr.get("pitches_deg", c.trajectory.pitches_deg);
      tr.get("fov_deg", c.trajectory.fov_deg);
      tr.get("view_width", c.trajectory.view_width);
      tr.get("view_height", c.trajectory.view_height);
    }
    if (const json* a = r.child("alignment")) {
      ObjectReader ar(*a, r.path("alignment"));
      std::string solver = solver_name(c.alignment.solver);
      ar.get("solver", solver);
      c.alignment.solver = solver_from(solver);
      ar.get("step", c.alignment.step);
      ar.get("max_iters", c.alignment.max_iters);
      ar.get("tol", c.alignment.tol);
      ar.get("dilate_radius", c.alignment.dilate_radius);
      ar.get("enabled", c.alignment.enabled);
      ar.get("masking", c.alignment.masking);
    }
    if (const json* s = r.child("splat")) {
      ObjectReader sr(*s, r.path("splat"));
      sr.get("knn", c.splat.knn);
      sr.get("lr_color", c.splat.lr.color);
      sr.get("lr_opacity", c.splat.lr.opacity);
      sr.get("lr_scale", c.splat.lr.scale);
      sr.get("iterations", c.splat.iterations);
      if (const json* bg = sr.child("background")) c.splat.background = vec3_from(*bg, sr.path("background"));
      std::string opt = optimizer_name(c.splat.optimizer);
      sr.get("optimizer", opt);
      c.splat.optimizer = optimizer_from(opt);
      sr.get("augment", c.splat.augment);
    }
    if (const json* s = r.child("synth")) {
      ObjectReader sr(*s, r.path("synth"));
      sr.get("pano_width", c.synth.pano_width);
      sr.get("perturb", c.synth.perturb);
      sr.get("perturb_lo", c.synth.perturb_lo);
      sr.get("perturb_hi", c.synth.perturb_hi);
      if (const json* he = sr.child("half_extents"))
        c.synth.scene.half_extents = vec3_from(*he, sr.path("half_extents"));
      sr.get("checker_count", c.synth.scene.checker_count);
      sr.get("checker_dark", c.synth.scene.checker_dark);
      if (const json* fc = sr.child("face_colors")) {
        if (!fc->is_array() || fc->size() != 6)
          throw std::invalid_argument(sr.path("face_colors") + ": expected 6 colors");
        for (std::size_t i = 0; i < 6; ++i) c.synth.scene.face_colors[i] = vec3_from((*fc)[i], sr.path("face_colors"));
      }
    }
    if (const json* e = r.child("eval")) {
      ObjectReader er(*e, r.path("eval"));
      er.get("width", c.eval.width);
      er.get("height", c.eval.height);
      er.get("fov_deg", c.eval.fov_deg);
      if (const json* poses = er.child("poses")) {
        if (!poses->is_array()) throw std::invalid_argument(er.path("poses") + ": expected an array");
        c.eval.poses.clear();
        for (const auto& p : *poses) {
          ObjectReader pr(p, er.path("poses[]"));
          HeldOutPose h;
          pr.get("yaw_deg", h.yaw_deg);
          pr.get("pitch_deg", h.pitch_deg);
          if (const json* t = pr.child("translation")) h.translation = vec3_from(*t, pr.path("translation"));
          c.eval.poses.push_back(h);
        }
      }
    }
  }
  c.validate();
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  json poses = json::array();
  for (const auto& p : c.eval.poses)
    poses.push_back({{"yaw_deg", p.yaw_deg}, {"pitch_deg", p.pitch_deg}, {"translation", vec3_json(p.translation)}});
  json faces = json::array();
  for (const auto& f : c.synth.scene.face_colors) faces.push_back(vec3_json(f));
  const json j = {
      {"panorama", c.panorama},
      {"depth_source", c.depth_source == DepthSource::Synth ? "synth" : "files"},
      {"depth_dir", c.depth_dir},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"trajectory",
       {{"n_yaw", c.trajectory.n_yaw},
        {"pitches_deg", c.trajectory.pitches_deg},
        {"fov_deg", c.trajectory.fov_deg},
        {"view_width", c.trajectory.view_width},
        {"view_height", c.trajectory.view_height}}},
      {"alignment",
       {{"solver", solver_name(c.alignment.solver)},
        {"step", c.alignment.step},
        {"max_iters", c.alignment.max_iters},
        {"tol", c.alignment.tol},
        {"dilate_radius", c.alignment.dilate_radius},
        {"enabled", c.alignment.enabled},
        {"masking", c.alignment.masking}}},
      {"splat",
       {{"knn", c.splat.knn},
        {"lr_color", c.splat.lr.color},
        {"lr_opacity", c.splat.lr.opacity},
        {"lr_scale", c.splat.lr.scale},
        {"iterations", c.splat.iterations},
        {"background", vec3_json(c.splat.background)},
        {"optimizer", optimizer_name(c.splat.optimizer)},
        {"augment", c.splat.augment}}},
      {"synth",
       {{"pano_width", c.synth.pano_width},
        {"perturb", c.synth.perturb},
        {"perturb_lo", c.synth.perturb_lo},
        {"perturb_hi", c.synth.perturb_hi},
        {"half_extents", vec3_json(c.synth.scene.half_extents)},
        {"checker_count", c.synth.scene.checker_count},
        {"checker_dark", c.synth.scene.checker_dark},
        {"face_colors", faces}}},
      {"eval", {{"width", c.eval.width}, {"height", c.eval.height}, {"fov_deg", c.eval.fov_deg}, {"poses", poses}}},
  };
  return j.dump(2);
}

PipelineConfig load_config(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return config_from_json(text);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string manifest_to_json(const Manifest& m) {
  json views = json::array();
  for (const auto& v : m.views) {
    json jv = pose_json(v.pose);
    jv["index"] = v.index;
    jv["image"] = v.image;
    jv["depth"] = v.depth;
    jv["yaw_deg"] = v.yaw_deg;
    jv["pitch_deg"] = v.pitch_deg;
    jv["depth_scale"] = v.depth_scale;
    views.push_back(jv);
  }
  const auto& k = m.intrinsics;
  const json j = {{"intrinsics",
                   {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
                  {"panorama", m.panorama},
                  {"views", views}};
  return j.dump(2);
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    const auto& k = j.at("intrinsics");
    m.intrinsics = Intrinsics{k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                              k.at("cy").get<double>(), k.at("width").get<int>(),  k.at("height").get<int>()};
    m.panorama = j.value("panorama", std::string());
    for (const auto& v : j.at("views")) {
      ViewRecord r;
      r.index = v.at("index").get<int>();
      r.image = v.value("image", std::string());
      r.depth = v.value("depth", std::string());
      r.pose = pose_from(v, "views[" + std::to_string(r.index) + "]");
      r.yaw_deg = v.value("yaw_deg", 0.0);
      r.pitch_deg = v.value("pitch_deg", 0.0);
      r.depth_scale = v.value("depth_scale", 1.0);
      m.views.push_back(r);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest: ") + e.what());
  }
  m.intrinsics.validate();
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) { write_text(path, manifest_to_json(manifest)); }

Manifest read_manifest(const std::string& path) {
  try {
    return manifest_from_json(read_text(path));
  } catch (const std::invalid_argument& e) {
    throw IoError(path, e.what());
  }
}

}  // namespace pano3d
