// pano3d command line: stage-by-stage subcommands plus the full pipeline.
//
//   pano3d synth          render the box room panorama, views, depths, manifest
//   pano3d extract-views  cut perspective views out of a panorama
//   pano3d fuse           align and fuse the views of a manifest into omega.ply
//   pano3d render         fit Gaussians to omega.ply and render novel views
//   pano3d eval           compare two PNGs, print a JSON metric report
//   pano3d pipeline       everything above in one run
//
// Thread count comes from PANO3D_THREADS (default 1).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "pano3d/config.hpp"
#include "pano3d/fusion.hpp"
#include "pano3d/io.hpp"
#include "pano3d/metrics.hpp"
#include "pano3d/pipeline.hpp"
#include "pano3d/splat.hpp"
#include "pano3d/synth.hpp"

namespace fs = std::filesystem;
using namespace pano3d;
using nlohmann::json;

namespace {

// Flag overrides, applied on top of the preset and the --config file.
struct Overrides {
  std::string config_path;
  std::string preset;
  std::optional<std::string> panorama, depth_source, depth_dir, output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_yaw, view_width, view_height;
  std::optional<std::vector<double>> pitches;
  std::optional<double> fov;
  std::optional<std::string> solver;
  std::optional<double> step, tol;
  std::optional<int> max_iters, dilate_radius;
  bool no_align = false, no_mask = false;
  std::optional<int> knn, iterations;
  std::optional<double> lr_color, lr_opacity, lr_scale;
  std::optional<std::vector<double>> background;
  std::optional<std::string> optimizer;
  bool no_augment = false;
  std::optional<int> pano_width;
  bool no_perturb = false;
  std::optional<double> perturb_lo, perturb_hi;
  std::optional<int> eval_width, eval_height;
  std::optional<double> eval_fov;
};

void add_config_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "pipeline config JSON")->check(CLI::ExistingFile);
  app->add_option("--preset", o.preset, "start from a named preset")->check(CLI::IsMember({"default", "benchmark"}));
  app->add_option("--panorama", o.panorama, "input equirectangular PNG");
  app->add_option("--depth-source", o.depth_source, "files | synth")->check(CLI::IsMember({"files", "synth"}));
  app->add_option("--depth-dir", o.depth_dir, "directory of depth_NNN.pfm files");
  app->add_option("-o,--out", o.output_dir, "output directory");
  app->add_option("--seed", o.seed, "seed for the depth perturbation");
  app->add_option("--n-yaw", o.n_yaw, "views per pitch ring");
  app->add_option("--pitches", o.pitches, "ring pitches in degrees")->delimiter(',');
  app->add_option("--fov", o.fov, "view field of view in degrees");
  app->add_option("--view-width", o.view_width);
  app->add_option("--view-height", o.view_height);
  app->add_option("--solver", o.solver, "gd | median")->check(CLI::IsMember({"gd", "median"}));
  app->add_option("--alpha", o.step, "gradient descent step");
  app->add_option("--max-iters", o.max_iters, "gradient descent iteration cap");
  app->add_option("--tol", o.tol, "gradient descent tolerance");
  app->add_option("--dilate-radius", o.dilate_radius, "coverage mask dilation radius");
  app->add_flag("--no-align", o.no_align, "skip depth scale alignment");
  app->add_flag("--no-mask", o.no_mask, "lift every pixel, even covered ones");
  app->add_option("--knn", o.knn, "neighbors for the initial Gaussian scale");
  app->add_option("--iters", o.iterations, "splat optimizer iterations");
  app->add_option("--lr-color", o.lr_color);
  app->add_option("--lr-opacity", o.lr_opacity);
  app->add_option("--lr-scale", o.lr_scale);
  app->add_option("--background", o.background, "r,g,b in [0,1]")->delimiter(',')->expected(3);
  app->add_option("--optimizer", o.optimizer, "adam | gd")->check(CLI::IsMember({"adam", "gd"}));
  app->add_flag("--no-augment", o.no_augment, "train on the input views only");
  app->add_option("--pano-width", o.pano_width, "synthetic panorama width");
  app->add_flag("--no-perturb", o.no_perturb, "keep synthetic depths at their true scale");
  app->add_option("--perturb-lo", o.perturb_lo);
  app->add_option("--perturb-hi", o.perturb_hi);
  app->add_option("--eval-width", o.eval_width);
  app->add_option("--eval-height", o.eval_height);
  app->add_option("--eval-fov", o.eval_fov);
}

template <typename T, typename U>
void apply(const std::optional<T>& v, U& field) {
  if (v) field = static_cast<U>(*v);
}

PipelineConfig resolve(const Overrides& o) {
  PipelineConfig c = o.preset == "benchmark" ? benchmark_config() : PipelineConfig{};
  if (!o.config_path.empty()) c = load_config(o.config_path);
  apply(o.panorama, c.panorama);
  if (o.depth_source) c.depth_source = *o.depth_source == "files" ? DepthSource::Files : DepthSource::Synth;
  apply(o.depth_dir, c.depth_dir);
  apply(o.output_dir, c.output_dir);
  apply(o.seed, c.seed);
  apply(o.n_yaw, c.trajectory.n_yaw);
  apply(o.pitches, c.trajectory.pitches_deg);
  apply(o.fov, c.trajectory.fov_deg);
  apply(o.view_width, c.trajectory.view_width);
  apply(o.view_height, c.trajectory.view_height);
  if (o.solver) c.alignment.solver = *o.solver == "gd" ? ScaleSolver::GradientDescent : ScaleSolver::WeightedMedian;
  apply(o.step, c.alignment.step);
  apply(o.max_iters, c.alignment.max_iters);
  apply(o.tol, c.alignment.tol);
  apply(o.dilate_radius, c.alignment.dilate_radius);
  if (o.no_align) c.alignment.enabled = false;
  if (o.no_mask) c.alignment.masking = false;
  apply(o.knn, c.splat.knn);
  apply(o.iterations, c.splat.iterations);
  apply(o.lr_color, c.splat.lr.color);
  apply(o.lr_opacity, c.splat.lr.opacity);
  apply(o.lr_scale, c.splat.lr.scale);
  if (o.background) c.splat.background = Color((*o.background)[0], (*o.background)[1], (*o.background)[2]);
  if (o.optimizer) c.splat.optimizer = *o.optimizer == "gd" ? splat::Optimizer::GradientDescent : splat::Optimizer::Adam;
  if (o.no_augment) c.splat.augment = false;
  apply(o.pano_width, c.synth.pano_width);
  if (o.no_perturb) c.synth.perturb = false;
  apply(o.perturb_lo, c.synth.perturb_lo);
  apply(o.perturb_hi, c.synth.perturb_hi);
  apply(o.eval_width, c.eval.width);
  apply(o.eval_height, c.eval.height);
  apply(o.eval_fov, c.eval.fov_deg);
  c.validate();
  return c;
}

std::string numbered(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, static_cast<int>(i));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << j.dump(2) << "\n";
}

void note(const std::string& msg) { std::cerr << "[pano3d] " << msg << "\n"; }

// Writes the trajectory views of `pano` (and optional depths) plus a manifest.
void write_views(const PipelineConfig& c, const EquirectImage& pano, const std::vector<DepthMap>* depths,
                 const std::vector<double>& scales) {
  const fs::path out(c.output_dir);
  fs::create_directories(out / "views");
  if (depths) fs::create_directories(out / "depths");
  const auto& tc = c.trajectory;
  const Trajectory traj = generate_trajectory(tc.n_yaw, tc.pitches_deg, tc.fov_deg, tc.view_width, tc.view_height);
  io::write_png((out / "panorama.png").string(), pano.pixels());
  Manifest m;
  m.intrinsics = traj.intrinsics();
  m.panorama = "panorama.png";
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    ViewRecord rec;
    rec.index = static_cast<int>(i);
    rec.image = "views/" + numbered("view_%03d.png", i);
    rec.pose = traj.poses[i];
    rec.yaw_deg = traj.yaw_deg[i];
    rec.pitch_deg = traj.pitch_deg[i];
    rec.depth_scale = scales.empty() ? 1.0 : scales[i];
    io::write_png((out / rec.image).string(), extract_perspective(pano, traj.poses[i], m.intrinsics).image);
    if (depths) {
      rec.depth = "depths/" + numbered("depth_%03d.pfm", i);
      io::write_pfm((out / rec.depth).string(), (*depths)[i]);
    }
    m.views.push_back(rec);
  }
  write_manifest((out / "manifest.json").string(), m);
  note("wrote " + std::to_string(m.views.size()) + " views to " + out.string());
}

int cmd_synth(const PipelineConfig& c) {
  const auto& tc = c.trajectory;
  const Trajectory traj = generate_trajectory(tc.n_yaw, tc.pitches_deg, tc.fov_deg, tc.view_width, tc.view_height);
  const auto pano = synth::render_scene_equirect(c.synth.scene, c.synth.pano_width, c.synth.pano_width / 2).image;
  std::vector<DepthMap> depths;
  for (const auto& pose : traj.poses)
    depths.push_back(synth::render_scene_perspective(c.synth.scene, pose, traj.intrinsics()).depth);
  std::vector<double> scales;
  if (c.synth.perturb) {
    auto p = synth::perturb_depths_seeded(depths, c.seed, c.synth.perturb_lo, c.synth.perturb_hi);
    depths = std::move(p.depths);
    scales = std::move(p.scales);
  }
  write_views(c, pano, &depths, scales);
  return 0;
}

int cmd_extract(const PipelineConfig& c) {
  if (c.panorama.empty()) throw std::invalid_argument("extract-views needs --panorama");
  write_views(c, EquirectImage(io::read_png(c.panorama)), nullptr, {});
  return 0;
}

struct LoadedViews {
  Manifest manifest;
  std::vector<RgbdView> views;
};

LoadedViews load_views(const std::string& manifest_path, bool need_depth) {
  LoadedViews lv;
  lv.manifest = read_manifest(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  for (const auto& rec : lv.manifest.views) {
    RgbdView v;
    v.view = PerspectiveView{io::read_png((dir / rec.image).string()), rec.pose, lv.manifest.intrinsics};
    if (need_depth) {
      if (rec.depth.empty()) throw std::invalid_argument("manifest view " + std::to_string(rec.index) + " has no depth");
      v.depth = io::read_pfm((dir / rec.depth).string());
    }
    lv.views.push_back(std::move(v));
  }
  return lv;
}

int cmd_fuse(const PipelineConfig& c, const std::string& manifest_path) {
  const LoadedViews lv = load_views(manifest_path, true);
  const FusionResult fused = fuse_views(lv.views, lv.manifest.intrinsics, c.fusion());
  const fs::path out(c.output_dir);
  fs::create_directories(out);
  io::write_ply((out / "omega.ply").string(), fused.omega);
  json al = json::array();
  for (std::size_t i = 0; i < fused.alignments.size(); ++i) {
    const auto& a = fused.alignments[i];
    al.push_back({{"view", i},
                  {"scale", a.scale},
                  {"final_loss", a.final_loss},
                  {"iterations", a.iterations},
                  {"converged", a.converged},
                  {"points_added", fused.added[i]}});
  }
  write_json(out / "alignment.json", al);
  note("fused " + std::to_string(fused.omega.size()) + " points into " + (out / "omega.ply").string());
  return 0;
}

int cmd_render(const PipelineConfig& c, const std::string& manifest_path, const std::string& omega_path,
               const std::string& gaussians_path) {
  const fs::path out(c.output_dir);
  fs::create_directories(out / "renders");
  const LoadedViews lv = load_views(manifest_path, false);
  const Intrinsics& intr = lv.manifest.intrinsics;

  splat::GaussianCloud cloud;
  if (!gaussians_path.empty()) {
    cloud = io::read_ply_gaussians(gaussians_path);
  } else {
    if (omega_path.empty()) throw std::invalid_argument("render needs --omega or --gaussians");
    const PointCloud omega = io::read_ply_points(omega_path);
    splat::SupervisionSet sup;
    for (const auto& v : lv.views) sup.items.push_back({v.view.image, Mask(intr.width, intr.height, true), v.view.pose, intr});
    if (c.splat.augment) {
      std::vector<CameraPose> extra;
      for (const auto& rec : lv.manifest.views)
        extra.push_back(make_pose(deg_to_rad(rec.yaw_deg + 180.0 / c.trajectory.n_yaw), deg_to_rad(rec.pitch_deg)));
      for (auto& item : splat::augment_supervision(omega, extra, intr).items) sup.items.push_back(std::move(item));
    }
    auto result = splat::optimize(splat::init_gaussians(omega, c.splat.knn, c.splat.background), sup,
                                  c.optimize_options());
    cloud = std::move(result.cloud);
    io::write_ply((out / "gaussians.ply").string(), cloud);
    if (!result.loss_history.empty()) note("final training loss " + std::to_string(result.loss_history.back()));
  }

  // Render the configured eval poses, or the manifest poses when none are set.
  Manifest rendered;
  std::vector<CameraPose> poses;
  if (!c.eval.poses.empty()) {
    rendered.intrinsics = intrinsics_from_fov(c.eval.fov_deg, c.eval.width, c.eval.height);
    for (const auto& p : c.eval.poses) poses.push_back(p.pose());
  } else {
    rendered.intrinsics = intr;
    for (const auto& v : lv.views) poses.push_back(v.view.pose);
  }
  for (std::size_t i = 0; i < poses.size(); ++i) {
    ViewRecord rec;
    rec.index = static_cast<int>(i);
    rec.image = numbered("render_%03d.png", i);
    rec.pose = poses[i];
    io::write_png((out / "renders" / rec.image).string(), splat::render(cloud, poses[i], rendered.intrinsics));
    rendered.views.push_back(rec);
  }
  write_manifest((out / "renders" / "manifest.json").string(), rendered);
  note("rendered " + std::to_string(poses.size()) + " views");
  return 0;
}

int cmd_eval(const std::string& a, const std::string& b, const std::string& mask_path) {
  const Image rendered = io::read_png(a);
  const Image reference = io::read_png(b);
  std::optional<Mask> mask;
  if (!mask_path.empty()) {
    const Image m = io::read_png(mask_path);
    mask = Mask(m.width(), m.height(), false);
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) mask->set(x, y, m.at(x, y).maxCoeff() > 0.5);
  }
  std::cout << metric_report_json(evaluate_images(rendered, reference, mask ? &*mask : nullptr)) << "\n";
  return 0;
}

int cmd_pipeline(const PipelineConfig& c) {
  const PipelineReport r = run_pipeline(c, note);
  std::cout << metric_report_json(r.mean) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pano3d: panorama to 3D Gaussian scene toolkit"};
  app.require_subcommand(1);

  Overrides synth_o, extract_o, fuse_o, render_o, pipe_o;
  auto* synth_cmd = app.add_subcommand("synth", "render the synthetic room: panorama, views, depths, manifest");
  add_config_options(synth_cmd, synth_o);

  auto* extract_cmd = app.add_subcommand("extract-views", "extract trajectory views from a panorama");
  add_config_options(extract_cmd, extract_o);

  std::string fuse_manifest;
  auto* fuse_cmd = app.add_subcommand("fuse", "align and fuse RGB-D views into a point cloud");
  add_config_options(fuse_cmd, fuse_o);
  fuse_cmd->add_option("--manifest", fuse_manifest, "views manifest")->required()->check(CLI::ExistingFile);

  std::string render_manifest, render_omega, render_gaussians;
  auto* render_cmd = app.add_subcommand("render", "fit Gaussians to a point cloud and render views");
  add_config_options(render_cmd, render_o);
  render_cmd->add_option("--manifest", render_manifest, "training views manifest")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--omega", render_omega, "fused point cloud PLY")->check(CLI::ExistingFile);
  render_cmd->add_option("--gaussians", render_gaussians, "pretrained Gaussian PLY")->check(CLI::ExistingFile);
  bool render_heldout = false;
  render_cmd->add_flag("--heldout", render_heldout, "render the default held-out poses");

  std::string eval_a, eval_b, eval_mask;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR and SSIM of a render against a reference");
  eval_cmd->add_option("rendered", eval_a)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("reference", eval_b)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--mask", eval_mask, "PNG, nonzero pixels are compared")->check(CLI::ExistingFile);

  auto* pipe_cmd = app.add_subcommand("pipeline", "run every stage end to end");
  add_config_options(pipe_cmd, pipe_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) return cmd_synth(resolve(synth_o));
    if (*extract_cmd) return cmd_extract(resolve(extract_o));
    if (*fuse_cmd) return cmd_fuse(resolve(fuse_o), fuse_manifest);
    if (*render_cmd) {
      PipelineConfig c = resolve(render_o);
      if (render_heldout) c.eval.poses = default_heldout_poses();
      return cmd_render(c, render_manifest, render_omega, render_gaussians);
    }
    if (*eval_cmd) return cmd_eval(eval_a, eval_b, eval_mask);
    if (*pipe_cmd) return cmd_pipeline(resolve(pipe_o));
  } catch (const PipelineError& e) {
    std::cerr << "pano3d: " << e.what() << "\n";
    return 2;
  } catch (const AlignmentError& e) {
    std::cerr << "pano3d: view " << e.view_index() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pano3d: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
