#include "pano3d/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pano3d/fusion.hpp"
#include "pano3d/io.hpp"
#include "pano3d/splat.hpp"
#include "pano3d/synth.hpp"

namespace pano3d {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, static_cast<int>(i));
  return buf;
}

double capped_psnr(double psnr) { return std::isfinite(psnr) ? psnr : kPsnrTextCap; }

json metric_json(const MetricReport& r) {
  return {{"psnr", capped_psnr(r.psnr)}, {"ssim", r.ssim}, {"n_pixels", r.n_pixels}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << j.dump(2) << "\n";
}

// Runs fn, rethrowing any failure as a PipelineError for `stage`.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const AlignmentError& e) {
    throw PipelineError(name, e.view_index(), e.what());
  } catch (const std::exception& e) {
    throw PipelineError(name, -1, e.what());
  }
}

}  // namespace

std::string metric_report_json(const MetricReport& report) { return metric_json(report).dump(2); }

PipelineReport run_pipeline(const PipelineConfig& config, const LogFn& log) {
  const auto t0 = std::chrono::steady_clock::now();
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  stage("config", [&] { config.validate(); });

  const fs::path out_dir(config.output_dir);
  stage("write", [&] {
    fs::create_directories(out_dir / "views");
    fs::create_directories(out_dir / "depths");
    fs::create_directories(out_dir / "renders");
  });

  PipelineReport report;
  const bool synthetic = config.depth_source == DepthSource::Synth;
  const auto& scene = config.synth.scene;

  // -- panorama
  const EquirectImage pano = stage("panorama", [&] {
    if (!config.panorama.empty()) return EquirectImage(io::read_png(config.panorama));
    return synth::render_scene_equirect(scene, config.synth.pano_width, config.synth.pano_width / 2).image;
  });
  stage("write", [&] { io::write_png((out_dir / "panorama.png").string(), pano.pixels()); });
  say("panorama " + std::to_string(pano.width()) + "x" + std::to_string(pano.height()));

  // -- views
  const auto& tc = config.trajectory;
  const Trajectory traj =
      stage("views", [&] { return generate_trajectory(tc.n_yaw, tc.pitches_deg, tc.fov_deg, tc.view_width, tc.view_height); });
  const Intrinsics intr = traj.intrinsics();
  std::vector<RgbdView> views(traj.poses.size());
  for (std::size_t i = 0; i < traj.poses.size(); ++i)
    views[i].view = stage("views", [&] { return extract_perspective(pano, traj.poses[i], intr); });
  say("extracted " + std::to_string(views.size()) + " views");

  // -- depth
  std::vector<DepthMap> depths(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    depths[i] = stage("depth", [&] {
      if (synthetic) return synth::render_scene_perspective(scene, traj.poses[i], intr).depth;
      return io::read_pfm((fs::path(config.depth_dir) / numbered("depth_%03d.pfm", i)).string());
    });
    if (depths[i].width != intr.width || depths[i].height != intr.height)
      throw PipelineError("depth", static_cast<int>(i), "depth map size does not match the view size");
  }
  report.input_scales.assign(views.size(), 1.0);
  if (synthetic && config.synth.perturb) {
    auto perturbed = stage("depth", [&] {
      return synth::perturb_depths_seeded(depths, config.seed, config.synth.perturb_lo, config.synth.perturb_hi);
    });
    depths = std::move(perturbed.depths);
    report.input_scales = perturbed.scales;
  }
  Manifest manifest;
  manifest.intrinsics = intr;
  manifest.panorama = "panorama.png";
  for (std::size_t i = 0; i < views.size(); ++i) {
    views[i].depth = depths[i];
    ViewRecord rec;
    rec.index = static_cast<int>(i);
    rec.image = "views/" + numbered("view_%03d.png", i);
    rec.depth = "depths/" + numbered("depth_%03d.pfm", i);
    rec.pose = traj.poses[i];
    rec.yaw_deg = traj.yaw_deg[i];
    rec.pitch_deg = traj.pitch_deg[i];
    rec.depth_scale = report.input_scales[i];
    stage("write", [&] {
      io::write_png((out_dir / rec.image).string(), views[i].view.image);
      io::write_pfm((out_dir / rec.depth).string(), depths[i]);
    });
    manifest.views.push_back(rec);
  }
  stage("write", [&] { write_manifest((out_dir / "manifest.json").string(), manifest); });

  // -- fuse
  const FusionResult fused = stage("fuse", [&] { return fuse_views(views, intr, config.fusion()); });
  report.alignments = fused.alignments;
  report.omega_points = fused.omega.size();
  say("fused " + std::to_string(fused.omega.size()) + " points");
  stage("write", [&] {
    io::write_ply((out_dir / "omega.ply").string(), fused.omega);
    json al = json::array();
    for (std::size_t i = 0; i < fused.alignments.size(); ++i) {
      const auto& a = fused.alignments[i];
      al.push_back({{"view", i},
                    {"scale", a.scale},
                    {"input_scale", report.input_scales[i]},
                    {"final_loss", a.final_loss},
                    {"iterations", a.iterations},
                    {"converged", a.converged},
                    {"points_added", fused.added[i]}});
    }
    write_json(out_dir / "alignment.json", al);
  });

  // -- splat
  splat::SupervisionSet supervision;
  for (const auto& v : views)
    supervision.items.push_back({v.view.image, Mask(intr.width, intr.height, true), v.view.pose, intr});
  const auto opt = stage("splat", [&] {
    splat::GaussianCloud cloud = splat::init_gaussians(fused.omega, config.splat.knn, config.splat.background);
    if (config.splat.augment) {
      std::vector<CameraPose> extra;
      for (std::size_t i = 0; i < traj.poses.size(); ++i)
        extra.push_back(make_pose(deg_to_rad(traj.yaw_deg[i] + 180.0 / tc.n_yaw), deg_to_rad(traj.pitch_deg[i])));
      auto aug = splat::augment_supervision(fused.omega, extra, intr);
      for (auto& item : aug.items) supervision.items.push_back(std::move(item));
    }
    return splat::optimize(std::move(cloud), supervision, config.optimize_options());
  });
  report.gaussians = opt.cloud.size();
  report.loss_history = opt.loss_history;
  if (!opt.loss_history.empty())
    say("optimized " + std::to_string(opt.loss_history.size()) + " iterations, final loss " +
        std::to_string(opt.loss_history.back()));
  stage("write", [&] { io::write_ply((out_dir / "gaussians.ply").string(), opt.cloud); });

  // -- render + evaluate
  json evals = json::array();
  auto record = [&](const Image& rendered, const Image& reference, std::size_t i, const json& pose_info) {
    const MetricReport m = evaluate_images(rendered, reference);
    report.eval.push_back(m);
    json e = metric_json(m);
    e["pose"] = pose_info;
    evals.push_back(e);
    stage("write", [&] { io::write_png((out_dir / "renders" / numbered("eval_%02d.png", i)).string(), rendered); });
  };
  if (synthetic) {
    const Intrinsics eval_intr = intrinsics_from_fov(config.eval.fov_deg, config.eval.width, config.eval.height);
    const auto eval_poses = config.eval.poses.empty() ? default_heldout_poses() : config.eval.poses;
    for (std::size_t i = 0; i < eval_poses.size(); ++i) {
      const auto& hp = eval_poses[i];
      const CameraPose pose = hp.pose();
      const Image rendered = stage("render", [&] { return splat::render(opt.cloud, pose, eval_intr); });
      const Image oracle = stage("render", [&] { return synth::render_scene_perspective(scene, pose, eval_intr).image; });
      stage("write", [&] { io::write_png((out_dir / "renders" / numbered("oracle_%02d.png", i)).string(), oracle); });
      record(rendered, oracle, i,
             {{"yaw_deg", hp.yaw_deg}, {"pitch_deg", hp.pitch_deg},
              {"translation", {hp.translation[0], hp.translation[1], hp.translation[2]}}});
    }
  } else {
    for (std::size_t i = 0; i < views.size(); ++i) {
      const Image rendered = stage("render", [&] { return splat::render(opt.cloud, traj.poses[i], intr); });
      record(rendered, views[i].view.image, i, {{"view", i}});
    }
  }
  if (!report.eval.empty()) {
    double mse_sum = 0.0, ssim_sum = 0.0;
    for (const auto& m : report.eval) {
      mse_sum += std::isfinite(m.psnr) ? std::pow(10.0, -m.psnr / 10.0) : 0.0;
      ssim_sum += m.ssim;
      report.mean.n_pixels += m.n_pixels;
    }
    const double mse = mse_sum / static_cast<double>(report.eval.size());
    report.mean.psnr = mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity();
    report.mean.ssim = ssim_sum / static_cast<double>(report.eval.size());
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  stage("write", [&] {
    json losses = report.loss_history;
    write_json(out_dir / "metrics.json", {{"mean", metric_json(report.mean)},
                                          {"views", evals},
                                          {"omega_points", report.omega_points},
                                          {"gaussians", report.gaussians},
                                          {"loss_history", losses}});
  });
  say("mean PSNR " + std::to_string(capped_psnr(report.mean.psnr)) + " dB, SSIM " + std::to_string(report.mean.ssim));
  return report;
}

}  // namespace pano3d
