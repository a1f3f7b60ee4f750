// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Optional argument: a scratch directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "gradient_check.hpp"
#include "pano3d/fusion.hpp"
#include "pano3d/geometry.hpp"
#include "pano3d/metrics.hpp"
#include "pano3d/pipeline.hpp"
#include "pano3d/pointcloud.hpp"
#include "pano3d/synth.hpp"

using namespace pano3d;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::vector<RgbdView> room_views(const synth::BoxScene& scene, const Trajectory& t) {
  std::vector<RgbdView> views;
  for (const auto& p : t.poses) {
    auto r = synth::render_scene_perspective(scene, p, t.intrinsics());
    views.push_back({PerspectiveView{std::move(r.image), p, t.intrinsics()}, std::move(r.depth)});
  }
  return views;
}

void projection_round_trip() {
  const synth::BoxScene scene;
  const auto pano = synth::render_scene_equirect(scene, 1024, 512).image;
  const Trajectory t = generate_trajectory(8, {-45, 0, 45}, 90, 512, 512);
  const auto t0 = Clock::now();
  std::vector<PerspectiveView> views;
  for (const auto& p : t.poses) views.push_back(extract_perspective(pano, p, t.intrinsics()));
  const RestitchResult r = restitch_panorama(views, 1024, 512);
  const double secs = seconds_since(t0);
  const double p = psnr(pano.pixels(), r.panorama.pixels(), &r.covered);
  report(1, "projection round trip", r.coverage >= 0.99 && p >= 40.0 && secs < 10.0,
         fmt("coverage %.4f (>= 0.99), PSNR %.2f dB (>= 40), %.2f s (< 10)", r.coverage, p, secs));
}

void lift_project_identity() {
  const synth::BoxScene scene;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> yaw(-3.14, 3.14), pitch(-1.3, 1.3), fov(50, 110), t(-0.6, 0.6);
  std::uniform_int_distribution<int> size(24, 96);
  double worst = 0.0;
  int count_mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    CameraPose pose = make_pose(yaw(rng), pitch(rng));
    pose.translation = Vec3(t(rng), t(rng), t(rng));
    const Intrinsics K = intrinsics_from_fov(fov(rng), size(rng), size(rng));
    const auto v = synth::render_scene_perspective(scene, pose, K);
    const PointCloud pc = lift_rgbd(v.image, v.depth, K, pose);
    if (pc.size() != v.depth.valid_count()) ++count_mismatches;
    const Projection proj = project_cloud(pc, K, pose);
    for (int y = 0; y < K.height; ++y)
      for (int x = 0; x < K.width; ++x) {
        if (!v.depth.is_valid(x, y)) continue;
        if (!proj.depth.is_valid(x, y)) {
          worst = INFINITY;
          continue;
        }
        worst = std::max(worst, std::abs(proj.depth.at(x, y) - v.depth.at(x, y)));
      }
  }
  report(2, "lift/project identity", worst <= 1e-6 && count_mismatches == 0,
         fmt("max depth error %.3g (<= 1e-6), %d count mismatches (0)", worst, count_mismatches));
}

void alignment_recovery() {
  const PipelineConfig cfg = benchmark_config();
  const Trajectory t = generate_trajectory(cfg.trajectory.n_yaw, cfg.trajectory.pitches_deg, cfg.trajectory.fov_deg,
                                           cfg.trajectory.view_width, cfg.trajectory.view_height);
  auto views = room_views(cfg.synth.scene, t);
  std::vector<DepthMap> depths;
  for (const auto& v : views) depths.push_back(v.depth);
  const auto p = synth::perturb_depths_seeded(depths, cfg.seed, 0.7, 1.4);
  for (std::size_t i = 0; i < views.size(); ++i) views[i].depth = p.depths[i];

  const auto t0 = Clock::now();
  FusionConfig gd = cfg.fusion(), median = cfg.fusion();
  gd.solver = ScaleSolver::GradientDescent;
  median.solver = ScaleSolver::WeightedMedian;
  const FusionResult a = fuse_views(views, t.intrinsics(), gd);
  const FusionResult b = fuse_views(views, t.intrinsics(), median);
  const double secs = seconds_since(t0);

  double worst = 0.0, disagree = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    worst = std::max({worst, std::abs(a.alignments[i].scale * p.scales[i] - 1.0),
                      std::abs(b.alignments[i].scale * p.scales[i] - 1.0)});
    disagree = std::max(disagree, std::abs(a.alignments[i].scale - b.alignments[i].scale));
  }
  report(3, "alignment recovery", worst <= 0.01 && disagree <= 1e-3 && secs < 5.0,
         fmt("%zu views, max |d*s-1| %.2e (<= 0.01), GD vs median %.2e (<= 1e-3), %.2f s (< 5)", views.size(), worst,
             disagree, secs));
}

void fusion_quality() {
  const synth::BoxScene scene;
  const PipelineConfig cfg;
  const Trajectory t = generate_trajectory(cfg.trajectory.n_yaw, cfg.trajectory.pitches_deg, cfg.trajectory.fov_deg,
                                           256, 256);
  const Intrinsics K = t.intrinsics();
  const auto views = room_views(scene, t);
  FusionConfig fc = cfg.fusion();
  fc.solver = ScaleSolver::WeightedMedian;
  const FusionResult r = fuse_views(views, K, fc);

  double worst = 0.0;
  for (const auto& p : r.omega.positions) worst = std::max(worst, scene.distance_to_surface(p));
  const double bound = 1e-3 * scene.diagonal();

  // Newly exposed: valid pixels of view i that no earlier view's full cloud
  // reaches when projected into view i.
  std::size_t budget = views[0].depth.valid_count();
  PointCloud seen = lift_rgbd(views[0].view.image, views[0].depth, K, views[0].view.pose);
  for (std::size_t i = 1; i < views.size(); ++i) {
    const Projection proj = project_cloud(seen, K, views[i].view.pose);
    for (int y = 0; y < K.height; ++y)
      for (int x = 0; x < K.width; ++x)
        if (views[i].depth.is_valid(x, y) && !proj.mask.is_covered(x, y)) ++budget;
    seen.append(lift_rgbd(views[i].view.image, views[i].depth, K, views[i].view.pose, static_cast<int>(i)));
  }

  FusionConfig no_mask = fc;
  no_mask.use_masking = false;
  const std::size_t unmasked = fuse_views(views, K, no_mask).omega.size();
  const double ratio = static_cast<double>(r.omega.size()) / static_cast<double>(budget);
  report(5, "fusion quality", worst <= bound && ratio <= 1.25 && unmasked > r.omega.size(),
         fmt("max face distance %.2e (<= %.2e), |Omega| %zu = %.3f x budget %zu (<= 1.25), unmasked %zu (> %zu)", worst,
             bound, r.omega.size(), ratio, budget, unmasked, r.omega.size()));
}

void gradient_correctness() {
  double worst = 0.0;
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rep = gradcheck::check(gradcheck::random_scene(seed));
    worst = std::max(worst, rep.worst_rel);
    compared += rep.compared;
  }
  report(6, "splat gradient correctness", worst < 1e-4 && compared > 0,
         fmt("20 scenes, %d gradients, max relative error %.2e (< 1e-4)", compared, worst));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void end_to_end(const fs::path& scratch) {
  PipelineConfig full = benchmark_config();
  full.output_dir = (scratch / "full").string();
  const PipelineReport a = run_pipeline(full);

  bool ok = a.eval.size() == 4 && a.seconds < 300.0;
  std::string per_pose;
  for (const auto& m : a.eval) {
    ok = ok && m.psnr >= 25.0 && m.ssim >= 0.85;
    per_pose += fmt(" %.2f/%.3f", m.psnr, m.ssim);
  }
  report(7, "end-to-end benchmark", ok,
         fmt("PSNR/SSIM per pose%s (>= 25 dB, >= 0.85), %.1f s (< 300)", per_pose.c_str(), a.seconds));

  PipelineConfig ablated = full;
  ablated.alignment.enabled = false;
  ablated.output_dir = (scratch / "ablated").string();
  const PipelineReport b = run_pipeline(ablated);
  const double gap = a.mean.psnr - b.mean.psnr;
  report(4, "ablation direction", gap >= 10.0,
         fmt("aligned %.2f dB, unaligned %.2f dB, gap %.2f dB (>= 10)", a.mean.psnr, b.mean.psnr, gap));

  PipelineConfig again = full;
  again.output_dir = (scratch / "again").string();
  run_pipeline(again);
  int compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(full.output_dir)) {
    const auto ext = e.path().extension();
    if (ext != ".ply" && ext != ".png") continue;
    ++compared;
    const fs::path other = fs::path(again.output_dir) / fs::relative(e.path(), full.output_dir);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
  }
  report(8, "determinism", compared > 0 && differing == 0,
         fmt("%d PLY/PNG artifacts compared, %d differ (0)", compared, differing));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "pano3d_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  const std::vector<std::function<void()>> checks = {
      projection_round_trip, lift_project_identity, alignment_recovery, fusion_quality, gradient_correctness,
      [&] { end_to_end(scratch); }};
  for (const auto& c : checks) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("[FAIL] unexpected error: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
