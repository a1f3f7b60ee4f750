#include <benchmark/benchmark.h>

#include <random>

#include "pano3d/geometry.hpp"
#include "pano3d/metrics.hpp"
#include "pano3d/pointcloud.hpp"
#include "pano3d/splat.hpp"
#include "pano3d/synth.hpp"

using namespace pano3d;

namespace {

const EquirectImage& room_panorama() {
  static const EquirectImage pano = synth::render_scene_equirect(synth::BoxScene{}, 1024, 512).image;
  return pano;
}

PointCloud room_cloud(int size) {
  const Intrinsics K = intrinsics_from_fov(90, size, size);
  const auto v = synth::render_scene_perspective(synth::BoxScene{}, make_pose(0, 0), K);
  return lift_rgbd(v.image, v.depth, K, make_pose(0, 0));
}

splat::GaussianCloud room_gaussians(int size) {
  return splat::init_gaussians(room_cloud(size), 3, Color::Zero());
}

void BM_ExtractPerspective(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const Intrinsics K = intrinsics_from_fov(90, size, size);
  const CameraPose pose = make_pose(0.4, 0.2);
  const EquirectImage& pano = room_panorama();
  for (auto _ : state) benchmark::DoNotOptimize(extract_perspective(pano, pose, K));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_ExtractPerspective)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ProjectCloud(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const PointCloud cloud = room_cloud(size);
  const Intrinsics K = intrinsics_from_fov(90, size, size);
  const CameraPose pose = make_pose(0.3, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(project_cloud(cloud, K, pose));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud.size()));
}
BENCHMARK(BM_ProjectCloud)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Render(benchmark::State& state) {
  const auto cloud = room_gaussians(128);
  const Intrinsics K = intrinsics_from_fov(90, 256, 256);
  const CameraPose pose = make_pose(0.3, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(splat::render(cloud, pose, K));
}
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);

void BM_RenderWithGrads(benchmark::State& state) {
  const auto cloud = room_gaussians(128);
  const Intrinsics K = intrinsics_from_fov(90, 256, 256);
  const CameraPose pose = make_pose(0.3, 0.1);
  const Image target = synth::render_scene_perspective(synth::BoxScene{}, pose, K).image;
  const Mask valid(256, 256, true);
  for (auto _ : state) benchmark::DoNotOptimize(splat::render_with_grads(cloud, pose, K, target, valid));
}
BENCHMARK(BM_RenderWithGrads)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  Image a(size, size), b(size, size);
  for (auto& v : a.data()) v = u(rng);
  for (auto& v : b.data()) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
