#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pano3d/alignment.hpp"
#include "pano3d/fusion.hpp"
#include "pano3d/pointcloud.hpp"
#include "pano3d/synth.hpp"

using namespace pano3d;

namespace {

// An alignment instance built pixel by pixel: D is chosen so that the
// median weight w_p * D_p equals the requested weight.
struct Instance {
  Intrinsics K;
  DepthMap depth;
  CoverageMask mask;
  std::vector<double> d, ref, w;  // per covered pixel, for the oracle

  explicit Instance(int size) : K(intrinsics_from_fov(90, size, size)), depth(size, size), mask(size, size) {}

  void add(int x, int y, double weight, double ratio) {
    const double wp = K.ray_length_factor(x, y);
    const double D = weight / wp;
    depth.set(x, y, D);
    mask.covered[mask.index(x, y)] = 1;
    mask.ref_depth[mask.index(x, y)] = ratio * D;
    d.push_back(D);
    ref.push_back(ratio * D);
    w.push_back(wp);
  }
};

Instance random_instance(std::mt19937_64& rng, int size, int n, double lo, double hi) {
  Instance inst(size);
  std::uniform_int_distribution<int> px(0, size - 1);
  std::uniform_real_distribution<double> weight(0.5, 4.0), ratio(std::log(lo), std::log(hi));
  for (int i = 0; i < n; ++i) {
    const int x = px(rng), y = px(rng);
    if (inst.mask.is_covered(x, y)) continue;
    inst.add(x, y, weight(rng), std::exp(ratio(rng)));
  }
  return inst;
}

std::vector<RgbdView> room_views(const synth::BoxScene& scene, int n_yaw, const std::vector<double>& pitches,
                                 int size, Intrinsics& K) {
  const Trajectory t = generate_trajectory(n_yaw, pitches, 90, size, size);
  K = t.intrinsics();
  std::vector<RgbdView> views;
  for (const auto& p : t.poses) {
    auto r = synth::render_scene_perspective(scene, p, K);
    views.push_back({PerspectiveView{r.image, p, K}, r.depth});
  }
  return views;
}

}  // namespace

TEST_CASE("lift_rgbd basics") {
  const Intrinsics K{1.0, 1.0, 0.5, 0.5, 1, 1};
  Image img(1, 1, Color(1, 0, 0));
  DepthMap d(1, 1);
  d.set(0, 0, 2.0);

  const PointCloud a = lift_rgbd(img, d, K, make_pose(0, 0), 4);
  REQUIRE(a.size() == 1);
  CHECK((a.positions[0] - Vec3(0, 0, 2)).norm() < 1e-15);
  CHECK(a.colors[0] == Color(1, 0, 0));
  CHECK(a.view_ids[0] == 4);

  const PointCloud b = lift_rgbd(img, d, K, make_pose(oracle::kPi / 2, 0));
  CHECK((b.positions[0] - Vec3(2, 0, 0)).norm() < 1e-15);

  CoverageMask full(1, 1);
  full.covered[0] = 1;
  CHECK(lift_rgbd(img, d, K, make_pose(0, 0), 0, &full).empty());

  CHECK_THROWS_AS(lift_rgbd(Image(2, 1), d, K, make_pose(0, 0)), std::invalid_argument);
}

TEST_CASE("depth validity") {
  DepthMap d(3, 1);
  d.set(0, 0, 1.0);
  d.set(1, 0, 0.0);
  d.set(2, 0, std::numeric_limits<double>::quiet_NaN());
  CHECK(d.valid_count() == 1);
  const PointCloud c = lift_rgbd(Image(3, 1), d, Intrinsics{1, 1, 1.5, 0.5, 3, 1}, CameraPose{});
  CHECK(c.size() == 1);
}

TEST_CASE("project_cloud basics") {
  const Intrinsics K = intrinsics_from_fov(90, 512, 512);
  PointCloud c;
  c.push_back(Vec3(0, 0, 2), Color(1, 1, 1), 0);
  const Projection p = project_cloud(c, K, make_pose(0, 0));
  CHECK(p.mask.covered_count() == 1);
  CHECK(p.mask.is_covered(256, 256));
  CHECK(p.mask.ref_depth[p.mask.index(256, 256)] == 2.0);
  CHECK(p.image.at(256, 256) == Color(1, 1, 1));

  PointCloud behind;
  behind.push_back(Vec3(0, 0, -1), Color(1, 1, 1), 0);
  CHECK(project_cloud(behind, K, make_pose(0, 0)).mask.covered_count() == 0);
  CHECK(project_cloud(PointCloud{}, K, make_pose(0, 0)).mask.covered_count() == 0);
}

TEST_CASE("project_cloud z-buffer keeps the nearest point, ties to the lowest index") {
  const Intrinsics K = intrinsics_from_fov(90, 8, 8);
  PointCloud c;
  c.push_back(Vec3(0, 0, 3), Color(1, 0, 0), 0);
  c.push_back(Vec3(0, 0, 2), Color(0, 1, 0), 0);
  c.push_back(Vec3(0, 0, 2), Color(0, 0, 1), 0);
  const Projection p = project_cloud(c, K, CameraPose{});
  CHECK(p.mask.covered_count() == 1);
  CHECK(p.image.at(4, 4) == Color(0, 1, 0));
  CHECK(p.depth.at(4, 4) == 2.0);
}

TEST_CASE("lift then project reproduces depth") {
  const synth::BoxScene scene;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> yaw(-oracle::kPi, oracle::kPi), pitch(-1.2, 1.2), fov(40, 110);
  for (int i = 0; i < 10; ++i) {
    const Intrinsics K = intrinsics_from_fov(fov(rng), 48, 40);
    const CameraPose pose = make_pose(yaw(rng), pitch(rng));
    const auto r = synth::render_scene_perspective(scene, pose, K);
    const PointCloud cloud = lift_rgbd(r.image, r.depth, K, pose);
    CHECK(cloud.size() == r.depth.valid_count());
    const Projection p = project_cloud(cloud, K, pose);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 48; ++x) {
        if (!r.depth.is_valid(x, y)) continue;
        REQUIRE(p.mask.is_covered(x, y));
        CHECK(std::abs(p.mask.ref_depth[p.mask.index(x, y)] - r.depth.at(x, y)) < 1e-6);
      }
  }
}

TEST_CASE("dilate_mask") {
  CoverageMask m(7, 7);
  m.covered[m.index(3, 3)] = 1;
  m.ref_depth[m.index(3, 3)] = 5.0;

  const CoverageMask same = dilate_mask(m, 0);
  CHECK(same.covered == m.covered);
  CHECK(same.ref_depth == m.ref_depth);

  const CoverageMask one = dilate_mask(m, 1);
  CHECK(one.covered_count() == 9);
  for (int y = 2; y <= 4; ++y)
    for (int x = 2; x <= 4; ++x) {
      CHECK(one.is_covered(x, y));
      CHECK(one.ref_depth[one.index(x, y)] == 5.0);
    }

  SUBCASE("nearest original pixel wins") {
    CoverageMask two(9, 1);
    two.covered[0] = two.covered[8] = 1;
    two.ref_depth[0] = 1.0;
    two.ref_depth[8] = 2.0;
    const CoverageMask d = dilate_mask(two, 4);
    CHECK(d.ref_depth[3] == 1.0);
    CHECK(d.ref_depth[5] == 2.0);
    CHECK(d.ref_depth[4] == 1.0);  // equidistant: scan order
  }

  SUBCASE("dilation composes") {
    std::mt19937_64 rng(8);
    std::bernoulli_distribution on(0.05);
    CoverageMask r(20, 15);
    for (auto& c : r.covered) c = on(rng);
    CHECK(dilate_mask(dilate_mask(r, 1), 1).covered == dilate_mask(r, 2).covered);
    CHECK(dilate_mask(dilate_mask(r, 2), 1).covered == dilate_mask(r, 3).covered);
  }
}

TEST_CASE("alignment loss") {
  const Intrinsics K = intrinsics_from_fov(90, 4, 4);
  DepthMap d(4, 4);
  CoverageMask m(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      d.set(x, y, 1.0 + 0.1 * x + 0.05 * y);
      m.covered[m.index(x, y)] = 1;
      m.ref_depth[m.index(x, y)] = 2.0 * d.at(x, y);
    }
  const AlignmentLoss at2 = alignment_loss(2.0, d, m, K);
  CHECK(at2.loss == doctest::Approx(0.0));
  CHECK(at2.gradient == 0.0);
  CHECK(at2.count == 16);

  SUBCASE("principal pixel") {
    const Intrinsics one{1.0, 1.0, 0.5, 0.5, 1, 1};
    DepthMap d1(1, 1);
    d1.set(0, 0, 1.0);
    CoverageMask m1(1, 1);
    m1.covered[0] = 1;
    m1.ref_depth[0] = 3.0;
    const AlignmentLoss l = alignment_loss(1.0, d1, m1, one);
    CHECK(l.loss == 2.0);
    CHECK(l.gradient == -1.0);
  }

  SUBCASE("summand is the 3D distance along the ray") {
    const Intrinsics K3 = intrinsics_from_fov(90, 3, 3);
    DepthMap d1(3, 3);
    CoverageMask m1(3, 3);
    d1.set(0, 0, 2.0);
    m1.covered[m1.index(0, 0)] = 1;
    m1.ref_depth[m1.index(0, 0)] = 3.0;
    const Vec3 a = 2.0 / pixel_to_ray(K3, 0, 0).z() * pixel_to_ray(K3, 0, 0);
    const Vec3 b = 3.0 / pixel_to_ray(K3, 0, 0).z() * pixel_to_ray(K3, 0, 0);
    CHECK(alignment_loss(1.0, d1, m1, K3).loss == doctest::Approx((a - b).norm()).epsilon(1e-14));
  }

  CHECK_THROWS_AS(alignment_loss(1.0, d, CoverageMask(4, 4), K), AlignmentError);
}

TEST_CASE("alignment gradient matches finite differences away from kinks") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Instance inst = random_instance(rng, 32, 400, 0.5, 2.0);
    std::uniform_real_distribution<double> pick(0.6, 1.8);
    double s = pick(rng);
    // Move off any breakpoint by more than the stencil.
    const double h = 1e-7;
    bool near_kink = true;
    while (near_kink) {
      near_kink = false;
      for (std::size_t i = 0; i < inst.d.size(); ++i)
        if (std::abs(s - inst.ref[i] / inst.d[i]) < 10 * h) near_kink = true;
      if (near_kink) s = pick(rng);
    }
    const double fd = (alignment_loss(s + h, inst.depth, inst.mask, inst.K).loss -
                       alignment_loss(s - h, inst.depth, inst.mask, inst.K).loss) /
                      (2 * h);
    const double g = alignment_loss(s, inst.depth, inst.mask, inst.K).gradient;
    CHECK(std::abs(fd - g) <= 1e-6 * std::max(std::abs(g), 1e-3));
  }
}

TEST_CASE("alignment loss is convex in the scale") {
  std::mt19937_64 rng(4);
  const Instance inst = random_instance(rng, 24, 200, 0.3, 3.0);
  std::uniform_real_distribution<double> s(0.1, 5.0);
  for (int i = 0; i < 300; ++i) {
    double a = s(rng), b = s(rng), c = s(rng);
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    const double lb = alignment_loss(b, inst.depth, inst.mask, inst.K).loss;
    CHECK(lb <= std::max(alignment_loss(a, inst.depth, inst.mask, inst.K).loss,
                         alignment_loss(c, inst.depth, inst.mask, inst.K).loss) + 1e-12);
  }
}

TEST_CASE("gradient descent alignment") {
  const GdOptions opts;
  SUBCASE("uniform ratio 2") {
    Instance inst(16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) inst.add(x, y, 1.0 + 0.01 * (x + y), 2.0);
    const AlignmentResult r = align_scale_gd(inst.depth, inst.mask, inst.K, opts);
    CHECK(std::abs(r.scale - 2.0) < 1e-3);
    CHECK(r.converged);
  }
  SUBCASE("already aligned") {
    Instance inst(8);
    for (int x = 0; x < 8; ++x) inst.add(x, 3, 1.0, 1.0);
    const AlignmentResult r = align_scale_gd(inst.depth, inst.mask, inst.K, opts);
    CHECK(std::abs(r.scale - 1.0) < 1e-6);
    CHECK(r.final_loss == doctest::Approx(0.0));
  }
  SUBCASE("ratios 1, 2, 3 with equal weights") {
    Instance inst(8);
    inst.add(1, 1, 1.0, 1.0);
    inst.add(2, 2, 1.0, 2.0);
    inst.add(3, 3, 1.0, 3.0);
    CHECK(std::abs(align_scale_gd(inst.depth, inst.mask, inst.K, opts).scale - 2.0) < 1e-3);
  }
  SUBCASE("empty overlap") {
    Instance inst(4);
    inst.depth.set(0, 0, 1.0);
    CHECK_THROWS_AS(align_scale_gd(inst.depth, inst.mask, inst.K, opts), AlignmentError);
  }
}

TEST_CASE("weighted median alignment") {
  SUBCASE("exact scale") {
    Instance inst(8);
    for (int x = 0; x < 8; ++x) inst.add(x, x, 1.0 + x, 1.7);
    const AlignmentResult r = align_scale_median(inst.depth, inst.mask, inst.K);
    CHECK(r.scale == inst.ref[0] / inst.d[0]);
    CHECK(r.iterations == 0);
    CHECK(r.converged);
  }
  SUBCASE("ratios 1, 2, 3 with equal weights") {
    Instance inst(8);
    inst.add(1, 1, 1.0, 1.0);
    inst.add(2, 2, 1.0, 2.0);
    inst.add(3, 3, 1.0, 3.0);
    const double r = align_scale_median(inst.depth, inst.mask, inst.K).scale;
    CHECK(r == doctest::Approx(2.0).epsilon(1e-14));
    // Brute-force scan of the objective over [0.1, 10].
    double best = 0.0, best_f = 1e300;
    for (double s = 0.1; s <= 10.0; s += 1e-4) {
      const double f = alignment_loss(s, inst.depth, inst.mask, inst.K).loss;
      if (f < best_f) best_f = f, best = s;
    }
    CHECK(std::abs(best - r) < 2e-4);
  }
  SUBCASE("ratios 1 and 4 with weights 3 and 1") {
    Instance inst(8);
    inst.add(1, 1, 3.0, 1.0);
    inst.add(2, 2, 1.0, 4.0);
    CHECK(align_scale_median(inst.depth, inst.mask, inst.K).scale == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("even split picks the lower median") {
    Instance inst(8);
    inst.add(1, 1, 1.0, 1.5);
    inst.add(2, 2, 1.0, 2.5);
    CHECK(align_scale_median(inst.depth, inst.mask, inst.K).scale == doctest::Approx(1.5).epsilon(1e-14));
  }
}

TEST_CASE("median solver agrees with the breakpoint scan and GD") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = random_instance(rng, 40, 300, 0.25, 4.0);
    REQUIRE(inst.d.size() >= 100);
    const double med = align_scale_median(inst.depth, inst.mask, inst.K).scale;
    // Oracle minimizes sum w |s D - Dref| over the breakpoints.
    const double scan = oracle::l1_scale_scan(inst.d, inst.ref, inst.w);
    const double fm = alignment_loss(med, inst.depth, inst.mask, inst.K).loss;
    const double fs = alignment_loss(scan, inst.depth, inst.mask, inst.K).loss;
    CHECK(fm <= fs + 1e-12);
    const double gd = align_scale_gd(inst.depth, inst.mask, inst.K, GdOptions{}).scale;
    CHECK(std::abs(gd - med) <= 1e-3);
  }
}

TEST_CASE("alignment is scale equivariant") {
  std::mt19937_64 rng(23);
  const Instance inst = random_instance(rng, 32, 250, 0.5, 2.0);
  const double base = align_scale_median(inst.depth, inst.mask, inst.K).scale;
  const double base_gd = align_scale_gd(inst.depth, inst.mask, inst.K, GdOptions{}).scale;
  for (double s : {2.0, 0.25, 1.37}) {
    DepthMap scaled = inst.depth;
    for (auto& v : scaled.values) v *= s;
    const double med = align_scale_median(scaled, inst.mask, inst.K).scale;
    if (s == 2.0 || s == 0.25)
      CHECK(med == base / s);  // powers of two scale exactly
    else
      CHECK(med == doctest::Approx(base / s).epsilon(1e-14));
    CHECK(std::abs(align_scale_gd(scaled, inst.mask, inst.K, GdOptions{}).scale - base_gd / s) < 1e-3);
  }
}

TEST_CASE("fusion of a single view keeps every valid pixel") {
  Intrinsics K;
  auto views = room_views(synth::BoxScene{}, 1, {0}, 32, K);
  const FusionResult r = fuse_views(views, K);
  CHECK(r.omega.size() == views[0].depth.valid_count());
  CHECK(r.alignments.size() == 1);
  CHECK(r.alignments[0].scale == 1.0);
}

TEST_CASE("fusing two coincident views adds almost nothing") {
  Intrinsics K;
  auto views = room_views(synth::BoxScene{}, 1, {0}, 64, K);
  views.push_back(views[0]);
  const FusionResult r = fuse_views(views, K);
  CHECK(r.added[1] <= 64 * 64 / 100);
  CHECK(std::abs(r.alignments[1].scale - 1.0) < 1e-6);
  FusionConfig median;
  median.solver = ScaleSolver::WeightedMedian;
  CHECK(fuse_views(views, K, median).alignments[1].scale == 1.0);
}

TEST_CASE("fusion properties on the room") {
  const synth::BoxScene scene;
  Intrinsics K;
  const auto views = room_views(scene, 8, {-45, 0, 45}, 48, K);
  FusionConfig cfg;
  cfg.solver = ScaleSolver::WeightedMedian;
  const FusionResult r = fuse_views(views, K, cfg);

  // Geometric soundness.
  double worst = 0.0;
  for (const auto& p : r.omega.positions) worst = std::max(worst, scene.distance_to_surface(p));
  CHECK(worst <= 1e-3 * scene.diagonal());

  // Monotone growth, and view i only fills pixels its dilated mask left open.
  PointCloud acc;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const CoverageMask mask = dilate_mask(project_cloud(acc, K, views[i].view.pose).mask, cfg.dilate_radius);
    PointCloud added;
    for (std::size_t k = cursor; k < cursor + r.added[i]; ++k) {
      REQUIRE(r.omega.view_ids[k] == static_cast<int>(i));
      added.push_back(r.omega.positions[k], r.omega.colors[k], static_cast<int>(i));
      const auto px = camera_to_pixel(K, views[i].view.pose.to_camera(r.omega.positions[k]));
      REQUIRE(px.has_value());
      const int x = static_cast<int>(std::floor(px->x() + 0.5)), y = static_cast<int>(std::floor(px->y() + 0.5));
      if (i > 0) CHECK_FALSE(mask.is_covered(x, y));
    }
    cursor += r.added[i];
    acc.append(added);
  }
  CHECK(cursor == r.omega.size());

  FusionConfig no_mask = cfg;
  no_mask.use_masking = false;
  CHECK(fuse_views(views, K, no_mask).omega.size() > r.omega.size());
}

TEST_CASE("fusion recovers perturbed depth scales") {
  Intrinsics K;
  auto views = room_views(synth::BoxScene{}, 8, {-45, 0, 45}, 48, K);
  std::vector<DepthMap> depths;
  for (const auto& v : views) depths.push_back(v.depth);
  const auto p = synth::perturb_depths_seeded(depths, 5, 0.7, 1.4);
  for (std::size_t i = 0; i < views.size(); ++i) views[i].depth = p.depths[i];
  for (auto solver : {ScaleSolver::GradientDescent, ScaleSolver::WeightedMedian}) {
    FusionConfig cfg;
    cfg.solver = solver;
    const FusionResult r = fuse_views(views, K, cfg);
    for (std::size_t i = 0; i < views.size(); ++i) CHECK(std::abs(r.alignments[i].scale * p.scales[i] - 1.0) <= 0.01);
  }
}

TEST_CASE("fusion names the view that cannot be aligned") {
  Intrinsics K;
  // Opposite 60 degree views never overlap.
  const Trajectory t = generate_trajectory(2, {0}, 60, 24, 24);
  K = t.intrinsics();
  std::vector<RgbdView> views;
  for (const auto& p : t.poses) {
    auto r = synth::render_scene_perspective(synth::BoxScene{}, p, K);
    views.push_back({PerspectiveView{r.image, p, K}, r.depth});
  }
  try {
    fuse_views(views, K);
    FAIL("expected an alignment error");
  } catch (const AlignmentError& e) {
    CHECK(e.view_index() == 1);
  }
}
