#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "gspr/error.hpp"
#include "gspr/mgs_prep.hpp"
#include "gspr/spatial.hpp"
#include "oracles.hpp"

namespace {

using gspr::Vec3;

// Camera looking down LiDAR +x: camera x = -lidar y, camera y = -lidar z.
gspr::Camera forward_camera(double f = 40.0, int w = 80, int h = 60) {
  gspr::Camera c;
  c.intrinsics << f, 0, w / 2.0, 0, f, h / 2.0, 0, 0, 1;
  c.rotation << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  c.width = w;
  c.height = h;
  return c;
}

gspr::CameraView make_view(const gspr::Camera& cam, double gray = 0.5) {
  gspr::CameraView v;
  v.camera = cam;
  v.image = gspr::make_image(cam.width, cam.height, gray);
  v.semantic_map = gspr::SemanticMap(cam.width, cam.height, 1, 2);
  return v;
}

// Per-point projection check written straight from the frustum definition.
bool in_frustum(const Vec3& p, const gspr::Camera& c) {
  const Vec3 pc = c.rotation * p + c.translation;
  if (!(pc.z() > 0)) return false;
  const double u = (c.intrinsics(0, 0) * pc.x() + c.intrinsics(0, 1) * pc.y()) / pc.z() + c.intrinsics(0, 2);
  const double v = c.intrinsics(1, 1) * pc.y() / pc.z() + c.intrinsics(1, 2);
  return u >= 0 && u < c.width && v >= 0 && v < c.height;
}

TEST(FrustumCull, OpticalAxisPointIncluded) {
  const auto cam = forward_camera();
  const std::vector<Vec3> pts{{5, 0, 0}};
  EXPECT_EQ(gspr::frustum_cull(pts, cam), std::vector<std::size_t>{0});
  const auto uv = gspr::project(pts[0], cam);
  ASSERT_TRUE(uv);
  EXPECT_NEAR(uv->x(), 40.0, 1e-12);
  EXPECT_NEAR(uv->y(), 30.0, 1e-12);
}

TEST(FrustumCull, BehindCameraExcluded) {
  const std::vector<Vec3> pts{{-1, 0, 0}};
  EXPECT_TRUE(gspr::frustum_cull(pts, forward_camera()).empty());
}

TEST(FrustumCull, MatchesBruteForceOracle) {
  oracle::Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto cam = forward_camera(oracle::uniform(rng, 10, 80));
    cam.translation = {oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)};
    const auto pts = oracle::random_points(rng, 1000, 20);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (in_frustum(pts[i], cam)) expect.push_back(i);
    EXPECT_EQ(gspr::frustum_cull(pts, cam), expect);
  }
}

TEST(Colorize, ConstantImageGivesConstantColor) {
  const auto view = make_view(forward_camera(), 0.37);
  oracle::Rng rng(1);
  auto pts = oracle::random_points(rng, 500, 5);
  for (auto& p : pts) p.x() = std::abs(p.x()) + 8;
  std::vector<Vec3> visible;
  for (auto i : gspr::frustum_cull(pts, view.camera)) visible.push_back(pts[i]);
  ASSERT_FALSE(visible.empty());
  for (const auto& c : gspr::colorize_points(visible, view)) EXPECT_TRUE(c.isApprox(Eigen::Vector3d::Constant(0.37)));
}

TEST(Colorize, PixelCenterReturnsPixel) {
  auto view = make_view(forward_camera(), 0.0);
  view.image.at(40, 30, 0) = 0.9;
  view.image.at(40, 30, 1) = 0.2;
  view.image.at(40, 30, 2) = 0.4;
  const std::vector<Vec3> pts{{5, 0, 0}};
  const auto c = gspr::colorize_points(pts, view)[0];
  EXPECT_NEAR(c[0], 0.9, 1e-15);
  EXPECT_NEAR(c[1], 0.2, 1e-15);
  EXPECT_NEAR(c[2], 0.4, 1e-15);
}

TEST(Colorize, MidwayBetweenHorizontalNeighbours) {
  auto view = make_view(forward_camera(), 0.0);
  for (int ch = 0; ch < 3; ++ch) {
    view.image.at(40, 30, ch) = 0.2;
    view.image.at(41, 30, ch) = 0.6;
  }
  // u = 40.5: lidar y = -0.5 * depth / f
  const std::vector<Vec3> pts{{8, -0.5 * 8 / 40.0, 0}};
  EXPECT_NEAR(gspr::colorize_points(pts, view)[0][0], 0.4, 1e-12);
}

TEST(Colorize, OutsideFrustumNamesIndex) {
  const auto view = make_view(forward_camera());
  const std::vector<Vec3> pts{{5, 0, 0}, {-3, 0, 0}};
  try {
    gspr::colorize_points(pts, view);
    FAIL();
  } catch (const gspr::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("point 1"), std::string::npos);
  }
}

// Fuzz: culling then coloring never samples outside the image.
TEST(Colorize, FuzzNeverLeavesImage) {
  oracle::Rng rng(99);
  auto view = make_view(forward_camera(25, 31, 17));
  for (double& v : view.image.data) v = oracle::uniform(rng, 0, 1);
  const auto pts = oracle::random_points(rng, 10000, 30);
  std::vector<Vec3> visible;
  for (auto i : gspr::frustum_cull(pts, view.camera)) visible.push_back(pts[i]);
  ASSERT_GT(visible.size(), 100u);
  for (const auto& c : gspr::colorize_points(visible, view)) {
    EXPECT_TRUE((c.array() >= 0).all() && (c.array() <= 1).all());
  }
}

TEST(Colorize, MultiViewPrefersSmallestDepth) {
  gspr::CalibratedFrame frame;
  auto near_cam = forward_camera();
  near_cam.translation = {0, 0, -2};  // camera 2 m ahead of the LiDAR
  frame.views.push_back(make_view(forward_camera(), 0.1));
  frame.views.push_back(make_view(near_cam, 0.8));
  const std::vector<Vec3> pts{{10, 0, 0}};
  EXPECT_NEAR(gspr::colorize_points(pts, frame)[0][0], 0.8, 1e-12);
}

std::vector<Vec3> plane_with_structure(oracle::Rng& rng, double sigma, std::size_t ground, std::size_t above) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < ground; ++i)
    pts.emplace_back(oracle::uniform(rng, -20, 20), oracle::uniform(rng, -20, 20), -2.0 + (sigma > 0 ? noise(rng) : 0.0));
  for (std::size_t i = 0; i < above; ++i)
    pts.emplace_back(oracle::uniform(rng, -20, 20), oracle::uniform(rng, -20, 20), oracle::uniform(rng, 0, 5));
  return pts;
}

TEST(FilterGround, ExactPlaneKeepsElevatedPoints) {
  oracle::Rng rng(7);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(oracle::uniform(rng, -10, 10), oracle::uniform(rng, -10, 10), -2.0);
  for (int i = 0; i < 10; ++i) pts.emplace_back(oracle::uniform(rng, -10, 10), oracle::uniform(rng, -10, 10), 0.0);
  const auto r = gspr::filter_ground(pts, {0.2, 200, 0, 30});
  std::vector<std::size_t> expect(10);
  std::iota(expect.begin(), expect.end(), 300);
  EXPECT_TRUE(r.removed);
  EXPECT_EQ(r.kept, expect);
}

TEST(FilterGround, AllElevatedPointsSurvive) {
  oracle::Rng rng(8);
  auto pts = plane_with_structure(rng, 0.0, 200, 0);
  // an elevated cloud, far above the dominant plane's threshold
  std::vector<Vec3> elevated;
  for (int i = 0; i < 50; ++i) elevated.emplace_back(oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5), 3 + i * 0.05);
  pts.insert(pts.end(), elevated.begin(), elevated.end());
  const auto r = gspr::filter_ground(pts);
  for (std::size_t i = 200; i < pts.size(); ++i) EXPECT_TRUE(std::binary_search(r.kept.begin(), r.kept.end(), i));
}

TEST(FilterGround, SteepPlaneRemovesNothing) {
  oracle::Rng rng(9);
  std::vector<Vec3> wall;
  for (int i = 0; i < 200; ++i) wall.emplace_back(5.0, oracle::uniform(rng, -10, 10), oracle::uniform(rng, -2, 5));
  const auto r = gspr::filter_ground(wall);
  EXPECT_FALSE(r.removed);
  EXPECT_EQ(r.kept.size(), wall.size());
}

TEST(FilterGround, NoisyPlaneMatchesDistanceOracle) {
  oracle::Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = plane_with_structure(rng, 0.02, 400, 100);
    const gspr::GroundFilterOptions opts{0.2, 200, static_cast<std::uint64_t>(trial), 30};
    const auto r = gspr::filter_ground(pts, opts);
    ASSERT_TRUE(r.removed);
    std::vector<std::size_t> expect;
    const Vec3 n = r.plane.normal;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::abs(n.x() * pts[i].x() + n.y() * pts[i].y() + n.z() * pts[i].z() + r.plane.offset) > 0.2) {
        expect.push_back(i);
      }
    }
    EXPECT_EQ(r.kept, expect);
    EXPECT_NEAR(std::abs(n.z()), 1.0, 1e-3);
  }
}

TEST(FilterGround, TooFewPointsIsInputError) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(gspr::filter_ground(pts), gspr::InputError);
}

// Property: permuting the input permutes the kept set accordingly.
TEST(FilterGround, PermutationEquivariant) {
  oracle::Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pts = plane_with_structure(rng, 0.03, 300, 80);
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vec3> shuffled;
    for (auto i : perm) shuffled.push_back(pts[i]);
    const auto a = gspr::filter_ground(pts).kept;
    std::set<std::size_t> mapped;
    for (auto i : gspr::filter_ground(shuffled).kept) mapped.insert(perm[i]);
    EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()), mapped);
  }
}

bool inside_box(const Vec3& p, const gspr::Box3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const Vec3 d = p - b.center;
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= b.size.x() / 2 && std::abs(ly) <= b.size.y() / 2 && std::abs(d.z()) <= b.size.z() / 2;
}

TEST(EraseBoxes, CenterErasedOutsideKept) {
  const std::vector<gspr::Box3D> boxes{{{3, 3, 0}, {2, 2, 2}, 0.4, 13}};
  const std::vector<Vec3> pts{{3, 3, 0}, {10, 10, 0}};
  EXPECT_EQ(gspr::erase_boxes(pts, boxes), std::vector<std::size_t>{1});
}

TEST(EraseBoxes, MatchesInsideTestOracle) {
  oracle::Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<gspr::Box3D> boxes;
    for (int b = 0; b < 4; ++b) {
      boxes.push_back({{oracle::uniform(rng, -8, 8), oracle::uniform(rng, -8, 8), oracle::uniform(rng, -1, 1)},
                       {oracle::uniform(rng, 0.5, 5), oracle::uniform(rng, 0.5, 5), oracle::uniform(rng, 0.5, 3)},
                       oracle::uniform(rng, -3.2, 3.2),
                       13});
    }
    const auto pts = oracle::random_points(rng, 2000, 10);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::none_of(boxes.begin(), boxes.end(), [&](const auto& b) { return inside_box(pts[i], b); })) {
        expect.push_back(i);
      }
    }
    EXPECT_EQ(gspr::erase_boxes(pts, boxes), expect);
    // permutation equivariance
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vec3> shuffled;
    for (auto i : perm) shuffled.push_back(pts[i]);
    std::set<std::size_t> mapped;
    for (auto i : gspr::erase_boxes(shuffled, boxes)) mapped.insert(perm[i]);
    EXPECT_EQ(std::set<std::size_t>(expect.begin(), expect.end()), mapped);
  }
}

TEST(Dome, RadiusIsFactorTimesMaxRange) {
  const std::vector<Vec3> pts{{50, 0, 0}, {3, 4, 0}};
  const auto dome = gspr::generate_dome(pts, 800, 1.2);
  for (const auto& d : dome) EXPECT_NEAR(d.norm(), 60.0, 1e-6);
}

TEST(Dome, CountAndUpperHemisphere) {
  const std::vector<Vec3> pts{{10, 0, 0}};
  const auto dome = gspr::generate_dome(pts, 500, 1.0);
  EXPECT_EQ(dome.size(), 500u);
  for (const auto& d : dome) EXPECT_GE(d.z(), 0.0);
}

TEST(Dome, NearestNeighbourSpacingIsEven) {
  const std::vector<Vec3> pts{{1, 0, 0}};
  const auto dome = gspr::generate_dome(pts, 2000, 1.0);
  const auto nn = oracle::knn(dome, 1, true);
  std::vector<double> gaps;
  for (std::size_t i = 0; i < dome.size(); ++i) gaps.push_back((dome[i] - dome[nn[i]]).norm());
  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / gaps.size();
  double var = 0;
  for (double g : gaps) var += (g - mean) * (g - mean);
  const double cv = std::sqrt(var / gaps.size()) / mean;
  EXPECT_LT(cv, 0.25);
}

// Property: the radius holds for any cloud and factor.
TEST(Dome, RadiusPropertyRandomClouds) {
  oracle::Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = oracle::random_points(rng, 100, oracle::uniform(rng, 1, 80));
    double max_r = 0;
    for (const auto& p : pts) max_r = std::max(max_r, p.norm());
    const double f = oracle::uniform(rng, 1, 3);
    for (const auto& d : gspr::generate_dome(pts, 300, f)) ASSERT_NEAR(d.norm(), f * max_r, 1e-6);
  }
}

TEST(Dome, RejectsBadArguments) {
  const std::vector<Vec3> none;
  const std::vector<Vec3> one{{1, 0, 0}};
  EXPECT_THROW(gspr::generate_dome(none, 10, 1.2), gspr::InputError);
  EXPECT_THROW(gspr::generate_dome(one, 10, 0.5), gspr::InputError);
}

TEST(StaticMask, Examples) {
  gspr::SemanticMap sky(6, 4, 1, gspr::semantic::kSky);
  const std::vector<std::uint16_t> classes{gspr::semantic::kSky};
  const auto all = gspr::make_static_mask(sky, classes);
  EXPECT_TRUE(std::all_of(all.data.begin(), all.data.end(), [](auto v) { return v != 0; }));
  const auto none = gspr::make_static_mask(sky, {});
  EXPECT_TRUE(std::all_of(none.data.begin(), none.data.end(), [](auto v) { return v == 0; }));
}

TEST(StaticMask, CheckerboardMatchesMembership) {
  gspr::SemanticMap m(17, 9);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) m.at(x, y) = (x + y) % 2 ? gspr::semantic::kSky : 2;
  const std::vector<std::uint16_t> classes{gspr::semantic::kSky};
  const auto mask = gspr::make_static_mask(m, classes);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) EXPECT_EQ(mask.at(x, y) != 0, m.at(x, y) == gspr::semantic::kSky);
}

// Camera aligned with the LiDAR frame (z = depth), f = 10, principal point (0, 20).
gspr::Camera aligned_camera() {
  gspr::Camera c;
  c.intrinsics << 10, 0, 0, 0, 10, 20, 0, 0, 1;
  c.width = 40;
  c.height = 40;
  return c;
}

TEST(DynamicMask, BoxBehindCameraMasksNothing) {
  const gspr::SemanticMap sem(40, 40, 1, gspr::semantic::kCar);
  const std::vector<gspr::Box3D> boxes{{{0, 0, -10}, {2, 2, 2}, 0, gspr::semantic::kCar}};
  const auto m = gspr::make_dynamic_mask(boxes, sem, aligned_camera());
  EXPECT_TRUE(std::all_of(m.data.begin(), m.data.end(), [](auto v) { return v == 0; }));
}

TEST(DynamicMask, HullCoversColumnsTenToTwenty) {
  const gspr::SemanticMap sem(40, 40, 1, gspr::semantic::kCar);
  // x in [10, 20] at depth 10 projects to u in [10, 20]; tall in y.
  const std::vector<gspr::Box3D> boxes{{{15, 0, 10}, {10, 400, 1e-7}, 0, gspr::semantic::kCar}};
  const auto m = gspr::make_dynamic_mask(boxes, sem, aligned_camera());
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) EXPECT_EQ(m.at(x, y) != 0, x >= 10 && x <= 20) << x << "," << y;
}

TEST(DynamicMask, ClassMismatchMasksNothing) {
  const gspr::SemanticMap sem(40, 40, 1, gspr::semantic::kRoad);
  const std::vector<gspr::Box3D> boxes{{{15, 0, 10}, {10, 400, 1e-7}, 0, gspr::semantic::kCar}};
  const auto m = gspr::make_dynamic_mask(boxes, sem, aligned_camera());
  EXPECT_TRUE(std::all_of(m.data.begin(), m.data.end(), [](auto v) { return v == 0; }));
}

// Scan of points in front of the forward camera.
std::vector<Vec3> visible_scan(oracle::Rng& rng, std::size_t n) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i)
    pts.emplace_back(oracle::uniform(rng, 8, 20), oracle::uniform(rng, -3, 3), oracle::uniform(rng, -2, 2));
  return pts;
}

gspr::PrepOptions plain_options() {
  gspr::PrepOptions o;
  o.filter_ground = false;
  o.erase_boxes = false;
  o.dome = false;
  o.static_mask = false;
  o.dynamic_mask = false;
  return o;
}

std::array<gspr::CalibratedFrame, 3> frames_with_scans(oracle::Rng& rng) {
  std::array<gspr::CalibratedFrame, 3> frames;
  for (auto& f : frames) {
    f.views.push_back(make_view(forward_camera(30, 200, 120), oracle::uniform(rng, 0, 1)));
    f.lidar = visible_scan(rng, 50);
  }
  return frames;
}

TEST(AssembleSequence, IdenticalPosesConcatenate) {
  oracle::Rng rng(20);
  const auto frames = frames_with_scans(rng);
  const std::array<gspr::RigidTransform, 3> poses{};
  const auto prior = gspr::assemble_sequence(frames, poses, plain_options());
  ASSERT_EQ(prior.points.size(), 150u);
  for (int f = 0; f < 3; ++f)
    for (int i = 0; i < 50; ++i) EXPECT_EQ(prior.points[f * 50 + i], frames[f].lidar[i]);
  EXPECT_TRUE(std::all_of(prior.provenance.begin(), prior.provenance.end(),
                          [](auto o) { return o == gspr::PointOrigin::kLidar; }));
}

// Poses map each LiDAR frame into the world. A frame whose sensor sits at
// world (1, 0, 0) while the center frame sits at the origin sees a static
// point at local x - 1; expressed in the center frame its points move by
// +1 relative to naive concatenation. Equivalently a world-to-frame offset
// of (1, 0, 0) shifts them by -1.
TEST(AssembleSequence, PureTranslationShiftsFrame) {
  oracle::Rng rng(21);
  const auto frames = frames_with_scans(rng);
  for (double sign : {1.0, -1.0}) {
    std::array<gspr::RigidTransform, 3> poses{};
    poses[0].translation = {sign, 0, 0};
    const auto prior = gspr::assemble_sequence(frames, poses, plain_options());
    ASSERT_EQ(prior.points.size(), 150u);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(prior.points[i], frames[0].lidar[i] + Vec3(sign, 0, 0));
    for (int i = 50; i < 150; ++i) EXPECT_EQ(prior.points[i], frames[i / 50].lidar[i % 50]);
  }
}

TEST(AssembleSequence, RandomPosesMatchPerPointTransform) {
  oracle::Rng rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const auto frames = frames_with_scans(rng);
    std::array<gspr::RigidTransform, 3> poses;
    for (auto& p : poses) {
      p.rotation = Eigen::AngleAxisd(oracle::uniform(rng, -3, 3),
                                     Vec3(oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1), 1).normalized())
                       .toRotationMatrix();
      p.translation = {oracle::uniform(rng, -30, 30), oracle::uniform(rng, -30, 30), oracle::uniform(rng, -2, 2)};
    }
    const auto prior = gspr::assemble_sequence(frames, poses, plain_options());
    ASSERT_EQ(prior.points.size(), 150u);
    const Eigen::Matrix3d rc_t = poses[1].rotation.transpose();
    for (int f = 0; f < 3; ++f) {
      for (int i = 0; i < 50; ++i) {
        const Vec3 world = poses[f].rotation * frames[f].lidar[i] + poses[f].translation;
        const Vec3 expect = rc_t * (world - poses[1].translation);
        EXPECT_LT((prior.points[f * 50 + i] - expect).norm(), 1e-9);
      }
    }
  }
}

TEST(AssembleSequence, DomeAndProvenance) {
  oracle::Rng rng(23);
  const auto frames = frames_with_scans(rng);
  auto opts = plain_options();
  opts.dome = true;
  opts.n_dome = 100;
  const std::array<gspr::RigidTransform, 3> poses{};
  const auto prior = gspr::assemble_sequence(frames, poses, opts);
  ASSERT_EQ(prior.points.size(), 250u);
  EXPECT_EQ(std::count(prior.provenance.begin(), prior.provenance.end(), gspr::PointOrigin::kDome), 100);
  for (const auto& c : prior.colors) EXPECT_TRUE((c.array() >= 0).all() && (c.array() <= 1).all());
}

TEST(AssembleSequence, SingularPoseRejected) {
  oracle::Rng rng(24);
  const auto frames = frames_with_scans(rng);
  std::array<gspr::RigidTransform, 3> poses{};
  poses[2].rotation.setZero();
  EXPECT_THROW(gspr::assemble_sequence(frames, poses, plain_options()), gspr::InputError);
}

TEST(AssembleSequence, StaticMaskColorsBackground) {
  oracle::Rng rng(25);
  auto frames = frames_with_scans(rng);
  for (auto& f : frames) std::fill(f.views[0].semantic_map.data.begin(), f.views[0].semantic_map.data.end(), gspr::semantic::kSky);
  auto opts = plain_options();
  opts.static_mask = true;
  opts.background = {0.0, 1.0, 0.0};
  const std::array<gspr::RigidTransform, 3> poses{};
  for (const auto& c : gspr::assemble_sequence(frames, poses, opts).colors) EXPECT_EQ(c, opts.background);
}

TEST(PriorToScene, OneGaussianPerPoint) {
  gspr::InitPrior prior;
  oracle::Rng rng(26);
  for (int i = 0; i < 20; ++i) {
    prior.points.push_back(oracle::random_points(rng, 1, 5)[0]);
    prior.colors.emplace_back(0.5, 0.2, 0.9);
    prior.provenance.push_back(gspr::PointOrigin::kLidar);
  }
  const auto s = gspr::prior_to_scene(prior, 4, oracle::planar_pose(1, 2));
  ASSERT_EQ(s.gaussians.size(), 20u);
  EXPECT_EQ(s.place_id, 4);
  EXPECT_EQ(s.source, gspr::SceneSource::kInitializationOnly);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(s.gaussians[i].position, prior.points[i]);
    EXPECT_EQ(gspr::validate(s.gaussians[i]), "");
    // the DC term reproduces the point color
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.gaussians[i].sh[c * 16] * gspr::kShC0 + 0.5, prior.colors[i][c], 1e-12);
  }
}

}  // namespace
