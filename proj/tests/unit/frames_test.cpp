#include <fstream>
#include <gtest/gtest.h>

#include "gspr/error.hpp"
#include "gspr/frames.hpp"
#include "gspr/png_io.hpp"
#include "oracles.hpp"

namespace {

gspr::Camera test_camera() {
  gspr::Camera c;
  c.intrinsics << 50, 0, 32, 0, 50, 24, 0, 0, 1;
  c.width = 64;
  c.height = 48;
  return c;
}

TEST(FrameManifest, RoundTripsAndResolvesRelativePaths) {
  oracle::TempDir dir("manifest");
  std::vector<gspr::FrameRecord> recs(2);
  recs[0].split = "database";
  recs[0].sequence = "seq0";
  recs[0].lidar = "a.bin";
  recs[0].boxes = "a.txt";
  recs[0].pose = oracle::planar_pose(1.5, -2.0, 0.4);
  recs[0].cameras.push_back({"a.png", "a_sem.png", "a.calib"});
  recs[1] = recs[0];
  recs[1].boxes.clear();
  recs[1].cameras.push_back({"b.png", "b_sem.png", "b.calib"});
  gspr::write_frame_manifest(recs, dir / "frames.tsv");
  const auto back = gspr::read_frame_manifest(dir / "frames.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].split, "database");
  EXPECT_EQ(back[0].sequence, "seq0");
  EXPECT_EQ(back[0].lidar, dir.path() / "a.bin");
  EXPECT_TRUE(back[1].boxes.empty());
  EXPECT_EQ(back[1].cameras.size(), 2u);
  EXPECT_TRUE(back[0].pose.rotation.isApprox(recs[0].pose.rotation, 1e-15));
  EXPECT_EQ(back[0].pose.translation, recs[0].pose.translation);
}

TEST(FrameManifest, ShortLineIsFormatError) {
  oracle::TempDir dir("manifest");
  {
    std::ofstream out(dir / "bad.tsv");
    out << "database\tseq\tlidar.bin\t-\t1\t0\t0\n";
  }
  EXPECT_THROW(gspr::read_frame_manifest(dir / "bad.tsv"), gspr::FormatError);
}

TEST(FrameManifest, MissingManifestThrows) {
  EXPECT_THROW(gspr::read_frame_manifest("/nonexistent/frames.tsv"), gspr::Error);
}

TEST(SceneManifest, RoundTrip) {
  oracle::TempDir dir("scenes");
  std::vector<gspr::SceneRecord> recs{{"s0.ply", "query", 7, oracle::planar_pose(3, 4, 1)}};
  gspr::write_scene_manifest(recs, dir / "scenes.tsv");
  const auto back = gspr::read_scene_manifest(dir / "scenes.tsv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].path, dir.path() / "s0.ply");
  EXPECT_EQ(back[0].place_id, 7);
  EXPECT_EQ(back[0].split, "query");
  EXPECT_EQ(back[0].pose.translation, recs[0].pose.translation);
}

TEST(LidarBin, RoundTripAtSinglePrecision) {
  oracle::TempDir dir("lidar");
  oracle::Rng rng(1);
  const auto pts = oracle::random_points(rng, 300, 50);
  gspr::write_lidar_bin(pts, dir / "scan.bin");
  EXPECT_EQ(std::filesystem::file_size(dir / "scan.bin"), 300u * 16u);
  const auto back = gspr::read_lidar_bin(dir / "scan.bin");
  ASSERT_EQ(back.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(back[i][k], static_cast<double>(static_cast<float>(pts[i][k])));
  }
}

TEST(Boxes, RoundTrip) {
  oracle::TempDir dir("boxes");
  std::vector<gspr::Box3D> boxes{{{1, 2, 3}, {4, 2, 1.5}, 0.7, 13}, {{-1, 0, 0}, {1, 1, 1}, -2.0, 11}};
  gspr::write_boxes(boxes, dir / "b.txt");
  const auto back = gspr::read_boxes(dir / "b.txt");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(back[i].center.isApprox(boxes[i].center, 1e-12));
    EXPECT_TRUE(back[i].size.isApprox(boxes[i].size, 1e-12));
    EXPECT_NEAR(back[i].yaw, boxes[i].yaw, 1e-12);
    EXPECT_EQ(back[i].class_id, boxes[i].class_id);
  }
}

TEST(Calib, RoundTripAndValidation) {
  oracle::TempDir dir("calib");
  auto c = test_camera();
  c.rotation = gspr::yaw_rotation(0.3);
  c.translation = {0.1, -0.2, 0.3};
  gspr::write_calib(c, dir / "c.calib");
  const auto back = gspr::read_calib(dir / "c.calib");
  EXPECT_TRUE(back.intrinsics.isApprox(c.intrinsics, 1e-9));
  EXPECT_TRUE(back.rotation.isApprox(c.rotation, 1e-5));
  EXPECT_EQ(back.width, 64);
  EXPECT_NO_THROW(back.validate());
  auto bad = c;
  bad.intrinsics(0, 0) = -1;
  EXPECT_THROW(bad.validate(), gspr::InputError);
  bad = c;
  bad.intrinsics(2, 0) = 0.5;
  EXPECT_THROW(bad.validate(), gspr::InputError);
}

TEST(Png, RgbRoundTripAt8Bits) {
  oracle::TempDir dir("png");
  oracle::Rng rng(2);
  auto img = gspr::make_image(13, 7);
  for (double& v : img.data) v = std::round(oracle::uniform(rng, 0, 1) * 255.0) / 255.0;
  gspr::write_png_rgb(img, dir / "i.png");
  const auto back = gspr::read_png_rgb(dir / "i.png");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
}

TEST(Png, LabelsRoundTripAt16Bits) {
  oracle::TempDir dir("png");
  gspr::SemanticMap m(9, 4);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<std::uint16_t>(i * 997 % 65536);
  gspr::write_png_labels(m, dir / "l.png");
  EXPECT_EQ(gspr::read_png_labels(dir / "l.png").data, m.data);
}

TEST(Box3D, ContainsIsInclusiveAndYawAware) {
  gspr::Box3D b{{0, 0, 0}, {4, 2, 2}, std::numbers::pi / 2, 13};
  EXPECT_TRUE(b.contains({0, 0, 0}));
  EXPECT_TRUE(b.contains({0, 2, 1}));   // rotated long axis, on the boundary
  EXPECT_FALSE(b.contains({2, 0, 0}));  // would be inside without the yaw
  for (const auto& c : b.corners()) EXPECT_TRUE(b.contains(c * (1 - 1e-12)));
}

TEST(RigidTransform, InverseAndComposition) {
  const auto a = oracle::planar_pose(3, -1, 0.8);
  const auto b = oracle::planar_pose(-2, 5, -0.1);
  const gspr::Vec3 p(0.3, 0.2, -4);
  EXPECT_TRUE((a * b).apply(p).isApprox(a.apply(b.apply(p)), 1e-12));
  EXPECT_TRUE(a.inverse().apply(a.apply(p)).isApprox(p, 1e-12));
  gspr::RigidTransform singular;
  singular.rotation.setZero();
  EXPECT_THROW(singular.inverse(), gspr::InputError);
  const auto rm = a.to_row_major();
  const auto back = gspr::RigidTransform::from_row_major(rm);
  EXPECT_EQ(back.rotation, a.rotation);
}

}  // namespace
