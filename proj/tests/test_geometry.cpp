#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "occbench/datamodel.hpp"
#include "occbench/error.hpp"
#include "occbench/geometry.hpp"
#include "occbench/random.hpp"

namespace occbench {
namespace {

CameraIntrinsics camera_1000() { return {1000.0, 1000.0, 500.0, 500.0, 1000, 1000}; }

CameraIntrinsics random_camera(Rng& rng) {
  const int w = uniform_int(rng, 320, 1920);
  const int h = uniform_int(rng, 240, 1080);
  const double f = uniform(rng, 300.0, 2000.0);
  return {f, f * uniform(rng, 0.95, 1.05), w / 2.0 + uniform(rng, -20, 20), h / 2.0 + uniform(rng, -20, 20), w, h};
}

// Point within the bbox grown by half its size on each side; far-off points
// of a wide-angle camera can fall behind the virtual camera.
Vec2 point_near(Rng& rng, const BoundingBox& b) {
  return {uniform(rng, b.x - 0.5 * b.w, b.x + 1.5 * b.w), uniform(rng, b.y - 0.5 * b.h, b.y + 1.5 * b.h)};
}

BoundingBox random_bbox(Rng& rng, const CameraIntrinsics& k) {
  const double w = uniform(rng, 20.0, k.width * 0.6);
  const double h = uniform(rng, 20.0, k.height * 0.6);
  return {uniform(rng, 0.0, k.width - w), uniform(rng, 0.0, k.height - h), w, h};
}

TEST(Project, PrincipalRay) {
  const auto k = camera_1000();
  for (double z : {1.0, 250.0, 5000.0}) EXPECT_EQ(project(k, {0, 0, z}), Vec2(500, 500));
}

TEST(Project, PinholeArithmetic) {
  EXPECT_EQ(project(camera_1000(), {100, 0, 1000}), Vec2(600, 500));
  EXPECT_EQ(backproject(camera_1000(), {600, 500}, 1000), Vec3(100, 0, 1000));
  EXPECT_EQ(backproject(camera_1000(), {500, 500}, 5000), Vec3(0, 0, 5000));
}

TEST(Project, RejectsNonPositiveDepth) {
  EXPECT_THROW(project(camera_1000(), {0, 0, 0}), Error);
  EXPECT_THROW(project(camera_1000(), {0, 0, -1}), Error);
  EXPECT_THROW(backproject(camera_1000(), {0, 0}, 0.0), Error);
}

TEST(Project, RandomRoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto k = random_camera(rng);
    const Vec2 uv(uniform(rng, 0, k.width), uniform(rng, 0, k.height));
    const double z = uniform(rng, 100, 10000);
    EXPECT_LT((project(k, backproject(k, uv, z)) - uv).norm(), 1e-9);
  }
}

TEST(CropTransform, CenteredBboxGivesIdentityRotation) {
  const auto k = camera_1000();
  const auto t = make_crop_transform(k, {400, 350, 200, 300});
  EXPECT_LT((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CropTransform, PrincipalPointAtCropCenter) {
  const auto t = make_crop_transform(camera_1000(), {100, 200, 50, 80}, 256);
  EXPECT_EQ(t.k_dst.cx, 128.0);
  EXPECT_EQ(t.k_dst.cy, 128.0);
  EXPECT_EQ(t.k_dst.width, 256);
}

TEST(CropTransform, RandomBboxesMapCenterAndStayOrthonormal) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto k = random_camera(rng);
    const auto b = random_bbox(rng, k);
    const int size = uniform_int(rng, 64, 512);
    const auto t = make_crop_transform(k, b, size);
    EXPECT_LT((warp_point(t, b.center()) - Vec2(size / 2.0, size / 2.0)).norm(), 1e-9);
    EXPECT_LT((t.rotation.transpose() * t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(t.rotation.determinant(), 1.0, 1e-9);
    // Zero roll: the virtual x axis has no vertical component.
    EXPECT_NEAR(t.rotation(0, 1), 0.0, 1e-12);
  }
}

TEST(CropTransform, SquareBboxCoversEightyPercent) {
  const auto k = camera_1000();
  const BoundingBox b{420, 440, 160, 160};
  const auto t = make_crop_transform(k, b);
  const Vec2 a = warp_point(t, {b.x, b.y});
  const Vec2 c = warp_point(t, {b.x + b.w, b.y + b.h});
  EXPECT_NEAR(c.x() - a.x(), 204.8, 0.01 * 204.8);
  EXPECT_NEAR(c.y() - a.y(), 204.8, 0.01 * 204.8);
}

TEST(CropTransform, RejectsDegenerateInput) {
  EXPECT_THROW(make_crop_transform(camera_1000(), {0, 0, 0, 10}), ValidationError);
  EXPECT_THROW(make_crop_transform(camera_1000(), {0, 0, 10, 10}, 0), ValidationError);
  EXPECT_THROW(make_crop_transform(camera_1000(), {0, 0, 10, 10}, 256, 1.5), ValidationError);
}

TEST(WarpPoint, IdentityLeavesPointsUnchanged) {
  const auto t = CropTransform::identity(camera_1000());
  for (const Vec2 p : {Vec2(0, 0), Vec2(12.5, 700.25), Vec2(999, 1)}) EXPECT_LT((warp_point(t, p) - p).norm(), 1e-12);
}

TEST(WarpPoint, RandomRoundTrips) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto k = random_camera(rng);
    const auto b = random_bbox(rng, k);
    const auto t = make_crop_transform(k, b);
    const Vec2 p = point_near(rng, b);
    EXPECT_LT((inverse_warp_point(t, warp_point(t, p)) - p).norm(), 1e-9);
  }
}

TEST(WarpPoint, PlaneAtInfinityIsReported) {
  CropTransform t = CropTransform::identity(camera_1000());
  t.homography << 1, 0, 0, 0, 1, 0, 1, 0, 0;
  EXPECT_THROW(warp_point(t, {0, 5}), ComputeError);
}

TEST(WarpPoint, PreservesCollinearity) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto k = random_camera(rng);
    const auto box = random_bbox(rng, k);
    const auto t = make_crop_transform(k, box);
    const Vec2 a = point_near(rng, box);
    const Vec2 b = point_near(rng, box);
    const Vec2 wa = warp_point(t, a), wb = warp_point(t, b);
    const Vec2 dir = (wb - wa).normalized();
    for (double s : {0.25, 0.5, 0.8}) {
      const Vec2 w = warp_point(t, a + s * (b - a)) - wa;
      EXPECT_LT(std::abs(dir.x() * w.y() - dir.y() * w.x()), 1e-6);
    }
  }
}

// Crop-space joint at its virtual-camera depth maps back to the original
// camera point two ways: direct back-projection and inverse warp.
TEST(WarpPoint, CropBackProjectionAgreesWithDirect) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto k = random_camera(rng);
    const auto t = make_crop_transform(k, random_bbox(rng, k));
    const Vec3 p(uniform(rng, -800, 800), uniform(rng, -800, 800), uniform(rng, 3000, 7000));
    const Vec3 virt = t.rotation * p;
    const Vec2 crop = project(t.k_dst, virt);
    const Vec2 orig = inverse_warp_point(t, crop);
    EXPECT_LT((backproject(k, orig, p.z()) - p).norm(), 1e-6);
    EXPECT_LT((t.rotation.transpose() * backproject(t.k_dst, crop, virt.z()) - p).norm(), 1e-6);
  }
}

TEST(WarpImage, IdentityIsUnchanged) {
  CameraIntrinsics k{100, 100, 32, 24, 64, 48};
  Image img(64, 48);
  Rng rng(6);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      img.set(x, y, {static_cast<std::uint8_t>(uniform_int(rng, 0, 255)),
                     static_cast<std::uint8_t>(uniform_int(rng, 0, 255)),
                     static_cast<std::uint8_t>(uniform_int(rng, 0, 255))});
    }
  }
  auto t = CropTransform::identity(k);
  const Image out = warp_image(t, img);
  ASSERT_EQ(out.width(), 64);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) EXPECT_EQ(out.at(x, y), img.at(x, y));
  }
}

TEST(WarpImage, UniformSourceGivesUniformInterior) {
  const auto k = camera_1000();
  const Image img(1000, 1000, {30, 140, 220});
  const auto t = make_crop_transform(k, {300, 280, 200, 260});
  const Image out = warp_image(t, img);
  for (int y = 20; y < 236; ++y) {
    for (int x = 20; x < 236; ++x) ASSERT_EQ(out.at(x, y), (Rgb{30, 140, 220}));
  }
}

TEST(WarpImage, OutOfBoundsIsBlack) {
  const auto k = camera_1000();
  const Image img(1000, 1000, {200, 200, 200});
  const auto t = make_crop_transform(k, {0, 0, 40, 40});
  const Image out = warp_image(t, img);
  EXPECT_EQ(out.at(0, 0), (Rgb{0, 0, 0}));
}

TEST(WarpImage, DimensionMismatch) {
  EXPECT_THROW(warp_image(CropTransform::identity(camera_1000()), Image(10, 10)), ValidationError);
}

TEST(WarpImage, RenderedJointsFollowWarp) {
  SyntheticConfig cfg;
  cfg.num_frames = 5;
  cfg.seed = 21;
  const auto d = generate_synthetic_dataset(cfg);
  int checked = 0;
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    const auto& f = d.manifest.frames[i];
    const auto t = make_crop_transform(f.camera, f.bbox);
    const Image crop = warp_image(t, d.images[i]);
    for (int j = 0; j < 17; ++j) {
      const Vec2 uv = project(f.camera, f.pose_gt.joints_mm[j]);
      const Vec2 c = warp_point(t, uv);
      const Rgb src = d.images[i].at(static_cast<int>(std::lround(uv.x())), static_cast<int>(std::lround(uv.y())));
      if (!(src == joint_color(j))) continue;  // disk hidden by a nearer joint
      // The crop is upscaled, so the joint color appears within 1 px of the
      // warped center.
      bool found = false;
      for (int dy = -1; dy <= 1 && !found; ++dy) {
        for (int dx = -1; dx <= 1 && !found; ++dx) {
          const int x = static_cast<int>(std::lround(c.x())) + dx;
          const int y = static_cast<int>(std::lround(c.y())) + dy;
          if (crop.contains(x, y) && crop.at(x, y) == joint_color(j)) found = true;
        }
      }
      EXPECT_TRUE(found) << "frame " << i << " joint " << j;
      ++checked;
    }
  }
  EXPECT_GT(checked, 40);
}

TEST(Serialization, CropTransformJsonRoundTrip) {
  const auto t = make_crop_transform(camera_1000(), {123, 87, 90, 140}, 192, 0.7);
  nlohmann::json j = t;
  const auto back = j.get<CropTransform>();
  EXPECT_LT((back.homography - t.homography).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((back.rotation - t.rotation).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(back.crop_size, 192);
  EXPECT_EQ(back.k_dst.fx, t.k_dst.fx);
  ASSERT_EQ(j["rotation"].size(), 3u);
  EXPECT_EQ(j["rotation"][0][1].get<double>(), t.rotation(0, 1));
}

}  // namespace
}  // namespace occbench
