#include <fstream>
#include <map>

#include <gtest/gtest.h>
#include <json.hpp>

#include "occbench/datamodel.hpp"
#include "occbench/error.hpp"
#include "occbench/geometry.hpp"
#include "test_support.hpp"

namespace occbench {
namespace {

using nlohmann::json;

// Reference rule written out longhand: keep 0, then keep i when any joint
// of frame i lies at least `threshold` away from the same joint of the most
// recently kept frame.
std::vector<std::size_t> brute_force_subsample(const std::vector<Pose3D>& poses, double threshold) {
  std::vector<std::size_t> kept{0};
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const auto& ref = poses[kept.back()];
    bool moved = false;
    for (std::size_t j = 0; j < poses[i].joints_mm.size(); ++j) {
      const double dx = poses[i].joints_mm[j][0] - ref.joints_mm[j][0];
      const double dy = poses[i].joints_mm[j][1] - ref.joints_mm[j][1];
      const double dz = poses[i].joints_mm[j][2] - ref.joints_mm[j][2];
      if (dx * dx + dy * dy + dz * dz >= threshold * threshold) moved = true;
    }
    if (moved) kept.push_back(i);
  }
  return kept;
}

Pose3D constant_pose(int joints, double z = 5000.0) {
  Pose3D p;
  for (int j = 0; j < joints; ++j) p.joints_mm.emplace_back(10.0 * j, -5.0 * j, z + j);
  return p;
}

SyntheticDataset small_dataset(int frames, std::uint64_t seed = 11) {
  SyntheticConfig cfg;
  cfg.num_frames = frames;
  cfg.seed = seed;
  return generate_synthetic_dataset(cfg);
}

TEST(Skeleton, H36mIsValidAndFlipIsInvolution) {
  const auto sk = Skeleton::h36m17();
  EXPECT_EQ(sk.joint_count(), 17);
  EXPECT_EQ(sk.joint_names[sk.root_index], "pelvis");
  EXPECT_NO_THROW(sk.validate());
  const auto perm = sk.flip_permutation();
  for (int j = 0; j < 17; ++j) EXPECT_EQ(perm[perm[j]], j);
  EXPECT_EQ(perm[sk.root_index], sk.root_index);
}

TEST(Skeleton, RejectsJointInTwoPairs) {
  auto sk = Skeleton::h36m17();
  sk.left_right_pairs.push_back({4, 2});
  EXPECT_THROW(sk.validate(), ValidationError);
}

TEST(Skeleton, RejectsSelfPair) {
  auto sk = Skeleton::h36m17();
  sk.left_right_pairs.push_back({7, 7});
  EXPECT_THROW(sk.validate(), ValidationError);
}

TEST(Manifest, RoundTripsThreeFrames) {
  const auto dir = testing::scratch_dir();
  auto data = small_dataset(3);
  data.write(dir);
  const auto m = load_manifest(dir / "manifest.json");
  ASSERT_EQ(m.frames.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.frames[i].frame_id, data.manifest.frames[i].frame_id);
    EXPECT_EQ(m.frames[i].action, data.manifest.frames[i].action);
    for (int j = 0; j < 17; ++j) {
      EXPECT_NEAR((m.frames[i].pose_gt.joints_mm[j] - data.manifest.frames[i].pose_gt.joints_mm[j]).norm(),
                  0.0, 1e-9);
    }
    EXPECT_TRUE(std::filesystem::exists(m.image_file(m.frames[i])));
  }
  EXPECT_EQ(m.skeleton, data.manifest.skeleton);
}

json manifest_json(const std::filesystem::path& dir) {
  small_dataset(3).write(dir);
  std::ifstream in(dir / "manifest.json");
  return json::parse(in);
}

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << doc.dump();
}

TEST(Manifest, ZeroWidthBboxNamesTheFrame) {
  const auto dir = testing::scratch_dir();
  auto doc = manifest_json(dir);
  doc["frames"][1]["bbox"][2] = 0;
  write_json(doc, dir / "bad.json");
  try {
    load_manifest(dir / "bad.json");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("frames[1]"), std::string::npos) << e.what();
  }
}

TEST(Manifest, MissingJointIsAJointCountError) {
  const auto dir = testing::scratch_dir();
  auto doc = manifest_json(dir);
  doc["frames"][0]["joints_mm"].erase(16);
  write_json(doc, dir / "bad.json");
  try {
    load_manifest(dir / "bad.json");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("16 joints"), std::string::npos) << e.what();
  }
}

TEST(Manifest, SchemaErrorsReportFieldPath) {
  const auto dir = testing::scratch_dir();
  auto doc = manifest_json(dir);
  doc["frames"][2]["camera"].erase("fx");
  write_json(doc, dir / "bad.json");
  try {
    load_manifest(dir / "bad.json");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("frames[2].camera.fx"), std::string::npos) << e.what();
  }
}

TEST(Manifest, RejectsForeignUnits) {
  const auto dir = testing::scratch_dir();
  auto doc = manifest_json(dir);
  doc["units"]["length"] = "m";
  write_json(doc, dir / "bad.json");
  EXPECT_THROW(load_manifest(dir / "bad.json"), ValidationError);
}

TEST(Manifest, RejectsNonIncreasingIds) {
  const auto dir = testing::scratch_dir();
  auto doc = manifest_json(dir);
  doc["frames"][2]["frame_id"] = doc["frames"][1]["frame_id"];
  write_json(doc, dir / "bad.json");
  EXPECT_THROW(load_manifest(dir / "bad.json"), ValidationError);
}

TEST(Manifest, MissingFileIsIoError) {
  EXPECT_THROW(load_manifest("/nonexistent/manifest.json"), IoError);
}

TEST(AdaptiveSubsample, IdenticalFramesKeepOnlyFirst) {
  std::vector<Pose3D> poses(20, constant_pose(17));
  EXPECT_EQ(adaptive_subsample(poses, 30.0), std::vector<std::size_t>{0});
}

TEST(AdaptiveSubsample, ExactThresholdIsKept) {
  std::vector<Pose3D> poses(2, constant_pose(17));
  poses[1].joints_mm[5] += Vec3(0.0, 30.0, 0.0);
  EXPECT_EQ(adaptive_subsample(poses, 30.0), (std::vector<std::size_t>{0, 1}));
  poses[1].joints_mm[5] = poses[0].joints_mm[5] + Vec3(18.0, 24.0, 0.0);  // 3-4-5 triangle, 30 mm
  EXPECT_EQ(adaptive_subsample(poses, 30.0), (std::vector<std::size_t>{0, 1}));
}

TEST(AdaptiveSubsample, ComparesAgainstLastKeptFrame) {
  // 20 mm steps: frame 1 is dropped, frame 2 is 40 mm from frame 0 and kept.
  std::vector<Pose3D> poses(3, constant_pose(17));
  poses[1].joints_mm[3] += Vec3(20.0, 0.0, 0.0);
  poses[2].joints_mm[3] += Vec3(40.0, 0.0, 0.0);
  EXPECT_EQ(adaptive_subsample(poses, 30.0), (std::vector<std::size_t>{0, 2}));
}

TEST(AdaptiveSubsample, TinyThresholdKeepsEveryMovingFrame) {
  Rng rng(5);
  std::vector<Pose3D> poses(50, constant_pose(17));
  for (std::size_t i = 1; i < poses.size(); ++i) {
    poses[i] = poses[i - 1];
    poses[i].joints_mm[uniform_int(rng, 0, 16)] += Vec3(1e-3, 0.0, 0.0);
  }
  EXPECT_EQ(adaptive_subsample(poses, 1e-9).size(), poses.size());
}

TEST(AdaptiveSubsample, MatchesBruteForceOnRandomWalks) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 1, 120);
    std::vector<Pose3D> poses{constant_pose(17)};
    for (int i = 1; i < n; ++i) {
      Pose3D p = poses.back();
      for (auto& j : p.joints_mm) j += 8.0 * Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
      poses.push_back(p);
    }
    const auto got = adaptive_subsample(poses, 30.0);
    EXPECT_EQ(got, brute_force_subsample(poses, 30.0)) << "trial " << trial;
    ASSERT_FALSE(got.empty());
    EXPECT_EQ(got.front(), 0u);
    for (std::size_t k = 1; k < got.size(); ++k) EXPECT_LT(got[k - 1], got[k]);
  }
}

TEST(AdaptiveSubsample, RejectsEmptyAndNonPositiveThreshold) {
  EXPECT_THROW(adaptive_subsample(std::vector<Pose3D>{}, 30.0), ValidationError);
  EXPECT_THROW(adaptive_subsample(std::vector<Pose3D>(2, constant_pose(17)), 0.0), ValidationError);
}

TEST(StrideSubsample, Examples) {
  EXPECT_EQ(stride_subsample(128, 64), (std::vector<std::size_t>{0, 64}));
  EXPECT_EQ(stride_subsample(10, 4), (std::vector<std::size_t>{0, 4, 8}));
  EXPECT_EQ(stride_subsample(5, 1), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_THROW(stride_subsample(5, 0), ValidationError);
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  const auto a = small_dataset(8, 3);
  const auto b = small_dataset(8, 3);
  ASSERT_EQ(a.images.size(), b.images.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) EXPECT_TRUE(a.images[i] == b.images[i]);
  const auto dir = testing::scratch_dir();
  a.write(dir / "a");
  b.write(dir / "b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a/manifest.json"), slurp(dir / "b/manifest.json"));
  EXPECT_EQ(slurp(dir / "a/frames/000003.png"), slurp(dir / "b/frames/000003.png"));
  EXPECT_FALSE(small_dataset(8, 4).images[0] == a.images[0]);
}

TEST(Synthetic, SingleFrameBboxEnclosesJoints) {
  const auto d = small_dataset(1);
  ASSERT_EQ(d.manifest.frames.size(), 1u);
  const auto& f = d.manifest.frames[0];
  for (const auto& j : f.pose_gt.joints_mm) {
    const Vec2 uv = project(f.camera, j);
    EXPECT_GE(uv.x(), f.bbox.x);
    EXPECT_LT(uv.x(), f.bbox.x + f.bbox.w);
    EXPECT_GE(uv.y(), f.bbox.y);
    EXPECT_LT(uv.y(), f.bbox.y + f.bbox.h);
  }
}

TEST(Synthetic, BoneLengthsAreConstant) {
  const auto d = small_dataset(60);
  const auto& sk = d.manifest.skeleton;
  const auto& first = d.manifest.frames[0].pose_gt.joints_mm;
  for (const auto& f : d.manifest.frames) {
    for (auto [a, b] : sk.edges) {
      EXPECT_NEAR((f.pose_gt.joints_mm[a] - f.pose_gt.joints_mm[b]).norm(), (first[a] - first[b]).norm(), 1e-9);
    }
  }
}

// Centroid of each joint's disk color, for joints whose disk cannot overlap
// another joint's disk, against the pinhole projection.
TEST(Synthetic, RenderedJointsMatchProjection) {
  const auto d = small_dataset(20, 9);
  const auto style = StickFigureStyle::for_image_size(256);
  int checked = 0;
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    const auto& f = d.manifest.frames[i];
    std::vector<Vec2> uv;
    for (const auto& j : f.pose_gt.joints_mm) uv.push_back(project(f.camera, j));
    for (int j = 0; j < 17; ++j) {
      bool isolated = true;
      for (int k = 0; k < 17; ++k) {
        if (k != j && (uv[k] - uv[j]).norm() < 2.0 * style.joint_radius_px + 2.0) isolated = false;
      }
      if (!isolated) continue;
      const Rgb c = joint_color(j);
      double sx = 0, sy = 0;
      int n = 0;
      for (int y = 0; y < d.images[i].height(); ++y) {
        for (int x = 0; x < d.images[i].width(); ++x) {
          if (d.images[i].at(x, y) == c) {
            sx += x;
            sy += y;
            ++n;
          }
        }
      }
      ASSERT_GT(n, 0);
      EXPECT_LT((Vec2(sx / n, sy / n) - uv[j]).norm(), 0.5) << "frame " << i << " joint " << j;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Synthetic, RejectsZeroFramesAndTinyImages) {
  SyntheticConfig cfg;
  cfg.num_frames = 0;
  EXPECT_THROW(generate_synthetic_dataset(cfg), ValidationError);
  cfg.num_frames = 1;
  cfg.image_size = 8;
  EXPECT_THROW(generate_synthetic_dataset(cfg), ValidationError);
}

TEST(Synthetic, ActionsAreLabeled) {
  const auto d = small_dataset(100);
  std::map<std::string, int> counts;
  for (const auto& f : d.manifest.frames) ++counts[f.action];
  EXPECT_GT(counts.size(), 1u);
  EXPECT_EQ(counts.count(""), 0u);
}

}  // namespace
}  // namespace occbench
