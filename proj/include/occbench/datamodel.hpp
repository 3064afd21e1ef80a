#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "occbench/geometry.hpp"
#include "occbench/image.hpp"

namespace occbench {

using JointPair = std::pair<int, int>;

struct Skeleton {
  std::vector<std::string> joint_names;
  int root_index = 0;
  // (left, right) index pairs swapped by horizontal flips.
  std::vector<JointPair> left_right_pairs;
  // (parent, child) bones.
  std::vector<JointPair> edges;

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  void validate() const;
  // Index permutation exchanging every left/right pair; identity elsewhere.
  std::vector<int> flip_permutation() const;

  // The common 17-joint Human3.6M layout, pelvis first.
  static Skeleton h36m17();

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

struct Pose3D {
  std::vector<Vec3> joints_mm;

  int joint_count() const { return static_cast<int>(joints_mm.size()); }
  void validate(int expected_joints) const;
};

struct FrameRecord {
  std::int64_t frame_id = 0;
  std::string subject;
  std::string action;
  CameraIntrinsics camera;
  BoundingBox bbox;
  Pose3D pose_gt;
  std::string image_path;

  double root_depth_mm(int root_index) const { return pose_gt.joints_mm.at(root_index).z(); }
};

struct SequenceManifest {
  Skeleton skeleton;
  std::vector<FrameRecord> frames;
  std::optional<double> frame_rate;
  // Directory relative image paths resolve against; not serialized.
  std::filesystem::path base_dir;

  void validate() const;
  std::filesystem::path image_file(const FrameRecord& frame) const;
  // Index of the frame with this id, or nullopt.
  std::optional<std::size_t> find(std::int64_t frame_id) const;
};

SequenceManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const SequenceManifest& manifest, const std::filesystem::path& path);

// Keeps frame 0, then every frame in which at least one joint has moved by
// at least threshold_mm (Euclidean) relative to the last kept frame.
std::vector<std::size_t> adaptive_subsample(const SequenceManifest& manifest,
                                            double threshold_mm = 30.0);
std::vector<std::size_t> stride_subsample(const SequenceManifest& manifest, int stride = 64);

// Same rules over bare pose sequences.
std::vector<std::size_t> adaptive_subsample(const std::vector<Pose3D>& poses, double threshold_mm);
std::vector<std::size_t> stride_subsample(std::size_t frame_count, int stride);

struct SyntheticConfig {
  int num_frames = 100;
  Skeleton skeleton = Skeleton::h36m17();
  int image_size = 256;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  SequenceManifest manifest;
  std::vector<Image> images;

  // Writes manifest.json and frames/<id>.png under dir.
  void write(const std::filesystem::path& dir) const;
};

// Stick-figure sequence with rigid limbs under a smooth random motion.
SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config);

struct StickFigureStyle {
  Rgb background{64, 64, 72};
  Rgb bone{210, 210, 210};
  double bone_half_width_px = 2.0;
  double joint_radius_px = 3.0;

  static StickFigureStyle for_image_size(int image_size);
};

// Distinct per-joint color used for the joint disks.
Rgb joint_color(int joint_index);

// Renders bones as capsules then joint disks, far joints first. Joint
// positions are pixel coordinates in the target image.
void render_stick_figure(Image& image, const Skeleton& skeleton, std::span<const Vec2> joints_px,
                         std::span<const double> joint_depths, const StickFigureStyle& style);

}  // namespace occbench
