#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "occbench/datamodel.hpp"
#include "occbench/geometry.hpp"

namespace occbench {

// Per-joint score volume laid out (joint, depth, height, width), row-major.
// x/y span the crop image; depth spans depth_span_mm centered on the root.
struct VolumetricHeatmap {
  int joints = 0;
  int depth = 16;
  int height = 16;
  int width = 16;
  int crop_size = 256;
  double depth_span_mm = 2000.0;
  std::vector<double> scores;

  static VolumetricHeatmap zeros(int joints, int depth = 16, int height = 16, int width = 16,
                                 int crop_size = 256, double depth_span_mm = 2000.0);

  std::size_t voxels_per_joint() const {
    return static_cast<std::size_t>(depth) * height * width;
  }
  std::size_t offset(int j, int d, int h, int w) const {
    return ((static_cast<std::size_t>(j) * depth + d) * height + h) * width + w;
  }
  double& at(int j, int d, int h, int w) { return scores[offset(j, d, h, w)]; }
  double at(int j, int d, int h, int w) const { return scores[offset(j, d, h, w)]; }
  std::span<const double> joint_scores(int j) const {
    return std::span<const double>(scores).subspan(offset(j, 0, 0, 0), voxels_per_joint());
  }

  void validate() const;

  friend bool operator==(const VolumetricHeatmap&, const VolumetricHeatmap&) = default;
};

// Network producer layout: a (joints * depth) x height x width channel
// stack, channel c = joint * depth + d. Reshaping is a reinterpretation.
VolumetricHeatmap heatmap_from_channels(std::span<const float> channels, int joints, int depth,
                                        int height, int width, int crop_size = 256,
                                        double depth_span_mm = 2000.0);

// Continuous voxel coordinates; voxel i covers [i, i + 1).
struct VoxelCoord {
  double d = 0.0;
  double h = 0.0;
  double w = 0.0;
};

struct DecodedJoint {
  double u = 0.0;   // crop pixels
  double v = 0.0;   // crop pixels
  double dz = 0.0;  // mm relative to the root
};

std::vector<VoxelCoord> soft_argmax(const VolumetricHeatmap& heatmap);

// Maps voxel coordinates to crop pixels and root-relative depth.
DecodedJoint voxel_to_crop(const VolumetricHeatmap& heatmap, const VoxelCoord& c);
VoxelCoord crop_to_voxel(const VolumetricHeatmap& heatmap, const DecodedJoint& j);

// Camera-space decoding with oracle root depth. The root joint is placed at
// exactly root_depth_mm.
Pose3D decode_pose(const VolumetricHeatmap& heatmap, const CropTransform& transform,
                   const CameraIntrinsics& k, double root_depth_mm, int root_index);

struct HeatmapShape {
  int depth = 16;
  int height = 16;
  int width = 16;
  int crop_size = 256;
  double depth_span_mm = 2000.0;
};

// Log-domain isotropic Gaussian per joint, so that the softmax weights are
// a discretized Gaussian around the joint's voxel-space position. Near the
// volume boundary the bump center is shifted outward so that soft_argmax of
// the truncated bump returns the joint position.
VolumetricHeatmap encode_gaussian(const Pose3D& pose, const CropTransform& transform,
                                  const CameraIntrinsics& k, double root_depth_mm, int root_index,
                                  double sigma_voxels = 1.0, const HeatmapShape& shape = {});

// Reverses the width axis of every joint volume.
VolumetricHeatmap flip_width(const VolumetricHeatmap& heatmap);

// Mean absolute coordinate difference over joints and axes, in mm.
double l1_loss(const Pose3D& pred, const Pose3D& gt);

// "VHM1" | u32 J, D, H, W (LE) | J*D*H*W f32 (LE) | JSON {crop_size, depth_span_mm}
void write_heatmap(const VolumetricHeatmap& heatmap, const std::filesystem::path& path);
VolumetricHeatmap read_heatmap(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_heatmap(const VolumetricHeatmap& heatmap);
VolumetricHeatmap decode_heatmap(std::span<const std::uint8_t> bytes);

}  // namespace occbench
