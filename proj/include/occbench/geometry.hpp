#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include "occbench/image.hpp"

namespace occbench {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
};

// Axis-aligned box in pixels. Pixel (i, j) lies inside when
// x <= i < x + w and y <= j < y + h.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  void validate() const;
  Vec2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
};

// Reprojection of the original camera onto a virtual camera that looks at
// the person. `homography` maps original pixels to crop pixels.
struct CropTransform {
  Mat3 rotation = Mat3::Identity();
  CameraIntrinsics k_src;
  CameraIntrinsics k_dst;
  int crop_size = 256;
  Mat3 homography = Mat3::Identity();
  Mat3 inverse_homography = Mat3::Identity();

  static CropTransform identity(const CameraIntrinsics& k);
  // Builds rotation/intrinsics-consistent homographies from the members
  // rotation, k_src and k_dst.
  void rebuild();
};

Vec2 project(const CameraIntrinsics& k, const Vec3& point_mm);
Vec3 backproject(const CameraIntrinsics& k, const Vec2& pixel, double depth_mm);

CropTransform make_crop_transform(const CameraIntrinsics& k, const BoundingBox& bbox,
                                  int crop_size = 256, double coverage = 0.8);

Vec2 warp_point(const CropTransform& t, const Vec2& p);
Vec2 inverse_warp_point(const CropTransform& t, const Vec2& p);

// Axis-aligned hull of the warped bbox corners, clipped to the crop.
BoundingBox warp_bbox(const CropTransform& t, const BoundingBox& bbox);

enum class Interpolation { bilinear };

Image warp_image(const CropTransform& t, const Image& image,
                 Interpolation interpolation = Interpolation::bilinear);

void to_json(nlohmann::json& j, const CameraIntrinsics& k);
void from_json(const nlohmann::json& j, CameraIntrinsics& k);
void to_json(nlohmann::json& j, const CropTransform& t);
void from_json(const nlohmann::json& j, CropTransform& t);

}  // namespace occbench
