#include "occbench/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>

#include "occbench/error.hpp"

namespace occbench {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw ValidationError("camera principal point not finite");
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 m;
  m << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return m;
}

Mat3 CameraIntrinsics::inverse_matrix() const {
  Mat3 m;
  m << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return m;
}

void BoundingBox::validate() const {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw ValidationError("bounding box must have positive width and height");
  }
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h)) {
    throw ValidationError("bounding box not finite");
  }
}

CropTransform CropTransform::identity(const CameraIntrinsics& k) {
  CropTransform t;
  t.k_src = k;
  t.k_dst = k;
  t.crop_size = std::max(k.width, k.height);
  return t;
}

void CropTransform::rebuild() {
  homography = k_dst.matrix() * rotation * k_src.inverse_matrix();
  inverse_homography = k_src.matrix() * rotation.transpose() * k_dst.inverse_matrix();
}

Vec2 project(const CameraIntrinsics& k, const Vec3& p) {
  if (!(p.z() > 0.0)) throw ComputeError("cannot project a point with non-positive depth");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Vec3 backproject(const CameraIntrinsics& k, const Vec2& pixel, double depth_mm) {
  if (!(depth_mm > 0.0)) throw ComputeError("cannot back-project to non-positive depth");
  return {(pixel.x() - k.cx) * depth_mm / k.fx, (pixel.y() - k.cy) * depth_mm / k.fy, depth_mm};
}

CropTransform make_crop_transform(const CameraIntrinsics& k, const BoundingBox& bbox,
                                  int crop_size, double coverage) {
  k.validate();
  bbox.validate();
  if (crop_size <= 0) throw ValidationError("crop size must be positive");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw ValidationError("coverage must be in (0, 1]");

  // Look-at rotation: new z along the ray through the bbox center, new x
  // orthogonal to the original y axis (zero roll).
  const Vec2 c = bbox.center();
  const Vec3 forward = (k.inverse_matrix() * Vec3(c.x(), c.y(), 1.0)).normalized();
  const Vec3 right = Vec3::UnitY().cross(forward).normalized();
  const Vec3 down = forward.cross(right);

  CropTransform t;
  t.rotation.row(0) = right.transpose();
  t.rotation.row(1) = down.transpose();
  t.rotation.row(2) = forward.transpose();
  t.k_src = k;
  t.crop_size = crop_size;

  const double scale = coverage * crop_size / std::max(bbox.w, bbox.h);
  t.k_dst.fx = k.fx * scale;
  t.k_dst.fy = k.fy * scale;
  t.k_dst.cx = 0.5 * crop_size;
  t.k_dst.cy = 0.5 * crop_size;
  t.k_dst.width = crop_size;
  t.k_dst.height = crop_size;
  t.rebuild();
  return t;
}

namespace {

Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
  if (!(q.z() > 0.0) || !std::isfinite(q.z())) {
    throw ComputeError("point maps through the plane at infinity");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

}  // namespace

Vec2 warp_point(const CropTransform& t, const Vec2& p) { return apply_homography(t.homography, p); }

Vec2 inverse_warp_point(const CropTransform& t, const Vec2& p) {
  return apply_homography(t.inverse_homography, p);
}

BoundingBox warp_bbox(const CropTransform& t, const BoundingBox& bbox) {
  const Vec2 corners[4] = {{bbox.x, bbox.y}, {bbox.x + bbox.w, bbox.y},
                           {bbox.x, bbox.y + bbox.h}, {bbox.x + bbox.w, bbox.y + bbox.h}};
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& c : corners) {
    const Vec2 q = warp_point(t, c);
    x0 = std::min(x0, q.x());
    y0 = std::min(y0, q.y());
    x1 = std::max(x1, q.x());
    y1 = std::max(y1, q.y());
  }
  x0 = std::clamp(x0, 0.0, double(t.crop_size));
  y0 = std::clamp(y0, 0.0, double(t.crop_size));
  x1 = std::clamp(x1, 0.0, double(t.crop_size));
  y1 = std::clamp(y1, 0.0, double(t.crop_size));
  BoundingBox out{x0, y0, x1 - x0, y1 - y0};
  out.validate();
  return out;
}

Image warp_image(const CropTransform& t, const Image& image, Interpolation) {
  if (image.width() != t.k_src.width || image.height() != t.k_src.height) {
    throw ValidationError("image is " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()) + " but the source camera is " +
                          std::to_string(t.k_src.width) + "x" + std::to_string(t.k_src.height));
  }
  Image out(t.crop_size, t.crop_size);
  const Mat3& h = t.inverse_homography;
  double px[3];
  for (int y = 0; y < t.crop_size; ++y) {
    for (int x = 0; x < t.crop_size; ++x) {
      const Vec3 q = h * Vec3(x, y, 1.0);
      if (!(q.z() > 0.0)) continue;
      sample_bilinear(image, q.x() / q.z(), q.y() / q.z(), px);
      out.set(x, y,
              {static_cast<std::uint8_t>(std::lround(std::clamp(px[0], 0.0, 255.0))),
               static_cast<std::uint8_t>(std::lround(std::clamp(px[1], 0.0, 255.0))),
               static_cast<std::uint8_t>(std::lround(std::clamp(px[2], 0.0, 255.0)))});
    }
  }
  return out;
}

namespace {

nlohmann::json matrix_json(const Mat3& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

Mat3 matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3x3 row-major matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw ValidationError("expected a 3x3 row-major matrix");
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const CameraIntrinsics& k) {
  j = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

void from_json(const nlohmann::json& j, CameraIntrinsics& k) {
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
}

void to_json(nlohmann::json& j, const CropTransform& t) {
  j = {{"rotation", matrix_json(t.rotation)},
       {"k_src", t.k_src},
       {"k_dst", t.k_dst},
       {"crop_size", t.crop_size},
       {"homography", matrix_json(t.homography)}};
}

void from_json(const nlohmann::json& j, CropTransform& t) {
  t.rotation = matrix_from_json(j.at("rotation"));
  t.k_src = j.at("k_src").get<CameraIntrinsics>();
  t.k_dst = j.at("k_dst").get<CameraIntrinsics>();
  t.crop_size = j.at("crop_size").get<int>();
  t.rebuild();
}

}  // namespace occbench
