#include "occbench/augment.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "occbench/error.hpp"

namespace occbench {

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ValidationError(std::string(name) + " range is not well ordered");
  }
}

double draw(const Range& r, Rng& rng) { return r.lo == r.hi ? r.lo : uniform(rng, r.lo, r.hi); }

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

void AugmentParams::validate() const {
  check_range(rotation_deg, "rotation");
  check_range(scale, "scale");
  check_range(translation_px, "translation");
  check_range(contrast, "contrast");
  check_range(blur_sigma, "blur sigma");
  if (!(scale.lo > 0.0)) throw ValidationError("scale must be positive");
  if (!(contrast.lo >= 0.0)) throw ValidationError("contrast must be non-negative");
  if (!(blur_sigma.lo >= 0.0)) throw ValidationError("blur sigma must be non-negative");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ValidationError("flip probability must be within [0, 1]");
  }
  if (!(brightness >= 0.0) || !(hue_deg >= 0.0)) {
    throw ValidationError("brightness and hue strengths must be non-negative");
  }
}

AugmentParams AugmentParams::identity() {
  AugmentParams p;
  p.rotation_deg = {0, 0};
  p.scale = {1, 1};
  p.translation_px = {0, 0};
  p.flip_probability = 0.0;
  p.brightness = 0.0;
  p.contrast = {1, 1};
  p.hue_deg = 0.0;
  p.blur_sigma = {0, 0};
  return p;
}

void to_json(nlohmann::json& j, const AugmentParams& p) {
  auto range = [](const Range& r) { return nlohmann::json::array({r.lo, r.hi}); };
  j = {{"rotation_deg", range(p.rotation_deg)}, {"scale", range(p.scale)},
       {"translation_px", range(p.translation_px)}, {"flip_probability", p.flip_probability},
       {"brightness", p.brightness}, {"contrast", range(p.contrast)}, {"hue_deg", p.hue_deg},
       {"blur_sigma", range(p.blur_sigma)}, {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, AugmentParams& p) {
  auto range = [&j](const char* key, Range& r) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw ValidationError(std::string(key) + ": expected [lo, hi]");
    r = {v[0].get<double>(), v[1].get<double>()};
  };
  range("rotation_deg", p.rotation_deg);
  range("scale", p.scale);
  range("translation_px", p.translation_px);
  range("contrast", p.contrast);
  range("blur_sigma", p.blur_sigma);
  p.flip_probability = j.value("flip_probability", p.flip_probability);
  p.brightness = j.value("brightness", p.brightness);
  p.hue_deg = j.value("hue_deg", p.hue_deg);
  p.seed = j.value("seed", p.seed);
  p.validate();
}

GeometricDraw sample_geometric(const AugmentParams& params, Rng& rng) {
  params.validate();
  GeometricDraw d;
  d.angle_deg = draw(params.rotation_deg, rng);
  d.scale = draw(params.scale, rng);
  d.translation = {draw(params.translation_px, rng), draw(params.translation_px, rng)};
  d.flip = params.flip_probability > 0.0 && bernoulli(rng, params.flip_probability);
  return d;
}

Eigen::Matrix<double, 2, 3> geometric_matrix(const GeometricDraw& d, int width, int height) {
  const double a = d.angle_deg * std::numbers::pi / 180.0;
  Eigen::Matrix2d lin;
  lin << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  lin *= d.scale;
  const Vec2 center(0.5 * width, 0.5 * height);
  Vec2 offset = center - lin * center + d.translation;
  if (d.flip) {
    lin.row(0) *= -1.0;
    offset.x() = width - offset.x();
  }
  Eigen::Matrix<double, 2, 3> m;
  m.leftCols<2>() = lin;
  m.col(2) = offset;
  return m;
}

GeometricResult apply_geometric(const Image& image, const std::vector<Vec2>& joints,
                                const Skeleton& skeleton, const GeometricDraw& d) {
  if (d.flip && skeleton.left_right_pairs.empty()) {
    throw ValidationError("flip requested but the skeleton declares no left/right pairs");
  }
  if (static_cast<int>(joints.size()) != skeleton.joint_count()) {
    throw ValidationError("joint count does not match the skeleton");
  }
  const auto m = geometric_matrix(d, image.width(), image.height());
  const Eigen::Matrix2d inv_lin = m.leftCols<2>().inverse();
  const Vec2 offset = m.col(2);

  GeometricResult r;
  r.draw = d;
  r.image = Image(image.width(), image.height());
  double px[3];
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const Vec2 src = inv_lin * (Vec2(x, y) - offset);
      sample_bilinear(image, src.x(), src.y(), px);
      r.image.set(x, y, {to_byte(px[0]), to_byte(px[1]), to_byte(px[2])});
    }
  }

  r.joints.resize(joints.size());
  const auto perm = d.flip ? skeleton.flip_permutation() : std::vector<int>{};
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const Vec2 q = m.leftCols<2>() * joints[j] + offset;
    r.joints[d.flip ? perm[j] : j] = q;
  }
  r.in_frame.resize(joints.size());
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const Vec2& q = r.joints[j];
    r.in_frame[j] = q.x() >= 0 && q.y() >= 0 && q.x() <= image.width() - 1 && q.y() <= image.height() - 1;
  }
  return r;
}

GeometricResult geometric_augment(const Image& image, const std::vector<Vec2>& joints,
                                  const Skeleton& skeleton, const AugmentParams& params, Rng& rng) {
  if (params.flip_probability > 0.0 && skeleton.left_right_pairs.empty()) {
    throw ValidationError("flip requested but the skeleton declares no left/right pairs");
  }
  return apply_geometric(image, joints, skeleton, sample_geometric(params, rng));
}

Image gaussian_blur(const Image& image, double sigma) {
  if (!(sigma > 0.0)) return image;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int w = image.width(), h = image.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * image.channel(std::clamp(x + i, 0, w - 1), y, c);
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        for (int c = 0; c < 3; ++c) acc[c] += kernel[i + radius] * tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
      }
      out.set(x, y, {to_byte(acc[0]), to_byte(acc[1]), to_byte(acc[2])});
    }
  }
  return out;
}

Image photometric_augment(const Image& image, const AugmentParams& params, Rng& rng) {
  params.validate();
  const double shift = params.brightness > 0.0 ? uniform(rng, -params.brightness, params.brightness) : 0.0;
  const double gain = draw(params.contrast, rng);
  const double hue = params.hue_deg > 0.0 ? uniform(rng, -params.hue_deg, params.hue_deg) : 0.0;
  const double sigma = draw(params.blur_sigma, rng);

  Image out = image;
  if (shift != 0.0 || gain != 1.0 || hue != 0.0) {
    double mean = 0.0;
    for (auto v : image.bytes()) mean += v;
    mean /= std::max<std::size_t>(1, image.bytes().size());
    // Hue rotation about the gray axis in YIQ space.
    const double a = hue * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        const Rgb c = image.at(x, y);
        double r = c.r, g = c.g, b = c.b;
        if (hue != 0.0) {
          const double yy = 0.299 * r + 0.587 * g + 0.114 * b;
          const double i0 = 0.596 * r - 0.274 * g - 0.322 * b;
          const double q0 = 0.211 * r - 0.523 * g + 0.312 * b;
          const double i1 = ca * i0 - sa * q0;
          const double q1 = sa * i0 + ca * q0;
          r = yy + 0.956 * i1 + 0.621 * q1;
          g = yy - 0.272 * i1 - 0.647 * q1;
          b = yy - 1.106 * i1 + 1.703 * q1;
        }
        auto adjust = [&](double v) { return to_byte(mean + gain * (v - mean) + shift); };
        out.set(x, y, {adjust(r), adjust(g), adjust(b)});
      }
    }
  }
  if (sigma >= 0.2) out = gaussian_blur(out, sigma);
  return out;
}

TrainingSample augment_training_sample(const Image& crop, const std::vector<Vec2>& joints,
                                       const BoundingBox& bbox_crop, const Skeleton& skeleton,
                                       const AugmentParams& params,
                                       const AugmentationPolicy& occlusion,
                                       const ObjectLibrary* library, Rng& rng) {
  const GeometricDraw d = sample_geometric(params, rng);
  auto geo = apply_geometric(crop, joints, skeleton, d);

  // Move the bbox with the geometric map (hull of its corners).
  const auto m = geometric_matrix(d, crop.width(), crop.height());
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const Vec2& c : {Vec2(bbox_crop.x, bbox_crop.y), Vec2(bbox_crop.x + bbox_crop.w, bbox_crop.y),
                       Vec2(bbox_crop.x, bbox_crop.y + bbox_crop.h),
                       Vec2(bbox_crop.x + bbox_crop.w, bbox_crop.y + bbox_crop.h)}) {
    const Vec2 q = m.leftCols<2>() * c + m.col(2);
    x0 = std::min(x0, q.x());
    y0 = std::min(y0, q.y());
    x1 = std::max(x1, q.x());
    y1 = std::max(y1, q.y());
  }
  x0 = std::clamp(x0, 0.0, double(crop.width()));
  x1 = std::clamp(x1, 0.0, double(crop.width()));
  y0 = std::clamp(y0, 0.0, double(crop.height()));
  y1 = std::clamp(y1, 0.0, double(crop.height()));
  const BoundingBox moved{x0, y0, std::max(x1 - x0, 1.0), std::max(y1 - y0, 1.0)};

  auto occ = apply_policy(occlusion, geo.image, moved, library, LibrarySplit::train, rng);
  TrainingSample s;
  s.image = photometric_augment(occ.image, params, rng);
  s.joints = std::move(geo.joints);
  s.occluded = occ.applied;
  s.degree = occ.degree;
  return s;
}

}  // namespace occbench
