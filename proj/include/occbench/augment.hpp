#pragma once

#include <vector>

#include <json.hpp>

#include "occbench/datamodel.hpp"
#include "occbench/image.hpp"
#include "occbench/occlusion.hpp"
#include "occbench/random.hpp"

namespace occbench {

struct AugmentParams {
  Range rotation_deg{-15.0, 15.0};
  Range scale{0.85, 1.15};
  Range translation_px{-8.0, 8.0};
  double flip_probability = 0.5;
  double brightness = 0.0;     // max |additive shift|, 8-bit units
  Range contrast{1.0, 1.0};    // multiplicative factor about the mean gray
  double hue_deg = 0.0;        // max |hue rotation|
  Range blur_sigma{0.0, 1.5};  // px; sigma below 0.2 skips blurring
  std::uint64_t seed = 0;

  void validate() const;
  // Every range degenerate at its identity value.
  static AugmentParams identity();
};

void to_json(nlohmann::json& j, const AugmentParams& p);
void from_json(const nlohmann::json& j, AugmentParams& p);

// p' = center + scale * R(angle) * (p - center) + translation, then an
// optional mirror x -> width - x. Joint indices are relabeled on flips.
struct GeometricDraw {
  double angle_deg = 0.0;
  double scale = 1.0;
  Vec2 translation{0, 0};
  bool flip = false;
};

struct GeometricResult {
  Image image;
  std::vector<Vec2> joints;
  std::vector<bool> in_frame;
  GeometricDraw draw;
};

GeometricDraw sample_geometric(const AugmentParams& params, Rng& rng);

// Affine map applied to pixels and joints for an image of the given size.
Eigen::Matrix<double, 2, 3> geometric_matrix(const GeometricDraw& draw, int width, int height);

GeometricResult apply_geometric(const Image& image, const std::vector<Vec2>& joints,
                                const Skeleton& skeleton, const GeometricDraw& draw);
GeometricResult geometric_augment(const Image& image, const std::vector<Vec2>& joints,
                                  const Skeleton& skeleton, const AugmentParams& params, Rng& rng);

Image photometric_augment(const Image& image, const AugmentParams& params, Rng& rng);

// Separable Gaussian blur with edge replication.
Image gaussian_blur(const Image& image, double sigma);

// Full training-time chain: geometric, then occlusion, then photometric.
struct TrainingSample {
  Image image;
  std::vector<Vec2> joints;
  bool occluded = false;
  DegreeMeasurement degree;
};

TrainingSample augment_training_sample(const Image& crop, const std::vector<Vec2>& joints,
                                       const BoundingBox& bbox_crop, const Skeleton& skeleton,
                                       const AugmentParams& params,
                                       const AugmentationPolicy& occlusion,
                                       const ObjectLibrary* library, Rng& rng);

}  // namespace occbench
