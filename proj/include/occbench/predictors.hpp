#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "occbench/datamodel.hpp"
#include "occbench/geometry.hpp"
#include "occbench/heatmap.hpp"
#include "occbench/image.hpp"

namespace occbench {

struct PredictorInput {
  std::int64_t frame_id = 0;
  const Image* crop = nullptr;
  const CropTransform* transform = nullptr;
  const CameraIntrinsics* camera = nullptr;
  double root_depth_mm = 0.0;  // oracle root depth
  int root_index = 0;
  int joint_count = 0;

  // Evaluation-only side information for the reference predictors. An
  // image-based estimator must not read these.
  const Pose3D* ground_truth = nullptr;
  const AlphaMap* occlusion = nullptr;  // crop-space union, 255 = occluded; null if none
};

using PredictorOutput = std::variant<Pose3D, VolumetricHeatmap>;

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string label() const = 0;
  virtual PredictorOutput predict(const PredictorInput& input) const = 0;
  // Callers serialize predict() when this is false.
  virtual bool concurrent_safe() const { return true; }
};

// Pose from either output form; heatmaps are decoded with the oracle root depth.
Pose3D resolve_prediction(const PredictorOutput& output, const PredictorInput& input);

enum class ReferenceKind { oracle, noisy_oracle, occlusion_mock, heatmap_oracle, nn_baseline };

ReferenceKind parse_reference_kind(const std::string& name);

struct TrainingSet {
  const SequenceManifest* manifest = nullptr;
  const std::vector<Image>* images = nullptr;
};

struct ReferencePredictorSpec {
  ReferenceKind kind = ReferenceKind::oracle;
  std::string label;
  std::uint64_t seed = 0;
  double sigma_mm = 10.0;             // noisy_oracle
  double base_mm = 0.0;               // occlusion_mock
  double sensitivity_mm = 100.0;      // occlusion_mock, mm per fully occluded neighborhood
  double neighborhood_radius_px = 12.0;
  double heatmap_sigma_voxels = 1.0;  // heatmap_oracle
  HeatmapShape heatmap_shape;
  int crop_size = 256;                // nn_baseline
  double coverage = 0.8;              // nn_baseline
  int feature_size = 32;              // nn_baseline thumbnail side
  TrainingSet training;               // nn_baseline
};

std::unique_ptr<Predictor> make_reference_predictor(const ReferencePredictorSpec& spec);

// Fraction of crop pixels within `radius` of `center` marked occluded.
double occluded_neighborhood(const AlphaMap& occlusion, const Vec2& center, double radius);

// Fixed unit direction used by the occlusion mock for joint j.
Vec3 mock_direction(int joint);

}  // namespace occbench
