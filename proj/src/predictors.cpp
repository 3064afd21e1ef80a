#include "occbench/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "occbench/error.hpp"
#include "occbench/metrics.hpp"
#include "occbench/random.hpp"

namespace occbench {

Pose3D resolve_prediction(const PredictorOutput& output, const PredictorInput& input) {
  Pose3D pose;
  if (const auto* hm = std::get_if<VolumetricHeatmap>(&output)) {
    pose = decode_pose(*hm, *input.transform, *input.camera, input.root_depth_mm, input.root_index);
  } else {
    pose = std::get<Pose3D>(output);
  }
  pose.validate(input.joint_count);
  return pose;
}

ReferenceKind parse_reference_kind(const std::string& name) {
  if (name == "oracle") return ReferenceKind::oracle;
  if (name == "noisy_oracle") return ReferenceKind::noisy_oracle;
  if (name == "occlusion_mock") return ReferenceKind::occlusion_mock;
  if (name == "heatmap_oracle") return ReferenceKind::heatmap_oracle;
  if (name == "nn_baseline") return ReferenceKind::nn_baseline;
  throw ValidationError("unknown predictor '" + name + "'");
}

double occluded_neighborhood(const AlphaMap& occ, const Vec2& c, double radius) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(c.x() - radius)));
  const int x1 = std::min(occ.width() - 1, static_cast<int>(std::floor(c.x() + radius)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(c.y() - radius)));
  const int y1 = std::min(occ.height() - 1, static_cast<int>(std::floor(c.y() + radius)));
  std::int64_t inside = 0, hit = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if ((Vec2(x, y) - c).squaredNorm() > radius * radius) continue;
      ++inside;
      if (occ.at(x, y) >= 128) ++hit;
    }
  }
  return inside ? static_cast<double>(hit) / static_cast<double>(inside) : 0.0;
}

Vec3 mock_direction(int joint) {
  // Fibonacci sphere.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - 2.0 * (joint % 64 + 0.5) / 64.0;
  const double r = std::sqrt(1.0 - z * z);
  return {r * std::cos(golden * joint), r * std::sin(golden * joint), z};
}

namespace {

const Pose3D& require_truth(const PredictorInput& in) {
  if (!in.ground_truth) throw ValidationError("reference predictor needs ground truth side input");
  return *in.ground_truth;
}

class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(std::string label) : label_(std::move(label)) {}
  std::string label() const override { return label_; }
  PredictorOutput predict(const PredictorInput& in) const override { return require_truth(in); }

 private:
  std::string label_;
};

class NoisyOraclePredictor : public Predictor {
 public:
  NoisyOraclePredictor(std::string label, double sigma, std::uint64_t seed)
      : label_(std::move(label)), sigma_(sigma), seed_(seed) {}
  std::string label() const override { return label_; }
  PredictorOutput predict(const PredictorInput& in) const override {
    Pose3D pose = require_truth(in);
    Rng rng(derive_seed({seed_, static_cast<std::uint64_t>(in.frame_id)}));
    for (int j = 0; j < pose.joint_count(); ++j) {
      if (j == in.root_index) continue;
      for (int a = 0; a < 3; ++a) pose.joints_mm[j][a] += sigma_ * standard_normal(rng);
    }
    return pose;
  }

 private:
  std::string label_;
  double sigma_;
  std::uint64_t seed_;
};

// Displaces every non-root joint by (base + sensitivity * f_j) * J / (J - 1)
// along a fixed direction, f_j being the occluded share of the joint's crop
// neighborhood. Root-included MPJPE is then base + sensitivity * mean f_j.
class OcclusionMockPredictor : public Predictor {
 public:
  OcclusionMockPredictor(std::string label, double base, double sensitivity, double radius)
      : label_(std::move(label)), base_(base), sensitivity_(sensitivity), radius_(radius) {}
  std::string label() const override { return label_; }
  PredictorOutput predict(const PredictorInput& in) const override {
    Pose3D pose = require_truth(in);
    const int joints = pose.joint_count();
    if (joints < 2) return pose;
    const double gain = static_cast<double>(joints) / (joints - 1);
    for (int j = 0; j < joints; ++j) {
      if (j == in.root_index) continue;
      double f = 0.0;
      if (in.occlusion) {
        const Vec2 c = warp_point(*in.transform, project(*in.camera, pose.joints_mm[j]));
        f = occluded_neighborhood(*in.occlusion, c, radius_);
      }
      pose.joints_mm[j] += (base_ + sensitivity_ * f) * gain * mock_direction(j);
    }
    return pose;
  }

 private:
  std::string label_;
  double base_;
  double sensitivity_;
  double radius_;
};

class HeatmapOraclePredictor : public Predictor {
 public:
  HeatmapOraclePredictor(std::string label, double sigma, HeatmapShape shape)
      : label_(std::move(label)), sigma_(sigma), shape_(shape) {}
  std::string label() const override { return label_; }
  PredictorOutput predict(const PredictorInput& in) const override {
    HeatmapShape shape = shape_;
    shape.crop_size = in.transform->crop_size;
    return encode_gaussian(require_truth(in), *in.transform, *in.camera, in.root_depth_mm,
                           in.root_index, sigma_, shape);
  }

 private:
  std::string label_;
  double sigma_;
  HeatmapShape shape_;
};

// Nearest neighbor over grayscale thumbnails of training crops. Reads only
// the crop image, never the side inputs.
class NearestNeighborPredictor : public Predictor {
 public:
  NearestNeighborPredictor(std::string label, const ReferencePredictorSpec& spec)
      : label_(std::move(label)), feature_size_(spec.feature_size) {
    const auto& m = *spec.training.manifest;
    const auto& images = *spec.training.images;
    if (m.frames.empty() || images.size() != m.frames.size()) {
      throw ValidationError("nn_baseline needs a non-empty training set with images");
    }
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
      const auto& f = m.frames[i];
      const auto t = make_crop_transform(f.camera, f.bbox, spec.crop_size, spec.coverage);
      features_.push_back(thumbnail(warp_image(t, images[i])));
      poses_.push_back(root_align(f.pose_gt, m.skeleton.root_index));
    }
  }

  std::string label() const override { return label_; }

  PredictorOutput predict(const PredictorInput& in) const override {
    const auto query = thumbnail(*in.crop);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < features_.size(); ++i) {
      double d = 0.0;
      for (std::size_t k = 0; k < query.size(); ++k) {
        const double diff = query[k] - features_[i][k];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    // Place the root on the ray through the crop center at the oracle depth.
    const double c = 0.5 * in.transform->crop_size;
    const Vec3 root = backproject(*in.camera, inverse_warp_point(*in.transform, {c, c}), in.root_depth_mm);
    Pose3D pose = poses_[best];
    if (pose.joint_count() != in.joint_count) {
      throw ValidationError("nn_baseline training skeleton differs from the evaluation skeleton");
    }
    for (auto& p : pose.joints_mm) p += root;
    return pose;
  }

 private:
  std::vector<float> thumbnail(const Image& img) const {
    const int n = feature_size_;
    std::vector<float> out(static_cast<std::size_t>(n) * n, 0.0f);
    std::vector<int> counts(out.size(), 0);
    for (int y = 0; y < img.height(); ++y) {
      const int ty = y * n / img.height();
      for (int x = 0; x < img.width(); ++x) {
        const int tx = x * n / img.width();
        const Rgb c = img.at(x, y);
        out[ty * n + tx] += (c.r + c.g + c.b) / 3.0f;
        ++counts[ty * n + tx];
      }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (counts[i]) out[i] /= static_cast<float>(counts[i]);
    }
    return out;
  }

  std::string label_;
  int feature_size_;
  std::vector<std::vector<float>> features_;
  std::vector<Pose3D> poses_;
};

}  // namespace

std::unique_ptr<Predictor> make_reference_predictor(const ReferencePredictorSpec& spec) {
  auto label = [&spec](const char* fallback) {
    return spec.label.empty() ? std::string(fallback) : spec.label;
  };
  switch (spec.kind) {
    case ReferenceKind::oracle:
      return std::make_unique<OraclePredictor>(label("oracle"));
    case ReferenceKind::noisy_oracle:
      if (!(spec.sigma_mm >= 0.0)) throw ValidationError("noisy_oracle sigma must be non-negative");
      return std::make_unique<NoisyOraclePredictor>(label("noisy_oracle"), spec.sigma_mm, spec.seed);
    case ReferenceKind::occlusion_mock:
      if (!(spec.sensitivity_mm >= 0.0) || !(spec.base_mm >= 0.0)) {
        throw ValidationError("occlusion_mock base and sensitivity must be non-negative");
      }
      if (!(spec.neighborhood_radius_px > 0.0)) throw ValidationError("neighborhood radius must be positive");
      return std::make_unique<OcclusionMockPredictor>(label("occlusion_mock"), spec.base_mm,
                                                      spec.sensitivity_mm, spec.neighborhood_radius_px);
    case ReferenceKind::heatmap_oracle:
      if (!(spec.heatmap_sigma_voxels > 0.0)) throw ValidationError("heatmap sigma must be positive");
      return std::make_unique<HeatmapOraclePredictor>(label("heatmap_oracle"),
                                                      spec.heatmap_sigma_voxels, spec.heatmap_shape);
    case ReferenceKind::nn_baseline:
      if (!spec.training.manifest || !spec.training.images) {
        throw ValidationError("nn_baseline requires a training manifest");
      }
      return std::make_unique<NearestNeighborPredictor>(label("nn_baseline"), spec);
  }
  throw ValidationError("unknown reference predictor");
}

}  // namespace occbench
