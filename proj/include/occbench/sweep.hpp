#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "occbench/datamodel.hpp"
#include "occbench/metrics.hpp"
#include "occbench/occlusion.hpp"
#include "occbench/predictors.hpp"

namespace occbench {

// Manifest plus decoded frame images.
struct EvalDataset {
  SequenceManifest manifest;
  std::vector<Image> images;

  static EvalDataset load(const std::filesystem::path& manifest_path);
  static EvalDataset from(SyntheticDataset synthetic);
  TrainingSet training_set() const { return {&manifest, &images}; }
};

std::vector<double> default_degrees();      // 0, 0.1, ..., 0.7
std::vector<double> matrix_degrees();       // 0.1, ..., 0.5
std::vector<double> degree_grid(double step, double max_degree = kMaxOcclusionDegree);

struct SweepConfig {
  std::vector<OcclusionKind> kinds{kOccluderFamilies.begin(), kOccluderFamilies.end()};
  std::vector<double> degrees = default_degrees();
  std::uint64_t seed = 0;
  int crop_size = 256;
  double coverage = 0.8;
  bool include_root = true;
  const ObjectLibrary* library = nullptr;
  LibrarySplit split = LibrarySplit::test;
  OccluderParams occluder;
  int threads = 0;  // 0: hardware concurrency
};

// Seed of the occluder draw for one (frame, kind, degree) cell member.
std::uint64_t occlusion_seed(std::uint64_t run_seed, std::int64_t frame_id, OcclusionKind kind,
                             double degree);

struct RobustnessPoint {
  double degree = 0.0;
  double mean_mm = 0.0;
  double std_mm = 0.0;
  std::int64_t n_frames = 0;
};

struct RobustnessCurve {
  OcclusionKind kind = OcclusionKind::none;
  std::vector<RobustnessPoint> points;

  const RobustnessPoint& at(double degree) const;
};

struct FrameFailure {
  std::int64_t frame_id = 0;
  OcclusionKind kind = OcclusionKind::none;
  double degree = 0.0;
  std::string reason;
};

struct SweepResult {
  std::string predictor;
  std::vector<RobustnessCurve> curves;
  std::vector<ErrorRecord> records;  // ordered by (kind, degree, frame)
  std::vector<FrameFailure> failures;
  std::vector<std::string> occluder_ids;  // library entries used, sorted, unique
};

SweepResult run_degree_sweep(const Predictor& predictor, const EvalDataset& dataset,
                             const SweepConfig& config);

struct TrainTestMatrix {
  std::vector<std::string> rows;         // predictor labels
  std::vector<OcclusionKind> columns;    // test occlusion kinds
  std::vector<std::vector<double>> cells;
  std::vector<double> degrees;
  std::vector<SweepResult> sweeps;       // one per row
};

// Each cell is the unweighted mean of the per-degree means over the
// degrees 10%..50%; config.degrees is ignored.
TrainTestMatrix run_matrix(const std::vector<const Predictor*>& predictors,
                           const EvalDataset& dataset, SweepConfig config);

double matrix_cell(const RobustnessCurve& curve, const std::vector<double>& degrees);

}  // namespace occbench
