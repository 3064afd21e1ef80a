#include "occbench/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include "occbench/error.hpp"
#include "occbench/random.hpp"

namespace occbench {

EvalDataset EvalDataset::load(const std::filesystem::path& manifest_path) {
  EvalDataset d;
  d.manifest = load_manifest(manifest_path);
  d.images.reserve(d.manifest.frames.size());
  for (const auto& f : d.manifest.frames) d.images.push_back(read_png(d.manifest.image_file(f)));
  return d;
}

EvalDataset EvalDataset::from(SyntheticDataset synthetic) {
  return {std::move(synthetic.manifest), std::move(synthetic.images)};
}

std::vector<double> degree_grid(double step, double max_degree) {
  if (!(step > 0.0)) throw ValidationError("degree step must be positive");
  std::vector<double> out;
  const int n = static_cast<int>(std::floor(max_degree / step + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(std::round(i * step * 1e6) / 1e6);
  return out;
}

std::vector<double> default_degrees() { return degree_grid(0.1); }

std::vector<double> matrix_degrees() { return {0.1, 0.2, 0.3, 0.4, 0.5}; }

std::uint64_t occlusion_seed(std::uint64_t run_seed, std::int64_t frame_id, OcclusionKind kind,
                             double degree) {
  return derive_seed({run_seed, static_cast<std::uint64_t>(frame_id), hash_string(to_string(kind)),
                      static_cast<std::uint64_t>(std::llround(degree * 1000.0))});
}

const RobustnessPoint& RobustnessCurve::at(double degree) const {
  for (const auto& p : points) {
    if (std::abs(p.degree - degree) < 1e-9) return p;
  }
  throw ValidationError("curve has no point at degree " + format_number(degree, 3));
}

namespace {

struct PreparedFrame {
  CropTransform transform;
  Image crop;
  BoundingBox bbox_crop;
};

struct Task {
  std::size_t kind;
  std::size_t degree;
  std::size_t frame;
};

struct Outcome {
  bool ok = false;
  ErrorRecord record;
  std::string reason;
  std::vector<std::string> ids;
};

}  // namespace

SweepResult run_degree_sweep(const Predictor& predictor, const EvalDataset& dataset,
                             const SweepConfig& config) {
  const auto& m = dataset.manifest;
  if (m.frames.empty()) throw ValidationError("sweep dataset has no frames");
  if (dataset.images.size() != m.frames.size()) throw ValidationError("sweep dataset is missing images");
  if (config.kinds.empty() || config.degrees.empty()) throw ValidationError("sweep needs kinds and degrees");
  for (std::size_t i = 1; i < config.degrees.size(); ++i) {
    if (!(config.degrees[i] > config.degrees[i - 1])) throw ValidationError("degrees must increase");
  }
  for (double d : config.degrees) OcclusionSpec{OcclusionKind::none, d, 0}.validate();
  for (auto k : config.kinds) {
    if (k == OcclusionKind::none) throw ValidationError("'none' is not a sweep kind");
    if (needs_library(k) && !config.library) {
      throw ValidationError(std::string(to_string(k)) + " sweeps need an object library");
    }
  }

  std::vector<PreparedFrame> frames(m.frames.size());
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    auto& p = frames[i];
    p.transform = make_crop_transform(f.camera, f.bbox, config.crop_size, config.coverage);
    p.crop = warp_image(p.transform, dataset.images[i]);
    p.bbox_crop = warp_bbox(p.transform, f.bbox);
  }

  std::vector<Task> tasks;
  for (std::size_t k = 0; k < config.kinds.size(); ++k)
    for (std::size_t d = 0; d < config.degrees.size(); ++d)
      for (std::size_t f = 0; f < frames.size(); ++f) tasks.push_back({k, d, f});

  std::mutex predictor_mutex;
  const int root = m.skeleton.root_index;
  auto run_task = [&](const Task& t) {
    Outcome out;
    const auto& rec = m.frames[t.frame];
    const auto& pf = frames[t.frame];
    const OcclusionKind kind = config.kinds[t.kind];
    const double degree = config.degrees[t.degree];
    try {
      const OcclusionSpec spec{kind, degree, occlusion_seed(config.seed, rec.frame_id, kind, degree)};
      const ImageSize size{pf.crop.width(), pf.crop.height()};
      const auto masks = generate(spec, pf.bbox_crop, size, config.library, config.split, config.occluder);
      const Image image = masks.masks.empty() ? pf.crop : composite(pf.crop, masks, config.library);
      const AlphaMap coverage = masks.coverage();
      out.ids = masks.source_ids();

      PredictorInput in;
      in.frame_id = rec.frame_id;
      in.crop = &image;
      in.transform = &pf.transform;
      in.camera = &rec.camera;
      in.root_depth_mm = rec.root_depth_mm(root);
      in.root_index = root;
      in.joint_count = m.skeleton.joint_count();
      in.ground_truth = &rec.pose_gt;
      in.occlusion = masks.masks.empty() ? nullptr : &coverage;

      PredictorOutput output;
      if (predictor.concurrent_safe()) {
        output = predictor.predict(in);
      } else {
        std::lock_guard lock(predictor_mutex);
        output = predictor.predict(in);
      }
      const Pose3D pose = resolve_prediction(output, in);
      out.record = make_error_record(rec.frame_id, rec.action, std::string(to_string(kind)), degree,
                                     pose, rec.pose_gt, root, config.include_root);
      out.ok = true;
    } catch (const std::exception& e) {
      out.reason = e.what();
    }
    return out;
  };

  std::vector<Outcome> outcomes(tasks.size());
  const int threads = std::max(1, config.threads > 0 ? config.threads
                                                     : static_cast<int>(std::thread::hardware_concurrency()));
  if (threads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) outcomes[i] = run_task(tasks[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) outcomes[i] = run_task(tasks[i]);
      });
    }
  }

  SweepResult result;
  result.predictor = predictor.label();
  std::set<std::string> ids;
  for (std::size_t k = 0; k < config.kinds.size(); ++k) {
    RobustnessCurve curve;
    curve.kind = config.kinds[k];
    for (std::size_t d = 0; d < config.degrees.size(); ++d) {
      std::vector<double> values;
      for (std::size_t f = 0; f < frames.size(); ++f) {
        const std::size_t i = (k * config.degrees.size() + d) * frames.size() + f;
        auto& o = outcomes[i];
        if (o.ok) {
          values.push_back(o.record.mpjpe_mm);
          result.records.push_back(std::move(o.record));
          ids.insert(o.ids.begin(), o.ids.end());
        } else {
          result.failures.push_back({m.frames[f].frame_id, curve.kind, config.degrees[d], o.reason});
        }
      }
      if (values.empty()) {
        throw ComputeError("every frame failed for " + std::string(to_string(curve.kind)) +
                           " at degree " + format_number(config.degrees[d], 2) + ": " +
                           result.failures.back().reason);
      }
      const auto ms = mean_std(values);
      curve.points.push_back({config.degrees[d], ms.mean, ms.std, static_cast<std::int64_t>(values.size())});
    }
    result.curves.push_back(std::move(curve));
  }
  result.occluder_ids.assign(ids.begin(), ids.end());
  return result;
}

double matrix_cell(const RobustnessCurve& curve, const std::vector<double>& degrees) {
  if (degrees.empty()) throw ValidationError("matrix cell needs at least one degree");
  double sum = 0.0;
  for (double d : degrees) sum += curve.at(d).mean_mm;
  return sum / static_cast<double>(degrees.size());
}

TrainTestMatrix run_matrix(const std::vector<const Predictor*>& predictors,
                           const EvalDataset& dataset, SweepConfig config) {
  if (predictors.empty()) throw ValidationError("matrix needs at least one predictor");
  config.degrees = matrix_degrees();
  TrainTestMatrix mx;
  mx.columns = config.kinds;
  mx.degrees = config.degrees;
  for (const Predictor* p : predictors) {
    auto sweep = run_degree_sweep(*p, dataset, config);
    std::vector<double> row;
    for (const auto& curve : sweep.curves) row.push_back(matrix_cell(curve, config.degrees));
    mx.rows.push_back(p->label());
    mx.cells.push_back(std::move(row));
    mx.sweeps.push_back(std::move(sweep));
  }
  return mx;
}

}  // namespace occbench
