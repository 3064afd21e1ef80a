// occbench command-line front end.
//
// Exit status: 0 success, 2 invalid usage or input, 3 computation failure,
// 4 file-system or format error.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "occbench/augment.hpp"
#include "occbench/datamodel.hpp"
#include "occbench/error.hpp"
#include "occbench/heatmap.hpp"
#include "occbench/metrics.hpp"
#include "occbench/occlusion.hpp"
#include "occbench/predictors.hpp"
#include "occbench/random.hpp"
#include "occbench/report.hpp"
#include "occbench/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace occbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitCompute = 3;
constexpr int kExitIo = 4;

constexpr const char* kOutEnv = "OCCBENCH_OUT";

// Flag values override the --config file, which overrides defaults.
class Settings {
 public:
  void load(const std::optional<std::string>& path) {
    if (!path) return;
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config " + *path);
    try {
      doc_ = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("config " + *path + ": " + e.what());
    }
    if (!doc_.is_object()) throw ValidationError("config " + *path + ": top level must be an object");
    base_ = fs::path(*path).parent_path();
  }

  template <typename T>
  T get(const std::optional<T>& flag, const char* key, T fallback) const {
    if (flag) return *flag;
    if (doc_.contains(key)) {
      try {
        return doc_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
      }
    }
    return fallback;
  }

  template <typename T>
  std::optional<T> get(const std::optional<T>& flag, const char* key) const {
    if (flag) return flag;
    if (doc_.contains(key)) return get<T>(flag, key, T{});
    return std::nullopt;
  }

  // Path fields in the config resolve against the config's directory.
  std::optional<fs::path> path(const std::optional<std::string>& flag, const char* key) const {
    if (flag) return fs::path(*flag);
    if (doc_.contains(key)) {
      fs::path p = get<std::string>(std::nullopt, key, "");
      return p.is_relative() ? base_ / p : p;
    }
    return std::nullopt;
  }

  const json& doc() const { return doc_; }

 private:
  json doc_ = json::object();
  fs::path base_;
};

fs::path output_dir(const Settings& s, const std::optional<std::string>& flag, const char* command) {
  if (auto p = s.path(flag, "out")) return *p;
  if (const char* env = std::getenv(kOutEnv); env && *env) return fs::path(env) / command;
  throw ValidationError("--out is required (or set " + std::string(kOutEnv) + ")");
}

std::uint64_t require_seed(const Settings& s, const std::optional<std::uint64_t>& flag) {
  auto seed = s.get(flag, "seed");
  if (!seed) throw ValidationError("--seed is required");
  return *seed;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<OcclusionKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<OcclusionKind> kinds;
  for (const auto& n : names) kinds.push_back(parse_occlusion_kind(n));
  if (kinds.empty()) throw ValidationError("at least one occlusion kind is required");
  return kinds;
}

std::vector<std::string> kind_names(const std::vector<OcclusionKind>& kinds) {
  std::vector<std::string> out;
  for (auto k : kinds) out.emplace_back(to_string(k));
  return out;
}

std::optional<ObjectLibrary> load_library(const std::optional<fs::path>& dir) {
  if (!dir) return std::nullopt;
  return ObjectLibrary::load(*dir);
}

void require_library(const std::vector<OcclusionKind>& kinds, const std::optional<ObjectLibrary>& lib) {
  for (auto k : kinds) {
    if (needs_library(k) && !lib) {
      throw ValidationError("occlusion kind '" + std::string(to_string(k)) + "' requires --library");
    }
  }
}

BoundingBox parse_bbox(const std::string& text) {
  BoundingBox b;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream in(text);
  if (!(in >> b.x >> c1 >> b.y >> c2 >> b.w >> c3 >> b.h) || c1 != ',' || c2 != ',' || c3 != ',') {
    throw ValidationError("bbox must be x,y,w,h, got '" + text + "'");
  }
  b.validate();
  return b;
}

// ---- predictor selection ---------------------------------------------------

struct PredictorOptions {
  std::optional<std::string> kind;
  std::optional<std::string> label;
  std::optional<double> sigma_mm;
  std::optional<double> base_mm;
  std::optional<double> sensitivity_mm;
  std::optional<std::string> train_manifest;
};

void add_predictor_flags(CLI::App* cmd, PredictorOptions& o) {
  cmd->add_option("--predictor", o.kind,
                  "oracle | noisy_oracle | occlusion_mock | heatmap_oracle | nn_baseline");
  cmd->add_option("--label", o.label, "Predictor label in reports");
  cmd->add_option("--sigma-mm", o.sigma_mm, "noisy_oracle noise per coordinate");
  cmd->add_option("--base-mm", o.base_mm, "occlusion_mock error without occlusion");
  cmd->add_option("--sensitivity-mm", o.sensitivity_mm, "occlusion_mock error per occluded neighborhood");
  cmd->add_option("--train-manifest", o.train_manifest, "nn_baseline training manifest");
}

void check_predictor_spec(const ReferencePredictorSpec& s) {
  if (!(s.sigma_mm >= 0.0)) throw ValidationError("sigma_mm must be >= 0");
  if (!(s.sensitivity_mm >= 0.0)) throw ValidationError("sensitivity_mm must be >= 0");
  if (!(s.base_mm >= 0.0)) throw ValidationError("base_mm must be >= 0");
}

ReferencePredictorSpec predictor_spec(const json& j, std::uint64_t seed) try {
  ReferencePredictorSpec s;
  s.kind = parse_reference_kind(j.value("kind", std::string("oracle")));
  s.label = j.value("label", j.value("kind", std::string("oracle")));
  s.seed = derive_seed({seed, hash_string("predictor"), hash_string(s.label)});
  s.sigma_mm = j.value("sigma_mm", s.sigma_mm);
  s.base_mm = j.value("base_mm", s.base_mm);
  s.sensitivity_mm = j.value("sensitivity_mm", s.sensitivity_mm);
  check_predictor_spec(s);
  return s;
} catch (const json::exception& e) {
  throw ValidationError(std::string("predictor ") + j.dump() + ": " + e.what());
}

json predictor_json(const Settings& s, const PredictorOptions& o) {
  json j = s.doc().contains("predictor") ? s.doc().at("predictor") : json::object();
  if (j.is_string()) j = {{"kind", j}};
  if (!j.is_object()) throw ValidationError("config field 'predictor' must be a kind name or an object");
  // Top-level config keys named like the flags apply too.
  for (const char* key : {"label", "sigma_mm", "base_mm", "sensitivity_mm"}) {
    if (!j.contains(key) && s.doc().contains(key)) j[key] = s.doc().at(key);
  }
  if (o.kind) j["kind"] = *o.kind;
  if (o.label) j["label"] = *o.label;
  if (o.sigma_mm) j["sigma_mm"] = *o.sigma_mm;
  if (o.base_mm) j["base_mm"] = *o.base_mm;
  if (o.sensitivity_mm) j["sensitivity_mm"] = *o.sensitivity_mm;
  if (!j.contains("train_manifest")) {
    if (const auto train = s.path(o.train_manifest, "train_manifest")) j["train_manifest"] = train->string();
  } else if (o.train_manifest) {
    j["train_manifest"] = *o.train_manifest;
  }
  return j;
}

struct PredictorBundle {
  std::vector<std::unique_ptr<Predictor>> owned;
  std::vector<std::unique_ptr<EvalDataset>> training;  // kept alive for nn_baseline
};

const Predictor& build_predictor(PredictorBundle& bundle, const json& j, std::uint64_t seed,
                                 const SweepConfig& sweep) {
  auto spec = predictor_spec(j, seed);
  spec.crop_size = sweep.crop_size;
  spec.coverage = sweep.coverage;
  if (spec.kind == ReferenceKind::nn_baseline) {
    if (!j.contains("train_manifest")) throw ValidationError("nn_baseline requires a training manifest");
    bundle.training.push_back(
        std::make_unique<EvalDataset>(EvalDataset::load(j.at("train_manifest").get<std::string>())));
    spec.training = bundle.training.back()->training_set();
  }
  bundle.owned.push_back(make_reference_predictor(spec));
  return *bundle.owned.back();
}

// ---- sweep options shared by sweep and matrix --------------------------------

struct SweepOptions {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<std::string> library;
  std::optional<std::vector<std::string>> kinds;
  std::optional<std::vector<double>> degrees;
  std::optional<double> degree_step;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> split;
  std::optional<int> threads;
  std::optional<bool> exclude_root;
  std::optional<std::string> format;
  std::optional<std::string> out;
};

void add_sweep_flags(CLI::App* cmd, SweepOptions& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--manifest", o.manifest, "Evaluation manifest");
  cmd->add_option("--library", o.library, "Object library directory");
  cmd->add_option("--kinds", o.kinds, "Occlusion kinds")->delimiter(',');
  cmd->add_option("--degrees", o.degrees, "Occlusion degrees")->delimiter(',');
  cmd->add_option("--degree-step", o.degree_step, "Degree grid step up to 0.7");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--split", o.split, "Object library split (train|test)");
  cmd->add_option("--threads", o.threads, "Worker threads, 0 = all cores");
  cmd->add_flag("--exclude-root", o.exclude_root, "Average MPJPE over non-root joints only");
  cmd->add_option("--format", o.format, "Report format (csv|json)");
  cmd->add_option("--out", o.out, "Output directory");
}

struct SweepSetup {
  Settings settings;
  SweepConfig config;
  std::optional<ObjectLibrary> library;
  std::unique_ptr<EvalDataset> dataset;
  ReportFormat format = ReportFormat::csv;
  fs::path out;
  json run;  // resolved configuration, hashed into the metadata
};

std::unique_ptr<SweepSetup> prepare_sweep(const SweepOptions& o, const char* command) {
  auto setup = std::make_unique<SweepSetup>();
  auto& s = setup->settings;
  s.load(o.config);
  auto& cfg = setup->config;
  cfg.seed = require_seed(s, o.seed);
  if (auto k = s.get(o.kinds, "kinds")) cfg.kinds = parse_kinds(*k);
  if (auto step = s.get(o.degree_step, "degree_step")) cfg.degrees = degree_grid(*step);
  if (auto d = s.get(o.degrees, "degrees")) cfg.degrees = *d;
  cfg.split = parse_split(s.get(o.split, "split", std::string("test")));
  cfg.threads = s.get(o.threads, "threads", 0);
  cfg.include_root = !s.get(o.exclude_root, "exclude_root", false);
  setup->format = parse_report_format(s.get(o.format, "format", std::string("csv")));

  const auto manifest = s.path(o.manifest, "manifest");
  if (!manifest) throw ValidationError("--manifest is required");
  setup->library = load_library(s.path(o.library, "library"));
  require_library(cfg.kinds, setup->library);
  cfg.library = setup->library ? &*setup->library : nullptr;
  setup->out = output_dir(s, o.out, command);
  setup->dataset = std::make_unique<EvalDataset>(EvalDataset::load(*manifest));

  setup->run = {{"command", command},
                {"manifest", manifest->string()},
                {"seed", cfg.seed},
                {"kinds", kind_names(cfg.kinds)},
                {"degrees", cfg.degrees},
                {"split", std::string(to_string(cfg.split))},
                {"include_root", cfg.include_root},
                {"crop_size", cfg.crop_size},
                {"frames", setup->dataset->manifest.frames.size()}};
  return setup;
}

json metadata(const json& run) {
  return {{"config", run}, {"config_hash", config_hash(run)}, {"created_utc", utc_timestamp()}};
}

// ---- commands ----------------------------------------------------------------

struct SynthDataOptions {
  std::optional<std::string> config;
  std::optional<int> frames;
  std::optional<std::uint64_t> seed;
  std::optional<int> image_size;
  std::optional<std::string> out;
};

int run_synth_data(const SynthDataOptions& o) {
  Settings s;
  s.load(o.config);
  SyntheticConfig cfg;
  cfg.num_frames = s.get(o.frames, "frames", 100);
  cfg.image_size = s.get(o.image_size, "image_size", 256);
  if (cfg.num_frames < 1) throw ValidationError("--frames must be >= 1");
  if (cfg.image_size < 64) throw ValidationError("--image-size must be >= 64");
  cfg.seed = require_seed(s, o.seed);
  const auto out = output_dir(s, o.out, "synth-data");
  generate_synthetic_dataset(cfg).write(out);
  std::cout << "wrote " << cfg.num_frames << " frames to " << out.string() << '\n';
  return kExitOk;
}

struct SynthLibraryOptions {
  std::optional<std::string> config;
  std::optional<int> train;
  std::optional<int> test;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int run_synth_library(const SynthLibraryOptions& o) {
  Settings s;
  s.load(o.config);
  const int train = s.get(o.train, "train", 16);
  const int test = s.get(o.test, "test", 8);
  if (train < 0 || test < 0 || train + test == 0) throw ValidationError("library needs at least one entry");
  const auto seed = require_seed(s, o.seed);
  const auto out = output_dir(s, o.out, "synth-library");
  ObjectLibrary::synthetic(train, test, seed).save(out);
  std::cout << "wrote " << train + test << " objects to " << out.string() << '\n';
  return kExitOk;
}

struct OccludeOptions {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<std::string> kind;
  std::optional<double> degree;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> library;
  std::optional<std::string> split;
  std::optional<std::string> out;
};

// Occludes every frame inside its bbox and writes a new dataset alongside
// per-frame degree measurements.
int run_occlude(const OccludeOptions& o) {
  Settings s;
  s.load(o.config);
  const auto kind_name = s.get(o.kind, "kind");
  if (!kind_name) throw ValidationError("--kind is required");
  const auto degree = s.get(o.degree, "degree");
  if (!degree) throw ValidationError("--degree is required");
  OcclusionSpec spec{parse_occlusion_kind(*kind_name), *degree, require_seed(s, o.seed)};
  spec.validate();
  const auto library = load_library(s.path(o.library, "library"));
  require_library({spec.kind}, library);
  const auto split = parse_split(s.get(o.split, "split", std::string("test")));
  const auto manifest_path = s.path(o.manifest, "manifest");
  if (!manifest_path) throw ValidationError("--manifest is required");
  const auto out = output_dir(s, o.out, "occlude");

  const auto dataset = EvalDataset::load(*manifest_path);
  SequenceManifest occluded = dataset.manifest;
  occluded.base_dir = out;
  ensure_dir(out / "frames");
  std::ofstream log(out / "measurements.jsonl");
  if (!log) throw IoError("cannot write " + (out / "measurements.jsonl").string());

  for (std::size_t i = 0; i < occluded.frames.size(); ++i) {
    auto& frame = occluded.frames[i];
    const auto& image = dataset.images[i];
    OcclusionSpec cell = spec;
    cell.seed = occlusion_seed(spec.seed, frame.frame_id, spec.kind, spec.target_degree);
    const auto masks = generate(cell, frame.bbox, {image.width(), image.height()},
                                library ? &*library : nullptr, split);
    const auto measured = measure_degree(masks, frame.bbox);
    char name[32];
    std::snprintf(name, sizeof name, "frames/%06lld.png", static_cast<long long>(frame.frame_id));
    write_png(composite(image, masks, library ? &*library : nullptr), out / name);
    frame.image_path = name;
    json line = {{"frame_id", frame.frame_id},
                 {"kind", std::string(to_string(masks.kind))},
                 {"target_degree", spec.target_degree},
                 {"occluded_fraction", measured.occluded_fraction},
                 {"occluded_pixels", measured.occluded_pixel_count},
                 {"bbox_pixels", measured.bbox_pixel_count},
                 {"occluders", masks.source_ids()}};
    log << line.dump() << '\n';
  }
  save_manifest(occluded, out / "manifest.json");
  std::cout << "occluded " << occluded.frames.size() << " frames into " << out.string() << '\n';
  return kExitOk;
}

struct EvalOptions {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<std::string> poses;
  std::optional<std::string> heatmaps;
  std::optional<std::string> root_depth_source;
  std::optional<bool> exclude_root;
  std::optional<std::string> out;
};

// Poses JSONL: one {"frame_id": n, "joints_mm": [[x,y,z], ...]} per line.
std::map<std::int64_t, Pose3D> read_poses_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::int64_t, Pose3D> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      Pose3D p;
      for (const auto& v : j.at("joints_mm")) {
        p.joints_mm.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
      }
      poses[j.at("frame_id").get<std::int64_t>()] = std::move(p);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return poses;
}

int run_eval(const EvalOptions& o) {
  Settings s;
  s.load(o.config);
  const auto manifest_path = s.path(o.manifest, "manifest");
  if (!manifest_path) throw ValidationError("--manifest is required");
  const auto poses_path = s.path(o.poses, "poses");
  const auto heatmap_dir = s.path(o.heatmaps, "heatmaps");
  if (poses_path.has_value() == heatmap_dir.has_value()) {
    throw ValidationError("exactly one of --poses or --heatmaps is required");
  }
  if (s.get(o.root_depth_source, "root_depth_source", std::string("gt")) != "gt") {
    throw ValidationError("--root-depth-source supports only 'gt'");
  }
  const bool include_root = !s.get(o.exclude_root, "exclude_root", false);
  const auto out = output_dir(s, o.out, "eval");
  const auto manifest = load_manifest(*manifest_path);
  const int root = manifest.skeleton.root_index;
  const int joints = manifest.skeleton.joint_count();

  std::map<std::int64_t, Pose3D> poses;
  if (poses_path) poses = read_poses_jsonl(*poses_path);

  std::vector<ErrorRecord> records;
  for (const auto& f : manifest.frames) {
    Pose3D pred;
    if (poses_path) {
      const auto it = poses.find(f.frame_id);
      if (it == poses.end()) throw ValidationError("no prediction for frame_id " + std::to_string(f.frame_id));
      pred = it->second;
    } else {
      char name[32];
      std::snprintf(name, sizeof name, "%06lld.vhm", static_cast<long long>(f.frame_id));
      const auto file = *heatmap_dir / name;
      if (!fs::exists(file)) throw ValidationError("no heatmap for frame_id " + std::to_string(f.frame_id));
      const auto hm = read_heatmap(file);
      const auto t = make_crop_transform(f.camera, f.bbox, hm.crop_size);
      pred = decode_pose(hm, t, f.camera, f.root_depth_mm(root), root);
    }
    pred.validate(joints);
    records.push_back(make_error_record(f.frame_id, f.action, "none", 0.0, pred, f.pose_gt, root, include_root));
  }
  if (poses_path && poses.size() != manifest.frames.size()) {
    for (const auto& [id, _] : poses) {
      if (!manifest.find(id)) throw ValidationError("prediction for unknown frame_id " + std::to_string(id));
    }
  }
  ensure_dir(out);
  write_records_jsonl(records, out / "records.jsonl");
  write_aggregate_csv(aggregate(records, {GroupKey::action}), out / "per_action.csv");
  write_aggregate_csv(aggregate(records, {}), out / "overall.csv");
  std::cout << "MPJPE " << format_number(aggregate(records, {}).front().mean_mm, 3) << " mm over "
            << records.size() << " frames\n";
  return kExitOk;
}

struct SweepCommandOptions {
  SweepOptions sweep;
  PredictorOptions predictor;
};

int run_sweep(const SweepCommandOptions& o) {
  auto setup = prepare_sweep(o.sweep, "sweep");
  const json pj = predictor_json(setup->settings, o.predictor);
  PredictorBundle bundle;
  const auto& predictor = build_predictor(bundle, pj, setup->config.seed, setup->config);
  setup->run["predictor"] = pj;
  const auto result = run_degree_sweep(predictor, *setup->dataset, setup->config);
  write_sweep_outputs(result, setup->out, metadata(setup->run));
  if (setup->format == ReportFormat::json) write_curves(result.curves, setup->out / "curves.json", ReportFormat::json);
  write_aggregate_csv(aggregate(result.records, {GroupKey::occlusion_kind, GroupKey::action}),
                      setup->out / "per_action.csv");
  if (!result.failures.empty()) {
    std::cerr << "warning: " << result.failures.size() << " frame evaluations failed and were excluded\n";
  }
  std::cout << "sweep of " << predictor.label() << " written to " << setup->out.string() << '\n';
  return kExitOk;
}

struct MatrixCommandOptions {
  SweepOptions sweep;
  std::optional<std::vector<std::string>> predictors;
};

// Predictors come from the config's "predictors" array or from --predictors
// given as kind[:label] entries with default parameters.
int run_matrix_command(const MatrixCommandOptions& o) {
  auto setup = prepare_sweep(o.sweep, "matrix");
  json list = json::array();
  if (o.predictors) {
    for (const auto& p : *o.predictors) {
      const auto colon = p.find(':');
      json j = {{"kind", p.substr(0, colon)}};
      if (colon != std::string::npos) j["label"] = p.substr(colon + 1);
      list.push_back(j);
    }
  } else if (setup->settings.doc().contains("predictors")) {
    list = setup->settings.doc().at("predictors");
  }
  if (!list.is_array() || list.empty()) throw ValidationError("matrix needs at least one predictor");

  PredictorBundle bundle;
  std::vector<const Predictor*> predictors;
  for (const auto& j : list) predictors.push_back(&build_predictor(bundle, j, setup->config.seed, setup->config));
  setup->run["predictors"] = list;
  setup->run["degrees"] = matrix_degrees();

  const auto mx = run_matrix(predictors, *setup->dataset, setup->config);
  ensure_dir(setup->out);
  write_matrix(mx, setup->out / (setup->format == ReportFormat::json ? "matrix.json" : "matrix.csv"),
               setup->format);
  for (std::size_t r = 0; r < mx.sweeps.size(); ++r) {
    write_sweep_outputs(mx.sweeps[r], setup->out / mx.rows[r], metadata(setup->run));
  }
  write_json(metadata(setup->run), setup->out / "metadata.json");
  std::cout << "matrix " << mx.rows.size() << "x" << mx.columns.size() << " written to "
            << setup->out.string() << '\n';
  return kExitOk;
}

struct CalibrateOptions {
  std::optional<std::string> config;
  std::optional<std::vector<std::string>> kinds;
  std::optional<std::vector<double>> degrees;
  std::optional<int> samples;
  std::optional<std::string> bbox;
  std::optional<int> image_size;
  std::optional<std::string> library;
  std::optional<std::string> split;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int run_calibrate(const CalibrateOptions& o) {
  Settings s;
  s.load(o.config);
  const auto kinds = parse_kinds(s.get(o.kinds, "kinds", kind_names({kOccluderFamilies.begin(), kOccluderFamilies.end()})));
  const auto degrees = s.get(o.degrees, "degrees", std::vector<double>{0.3});
  const int samples = s.get(o.samples, "samples", 200);
  const int size = s.get(o.image_size, "image_size", 256);
  const auto bbox = parse_bbox(s.get(o.bbox, "bbox", std::string("64,32,128,192")));
  const auto library = load_library(s.path(o.library, "library"));
  require_library(kinds, library);
  const auto split = parse_split(s.get(o.split, "split", std::string("test")));
  const auto seed = require_seed(s, o.seed);
  const auto out = output_dir(s, o.out, "calibrate");

  Rng rng(derive_seed({seed, hash_string("calibrate")}));
  const auto report = calibrate_distributions(kinds, degrees, bbox, {size, size}, samples,
                                              library ? &*library : nullptr, split, rng);
  ensure_dir(out);
  write_calibration(report, out / "calibration.csv");
  const json run = {{"command", "calibrate"}, {"kinds", kind_names(kinds)}, {"degrees", degrees},
                    {"samples", samples},     {"image_size", size},        {"seed", seed},
                    {"bbox", {bbox.x, bbox.y, bbox.w, bbox.h}}};
  write_json(metadata(run), out / "metadata.json");
  double worst = 0.0;
  for (const auto& c : report.cells) worst = std::max(worst, c.relative_deviation);
  std::cout << "max deviation from cross-kind mean: " << format_number(100.0 * worst, 2) << "%\n";
  if (report.any_flagged()) std::cerr << "warning: some cells deviate more than 10% from the cross-kind mean\n";
  return kExitOk;
}

struct CompareOptions {
  std::optional<std::string> config;
  std::optional<std::string> table;
  std::optional<std::string> baseline;
  std::optional<std::string> candidate;
  std::optional<std::string> format;
  std::optional<std::string> out;
};

// Improvement of one labeled result row over another, per column.
int run_compare(const CompareOptions& o) {
  Settings s;
  s.load(o.config);
  const auto table = s.path(o.table, "table");
  if (!table) throw ValidationError("--table is required");
  const auto baseline = s.get(o.baseline, "baseline", std::string());
  const auto candidate = s.get(o.candidate, "candidate", std::string());
  if (baseline.empty() || candidate.empty()) throw ValidationError("--baseline and --candidate are required");
  const auto format = parse_report_format(s.get(o.format, "format", std::string("csv")));
  const auto out = output_dir(s, o.out, "compare");

  const auto sets = read_result_sets_csv(*table);
  const auto cmp = compare(find_result_set(sets, baseline), find_result_set(sets, candidate));
  ensure_dir(out);
  write_comparison(cmp, out / (format == ReportFormat::json ? "comparison.json" : "comparison.csv"), format);
  const auto& last = cmp.rows.back();
  std::cout << last.column << ": " << format_number(last.baseline, 1) << " -> " << format_number(last.candidate, 1)
            << " mm, improvement " << format_number(last.improvement_mm, 1) << " mm ("
            << format_number(last.improvement_pct, 2) << "%)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occlusion robustness benchmark for 3D human pose estimation"};
  app.require_subcommand(1);

  SynthDataOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate a synthetic stick-figure dataset");
  synth_cmd->add_option("--config", synth.config, "JSON configuration");
  synth_cmd->add_option("--frames", synth.frames, "Number of frames");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--image-size", synth.image_size, "Square image side in pixels");
  synth_cmd->add_option("--out", synth.out, "Output directory");

  SynthLibraryOptions lib;
  auto* lib_cmd = app.add_subcommand("synth-library", "Generate a synthetic occluder object library");
  lib_cmd->add_option("--config", lib.config, "JSON configuration");
  lib_cmd->add_option("--train", lib.train, "Train split entries (default 16)");
  lib_cmd->add_option("--test", lib.test, "Test split entries (default 8)");
  lib_cmd->add_option("--seed", lib.seed, "Random seed");
  lib_cmd->add_option("--out", lib.out, "Output directory");

  OccludeOptions occ;
  auto* occ_cmd = app.add_subcommand("occlude", "Occlude every frame of a dataset");
  occ_cmd->add_option("--config", occ.config, "JSON configuration");
  occ_cmd->add_option("--manifest", occ.manifest, "Input manifest");
  occ_cmd->add_option("--kind", occ.kind, "Occlusion kind");
  occ_cmd->add_option("--degree", occ.degree, "Fraction of bbox pixels to occlude, 0..0.7");
  occ_cmd->add_option("--seed", occ.seed, "Random seed");
  occ_cmd->add_option("--library", occ.library, "Object library directory");
  occ_cmd->add_option("--split", occ.split, "Object library split (train|test)");
  occ_cmd->add_option("--out", occ.out, "Output directory");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--config", ev.config, "JSON configuration");
  eval_cmd->add_option("--manifest", ev.manifest, "Ground-truth manifest");
  eval_cmd->add_option("--poses", ev.poses, "Predicted poses, JSONL");
  eval_cmd->add_option("--heatmaps", ev.heatmaps, "Directory of <frame_id>.vhm heatmaps");
  eval_cmd->add_option("--root-depth-source", ev.root_depth_source, "Root depth for heatmap decoding (gt)");
  eval_cmd->add_flag("--exclude-root", ev.exclude_root, "Average MPJPE over non-root joints only");
  eval_cmd->add_option("--out", ev.out, "Output directory");

  SweepCommandOptions sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Robustness curves over occlusion kinds and degrees");
  add_sweep_flags(sweep_cmd, sw.sweep);
  add_predictor_flags(sweep_cmd, sw.predictor);

  MatrixCommandOptions mx;
  auto* matrix_cmd = app.add_subcommand("matrix", "Predictor x occlusion kind matrix over degrees 10-50%");
  add_sweep_flags(matrix_cmd, mx.sweep);
  matrix_cmd->add_option("--predictors", mx.predictors, "kind[:label] entries")->delimiter(',');

  CalibrateOptions cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Compare occluded-pixel distributions across kinds");
  cal_cmd->add_option("--config", cal.config, "JSON configuration");
  cal_cmd->add_option("--kinds", cal.kinds, "Occlusion kinds")->delimiter(',');
  cal_cmd->add_option("--degrees", cal.degrees, "Degrees")->delimiter(',');
  cal_cmd->add_option("--samples", cal.samples, "Samples per cell (>= 30)");
  cal_cmd->add_option("--bbox", cal.bbox, "x,y,w,h");
  cal_cmd->add_option("--image-size", cal.image_size, "Square image side");
  cal_cmd->add_option("--library", cal.library, "Object library directory");
  cal_cmd->add_option("--split", cal.split, "Object library split (train|test)");
  cal_cmd->add_option("--seed", cal.seed, "Random seed");
  cal_cmd->add_option("--out", cal.out, "Output directory");

  CompareOptions cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Per-column improvement between two rows of a result table");
  cmp_cmd->add_option("--config", cmp.config, "JSON configuration");
  cmp_cmd->add_option("--table", cmp.table, "Result table CSV (label,<column>,...)");
  cmp_cmd->add_option("--baseline", cmp.baseline, "Baseline row label");
  cmp_cmd->add_option("--candidate", cmp.candidate, "Candidate row label");
  cmp_cmd->add_option("--format", cmp.format, "Report format (csv|json)");
  cmp_cmd->add_option("--out", cmp.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*synth_cmd) return run_synth_data(synth);
    if (*lib_cmd) return run_synth_library(lib);
    if (*occ_cmd) return run_occlude(occ);
    if (*eval_cmd) return run_eval(ev);
    if (*sweep_cmd) return run_sweep(sw);
    if (*matrix_cmd) return run_matrix_command(mx);
    if (*cal_cmd) return run_calibrate(cal);
    if (*cmp_cmd) return run_compare(cmp);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCompute;
  }
  return kExitValidation;
}
