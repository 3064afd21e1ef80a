#include "occbench/datamodel.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "occbench/error.hpp"
#include "occbench/random.hpp"

namespace occbench {

using nlohmann::json;

void Skeleton::validate() const {
  const int n = joint_count();
  if (n == 0) throw ValidationError("skeleton has no joints");
  if (root_index < 0 || root_index >= n) throw ValidationError("skeleton root_index out of range");
  auto valid = [n](int i) { return i >= 0 && i < n; };
  std::set<int> seen;
  for (const auto& [l, r] : left_right_pairs) {
    if (!valid(l) || !valid(r)) throw ValidationError("left/right pair index out of range");
    if (l == r) throw ValidationError("left/right pair joins a joint with itself");
    if (!seen.insert(l).second || !seen.insert(r).second) {
      throw ValidationError("joint appears in two left/right pairs");
    }
  }
  for (const auto& [a, b] : edges) {
    if (!valid(a) || !valid(b) || a == b) throw ValidationError("skeleton edge index invalid");
  }
}

std::vector<int> Skeleton::flip_permutation() const {
  std::vector<int> perm(joint_names.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (const auto& [l, r] : left_right_pairs) {
    perm[l] = r;
    perm[r] = l;
  }
  return perm;
}

Skeleton Skeleton::h36m17() {
  Skeleton s;
  s.joint_names = {"pelvis",  "r_hip",      "r_knee",  "r_ankle", "l_hip",      "l_knee",
                   "l_ankle", "spine",      "thorax",  "neck",    "head",       "l_shoulder",
                   "l_elbow", "l_wrist",    "r_shoulder", "r_elbow", "r_wrist"};
  s.root_index = 0;
  s.left_right_pairs = {{4, 1}, {5, 2}, {6, 3}, {11, 14}, {12, 15}, {13, 16}};
  s.edges = {{0, 1}, {1, 2},  {2, 3},   {0, 4},   {4, 5},   {5, 6},   {0, 7},   {7, 8},
             {8, 9}, {9, 10}, {8, 11}, {11, 12}, {12, 13}, {8, 14}, {14, 15}, {15, 16}};
  return s;
}

void Pose3D::validate(int expected_joints) const {
  if (joint_count() != expected_joints) {
    throw ValidationError("pose has " + std::to_string(joint_count()) + " joints, expected " +
                          std::to_string(expected_joints));
  }
  for (const auto& p : joints_mm) {
    if (!p.allFinite()) throw ValidationError("pose coordinate not finite");
  }
}

void SequenceManifest::validate() const {
  skeleton.validate();
  const int joints = skeleton.joint_count();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const std::string where = "frames[" + std::to_string(i) + "] (frame_id " +
                              std::to_string(f.frame_id) + ")";
    if (i > 0 && f.frame_id <= frames[i - 1].frame_id) {
      throw ValidationError(where + ": frame_id not strictly increasing");
    }
    try {
      f.camera.validate();
      f.bbox.validate();
      f.pose_gt.validate(joints);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!(f.root_depth_mm(skeleton.root_index) > 0.0)) {
      throw ValidationError(where + ": root joint depth must be positive");
    }
  }
}

std::filesystem::path SequenceManifest::image_file(const FrameRecord& frame) const {
  std::filesystem::path p(frame.image_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::optional<std::size_t> SequenceManifest::find(std::int64_t frame_id) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), frame_id,
                             [](const FrameRecord& f, std::int64_t id) { return f.frame_id < id; });
  if (it == frames.end() || it->frame_id != frame_id) return std::nullopt;
  return static_cast<std::size_t>(it - frames.begin());
}

// ---------------------------------------------------------------- manifest io

namespace {

// Reads `key` from `obj`, reporting the JSON path on failure.
template <typename T>
T field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(path + "." + key + ": missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(path + "." + key + ": " + e.what());
  }
}

Vec3 vec3_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(path + ": expected [x, y, z]");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw ValidationError(path + ": expected numbers");
    v[k] = j[k].get<double>();
  }
  return v;
}

std::vector<JointPair> pairs_from(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path + ": expected a list of index pairs");
  std::vector<JointPair> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != 2) {
      throw ValidationError(path + "[" + std::to_string(i) + "]: expected [a, b]");
    }
    out.emplace_back(j[i][0].get<int>(), j[i][1].get<int>());
  }
  return out;
}

json pairs_json(const std::vector<JointPair>& pairs) {
  json out = json::array();
  for (const auto& [a, b] : pairs) out.push_back({a, b});
  return out;
}

}  // namespace

SequenceManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }

  SequenceManifest m;
  m.base_dir = path.parent_path();
  if (doc.contains("units")) {
    const auto& u = doc["units"];
    if (u.value("length", "mm") != "mm" || u.value("pixels", "px") != "px") {
      throw ValidationError("units: only mm and px are supported");
    }
  }
  const json& sk = doc.contains("skeleton") ? doc["skeleton"] : throw ValidationError("skeleton: missing");
  m.skeleton.joint_names = field<std::vector<std::string>>(sk, "joint_names", "skeleton");
  m.skeleton.root_index = field<int>(sk, "root_index", "skeleton");
  m.skeleton.left_right_pairs = pairs_from(sk.value("left_right_pairs", json::array()),
                                           "skeleton.left_right_pairs");
  m.skeleton.edges = pairs_from(sk.value("edges", json::array()), "skeleton.edges");
  if (doc.contains("frame_rate") && !doc["frame_rate"].is_null()) {
    m.frame_rate = doc["frame_rate"].get<double>();
  }

  if (!doc.contains("frames") || !doc["frames"].is_array()) throw ValidationError("frames: missing");
  const auto& frames = doc["frames"];
  m.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string p = "frames[" + std::to_string(i) + "]";
    const auto& fj = frames[i];
    FrameRecord f;
    f.frame_id = field<std::int64_t>(fj, "frame_id", p);
    f.subject = fj.value("subject", "");
    f.action = fj.value("action", "");
    f.image_path = fj.value("image_path", "");
    const json& cam = fj.contains("camera") ? fj["camera"] : throw ValidationError(p + ".camera: missing");
    f.camera.fx = field<double>(cam, "fx", p + ".camera");
    f.camera.fy = field<double>(cam, "fy", p + ".camera");
    f.camera.cx = field<double>(cam, "cx", p + ".camera");
    f.camera.cy = field<double>(cam, "cy", p + ".camera");
    f.camera.width = field<int>(cam, "width", p + ".camera");
    f.camera.height = field<int>(cam, "height", p + ".camera");
    const auto bbox = field<std::vector<double>>(fj, "bbox", p);
    if (bbox.size() != 4) throw ValidationError(p + ".bbox: expected [x, y, w, h]");
    f.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
    if (!fj.contains("joints_mm") || !fj["joints_mm"].is_array()) {
      throw ValidationError(p + ".joints_mm: missing");
    }
    for (std::size_t k = 0; k < fj["joints_mm"].size(); ++k) {
      f.pose_gt.joints_mm.push_back(
          vec3_from(fj["joints_mm"][k], p + ".joints_mm[" + std::to_string(k) + "]"));
    }
    m.frames.push_back(std::move(f));
  }
  m.validate();
  return m;
}

void save_manifest(const SequenceManifest& m, const std::filesystem::path& path) {
  json doc;
  doc["units"] = {{"length", "mm"}, {"pixels", "px"}};
  doc["skeleton"] = {{"joint_names", m.skeleton.joint_names},
                     {"root_index", m.skeleton.root_index},
                     {"left_right_pairs", pairs_json(m.skeleton.left_right_pairs)},
                     {"edges", pairs_json(m.skeleton.edges)}};
  if (m.frame_rate) doc["frame_rate"] = *m.frame_rate;
  json frames = json::array();
  for (const auto& f : m.frames) {
    json joints = json::array();
    for (const auto& p : f.pose_gt.joints_mm) joints.push_back({p.x(), p.y(), p.z()});
    frames.push_back({{"frame_id", f.frame_id},
                      {"subject", f.subject},
                      {"action", f.action},
                      {"camera", f.camera},
                      {"bbox", {f.bbox.x, f.bbox.y, f.bbox.w, f.bbox.h}},
                      {"joints_mm", std::move(joints)},
                      {"image_path", f.image_path}});
  }
  doc["frames"] = std::move(frames);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

// ---------------------------------------------------------------- subsampling

std::vector<std::size_t> adaptive_subsample(const std::vector<Pose3D>& poses, double threshold_mm) {
  if (poses.empty()) throw ValidationError("cannot subsample an empty sequence");
  if (!(threshold_mm > 0.0)) throw ValidationError("subsampling threshold must be positive");
  std::vector<std::size_t> kept{0};
  const double threshold_sq = threshold_mm * threshold_mm;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const auto& last = poses[kept.back()].joints_mm;
    const auto& cur = poses[i].joints_mm;
    const std::size_t n = std::min(last.size(), cur.size());
    for (std::size_t j = 0; j < n; ++j) {
      if ((cur[j] - last[j]).squaredNorm() >= threshold_sq) {
        kept.push_back(i);
        break;
      }
    }
  }
  return kept;
}

std::vector<std::size_t> adaptive_subsample(const SequenceManifest& manifest, double threshold_mm) {
  std::vector<Pose3D> poses;
  poses.reserve(manifest.frames.size());
  for (const auto& f : manifest.frames) poses.push_back(f.pose_gt);
  return adaptive_subsample(poses, threshold_mm);
}

std::vector<std::size_t> stride_subsample(std::size_t frame_count, int stride) {
  if (stride < 1) throw ValidationError("stride must be at least 1");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frame_count; i += static_cast<std::size_t>(stride)) out.push_back(i);
  return out;
}

std::vector<std::size_t> stride_subsample(const SequenceManifest& manifest, int stride) {
  return stride_subsample(manifest.frames.size(), stride);
}

// ---------------------------------------------------------------- rendering

StickFigureStyle StickFigureStyle::for_image_size(int image_size) {
  StickFigureStyle s;
  s.bone_half_width_px = std::max(1.5, image_size / 96.0);
  s.joint_radius_px = std::max(2.5, image_size / 64.0);
  return s;
}

Rgb joint_color(int joint_index) {
  // Hue wheel stepped by the golden angle, full saturation.
  const double hue = std::fmod(joint_index * 137.50776405, 360.0) / 60.0;
  const double x = 1.0 - std::abs(std::fmod(hue, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(40 + 215 * v)); };
  return {q(r), q(g), q(b)};
}

namespace {

void fill_capsule(Image& image, const Vec2& a, const Vec2& b, double half_width, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - half_width)));
  const int x1 = std::min(image.width() - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + half_width)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - half_width)));
  const int y1 = std::min(image.height() - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + half_width)));
  const Vec2 ab = b - a;
  const double len_sq = ab.squaredNorm();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      double t = len_sq > 0 ? (p - a).dot(ab) / len_sq : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      if ((p - (a + t * ab)).squaredNorm() <= half_width * half_width) image.set(x, y, color);
    }
  }
}

void fill_disk(Image& image, const Vec2& c, double radius, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - radius)));
  const int x1 = std::min(image.width() - 1, static_cast<int>(std::ceil(c.x() + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - radius)));
  const int y1 = std::min(image.height() - 1, static_cast<int>(std::ceil(c.y() + radius)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if ((Vec2(x, y) - c).squaredNorm() <= radius * radius) image.set(x, y, color);
    }
  }
}

}  // namespace

void render_stick_figure(Image& image, const Skeleton& skeleton, std::span<const Vec2> joints_px,
                         std::span<const double> joint_depths, const StickFigureStyle& style) {
  for (const auto& [a, b] : skeleton.edges) {
    fill_capsule(image, joints_px[a], joints_px[b], style.bone_half_width_px, style.bone);
  }
  std::vector<int> order(joints_px.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return joint_depths[i] > joint_depths[j]; });
  for (int j : order) fill_disk(image, joints_px[j], style.joint_radius_px, joint_color(j));
}

// ---------------------------------------------------------------- synthesis

namespace {

const char* const kActions[] = {"Directions", "Discussion", "Eating",     "Greeting", "Phoning",
                                "Photo",      "Posing",     "Purchases",  "Sitting",  "SittingDown",
                                "Smoking",    "Waiting",    "Walking",    "WalkDog",  "WalkTogether"};

// Rest offset of each joint from its parent, camera-aligned body frame
// (x right, y down, z away from the camera), in mm.
Vec3 rest_offset(const std::string& name, const Vec3& fallback) {
  static const std::pair<const char*, Vec3> table[] = {
      {"r_hip", {-130, 0, 0}},      {"r_knee", {0, 450, 0}},      {"r_ankle", {0, 440, 0}},
      {"l_hip", {130, 0, 0}},       {"l_knee", {0, 450, 0}},      {"l_ankle", {0, 440, 0}},
      {"spine", {0, -230, 0}},      {"thorax", {0, -250, 0}},     {"neck", {0, -110, 0}},
      {"head", {0, -120, 0}},       {"l_shoulder", {160, 20, 0}}, {"l_elbow", {0, 280, 0}},
      {"l_wrist", {0, 250, 0}},     {"r_shoulder", {-160, 20, 0}}, {"r_elbow", {0, 280, 0}},
      {"r_wrist", {0, 250, 0}}};
  for (const auto& [n, v] : table) {
    if (name == n) return v;
  }
  return fallback;
}

// Maximum bend per axis (radians) for the local joint rotation.
Vec3 angle_limits(const std::string& name) {
  if (name.find("knee") != std::string::npos || name.find("elbow") != std::string::npos ||
      name.find("ankle") != std::string::npos || name.find("wrist") != std::string::npos) {
    return {1.0, 0.3, 0.6};
  }
  if (name.find("hip") != std::string::npos || name.find("shoulder") != std::string::npos) {
    return {0.2, 0.2, 0.2};
  }
  return {0.25, 0.25, 0.15};
}

Eigen::Matrix3d euler(const Vec3& a) {
  return (Eigen::AngleAxisd(a.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(a.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(a.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

struct Limb {
  int parent;
  int child;
  Vec3 offset;  // scaled rest offset
};

// Bones ordered so that every parent is placed before its children.
std::vector<Limb> kinematic_chain(const Skeleton& sk, Rng& rng) {
  const double body_scale = uniform(rng, 0.92, 1.08);
  std::vector<Limb> chain;
  std::vector<bool> placed(sk.joint_count(), false);
  placed[sk.root_index] = true;
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& [a, b] : sk.edges) {
      int parent = -1, child = -1;
      if (placed[a] && !placed[b]) parent = a, child = b;
      else if (placed[b] && !placed[a]) parent = b, child = a;
      if (parent < 0) continue;
      const Vec3 fallback(uniform(rng, -100, 100), uniform(rng, 100, 250), 0.0);
      chain.push_back({parent, child, body_scale * rest_offset(sk.joint_names[child], fallback)});
      placed[child] = true;
      progress = true;
    }
  }
  for (int j = 0; j < sk.joint_count(); ++j) {
    if (!placed[j]) {
      throw ValidationError("synthetic skeleton: joint " + sk.joint_names[j] +
                            " is not connected to the root");
    }
  }
  return chain;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config) {
  if (config.num_frames < 1) throw ValidationError("num_frames must be at least 1");
  if (config.image_size < 16) throw ValidationError("image_size must be at least 16 px");
  const Skeleton& sk = config.skeleton;
  sk.validate();

  Rng rng(derive_seed({config.seed, hash_string("synthetic-dataset")}));
  const auto chain = kinematic_chain(sk, rng);
  const int joints = sk.joint_count();
  const int size = config.image_size;

  CameraIntrinsics cam;
  cam.fx = 1.55 * size * uniform(rng, 0.97, 1.03);
  cam.fy = cam.fx * uniform(rng, 0.99, 1.01);
  cam.cx = 0.5 * size + uniform(rng, -0.02, 0.02) * size;
  cam.cy = 0.5 * size + uniform(rng, -0.02, 0.02) * size;
  cam.width = size;
  cam.height = size;
  const StickFigureStyle style = StickFigureStyle::for_image_size(size);

  // Smoothly evolving state: per-joint local angles, body yaw, root position.
  std::vector<Vec3> angles(joints, Vec3::Zero());
  double yaw = uniform(rng, -0.6, 0.6);
  Vec3 root(uniform(rng, -250, 250), uniform(rng, -150, -50), uniform(rng, 4800, 5400));

  SyntheticDataset out;
  out.manifest.skeleton = sk;
  out.manifest.frame_rate = 50.0;
  const int n_actions = static_cast<int>(std::size(kActions));

  for (int i = 0; i < config.num_frames; ++i) {
    for (int j = 0; j < joints; ++j) {
      const Vec3 lim = angle_limits(sk.joint_names[j]);
      for (int a = 0; a < 3; ++a) {
        angles[j][a] = std::clamp(0.97 * angles[j][a] + 0.08 * lim[a] * standard_normal(rng) * 2.0,
                                  -lim[a], lim[a]);
      }
    }
    yaw = std::clamp(yaw + 0.03 * standard_normal(rng), -0.9, 0.9);
    root.x() = std::clamp(root.x() + 6.0 * standard_normal(rng), -300.0, 300.0);
    root.z() = std::clamp(root.z() + 10.0 * standard_normal(rng), 4700.0, 5500.0);

    std::vector<Eigen::Matrix3d> global_rot(joints, Eigen::Matrix3d::Identity());
    std::vector<Vec3> pos(joints, Vec3::Zero());
    global_rot[sk.root_index] = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix() *
                                euler(angles[sk.root_index]);
    pos[sk.root_index] = root;
    for (const auto& limb : chain) {
      global_rot[limb.child] = global_rot[limb.parent] * euler(angles[limb.child]);
      pos[limb.child] = pos[limb.parent] + global_rot[limb.child] * limb.offset;
    }

    FrameRecord f;
    f.frame_id = i;
    f.subject = "S" + std::to_string(1 + config.seed % 11);
    f.action = kActions[static_cast<long>(i) * n_actions / config.num_frames];
    f.camera = cam;
    f.pose_gt.joints_mm = pos;

    std::vector<Vec2> px(joints);
    std::vector<double> depth(joints);
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (int j = 0; j < joints; ++j) {
      px[j] = project(cam, pos[j]);
      depth[j] = pos[j].z();
      x0 = std::min(x0, px[j].x());
      y0 = std::min(y0, px[j].y());
      x1 = std::max(x1, px[j].x());
      y1 = std::max(y1, px[j].y());
    }
    const double margin = style.joint_radius_px + 2.0;
    f.bbox = {x0 - margin, y0 - margin, (x1 - x0) + 2 * margin, (y1 - y0) + 2 * margin};
    if (f.bbox.x < 0 || f.bbox.y < 0 || f.bbox.x + f.bbox.w > size || f.bbox.y + f.bbox.h > size) {
      throw ComputeError("image_size " + std::to_string(size) +
                         " px is too small to contain the figure of frame " + std::to_string(i));
    }

    char name[32];
    std::snprintf(name, sizeof name, "frames/%06d.png", i);
    f.image_path = name;

    Image img(size, size, style.background);
    render_stick_figure(img, sk, px, depth, style);
    out.images.push_back(std::move(img));
    out.manifest.frames.push_back(std::move(f));
  }
  out.manifest.validate();
  return out;
}

void SyntheticDataset::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir / "frames", ec);
  if (ec) throw IoError("cannot create " + (dir / "frames").string() + ": " + ec.message());
  for (std::size_t i = 0; i < images.size(); ++i) {
    write_png(images[i], dir / manifest.frames[i].image_path);
  }
  save_manifest(manifest, dir / "manifest.json");
}

}  // namespace occbench
