#include "occbench/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "occbench/error.hpp"

namespace occbench {

VolumetricHeatmap VolumetricHeatmap::zeros(int joints, int depth, int height, int width,
                                           int crop_size, double depth_span_mm) {
  if (joints < 1 || depth < 1 || height < 1 || width < 1) {
    throw ValidationError("heatmap dimensions must be positive");
  }
  VolumetricHeatmap hm;
  hm.joints = joints;
  hm.depth = depth;
  hm.height = height;
  hm.width = width;
  hm.crop_size = crop_size;
  hm.depth_span_mm = depth_span_mm;
  hm.scores.assign(static_cast<std::size_t>(joints) * hm.voxels_per_joint(), 0.0);
  return hm;
}

void VolumetricHeatmap::validate() const {
  if (joints < 1 || depth < 1 || height < 1 || width < 1) {
    throw ValidationError("heatmap dimensions must be positive");
  }
  if (crop_size < 1 || !(depth_span_mm > 0.0)) {
    throw ValidationError("heatmap crop_size and depth_span_mm must be positive");
  }
  if (scores.size() != static_cast<std::size_t>(joints) * voxels_per_joint()) {
    throw ValidationError("heatmap score count does not match its dimensions");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("heatmap contains a non-finite score");
  }
}

VolumetricHeatmap heatmap_from_channels(std::span<const float> channels, int joints, int depth,
                                        int height, int width, int crop_size,
                                        double depth_span_mm) {
  auto hm = VolumetricHeatmap::zeros(joints, depth, height, width, crop_size, depth_span_mm);
  if (channels.size() != hm.scores.size()) {
    throw ValidationError("channel stack size does not match joints*depth*height*width");
  }
  // Channel (j*D + d) with spatial (h, w) is exactly element (j, d, h, w).
  std::copy(channels.begin(), channels.end(), hm.scores.begin());
  return hm;
}

std::vector<VoxelCoord> soft_argmax(const VolumetricHeatmap& hm) {
  std::vector<VoxelCoord> out(hm.joints);
  std::vector<double> marg_d(hm.depth), marg_h(hm.height), marg_w(hm.width);
  for (int j = 0; j < hm.joints; ++j) {
    const auto s = hm.joint_scores(j);
    const double peak = *std::max_element(s.begin(), s.end());
    std::fill(marg_d.begin(), marg_d.end(), 0.0);
    std::fill(marg_h.begin(), marg_h.end(), 0.0);
    std::fill(marg_w.begin(), marg_w.end(), 0.0);
    double total = 0.0;
    std::size_t i = 0;
    for (int d = 0; d < hm.depth; ++d) {
      for (int h = 0; h < hm.height; ++h) {
        for (int w = 0; w < hm.width; ++w, ++i) {
          const double e = std::exp(s[i] - peak);
          marg_d[d] += e;
          marg_h[h] += e;
          marg_w[w] += e;
        }
      }
    }
    for (double e : marg_d) total += e;
    auto expectation = [total](const std::vector<double>& marg) {
      double acc = 0.0;
      for (std::size_t k = 0; k < marg.size(); ++k) acc += marg[k] * (static_cast<double>(k) + 0.5);
      return acc / total;
    };
    out[j] = {expectation(marg_d), expectation(marg_h), expectation(marg_w)};
  }
  return out;
}

DecodedJoint voxel_to_crop(const VolumetricHeatmap& hm, const VoxelCoord& c) {
  return {c.w * hm.crop_size / hm.width, c.h * hm.crop_size / hm.height,
          (c.d / hm.depth - 0.5) * hm.depth_span_mm};
}

VoxelCoord crop_to_voxel(const VolumetricHeatmap& hm, const DecodedJoint& j) {
  return {(j.dz / hm.depth_span_mm + 0.5) * hm.depth, j.v * hm.height / hm.crop_size,
          j.u * hm.width / hm.crop_size};
}

Pose3D decode_pose(const VolumetricHeatmap& hm, const CropTransform& transform,
                   const CameraIntrinsics& k, double root_depth_mm, int root_index) {
  hm.validate();
  if (!(root_depth_mm > 0.0)) throw ValidationError("root depth must be positive");
  if (transform.crop_size != hm.crop_size) {
    throw ValidationError("crop transform size " + std::to_string(transform.crop_size) +
                          " does not match heatmap crop size " + std::to_string(hm.crop_size));
  }
  if (root_index < 0 || root_index >= hm.joints) throw ValidationError("root index out of range");
  const auto coords = soft_argmax(hm);
  Pose3D pose;
  pose.joints_mm.resize(hm.joints);
  for (int j = 0; j < hm.joints; ++j) {
    const DecodedJoint dj = voxel_to_crop(hm, coords[j]);
    const double z = j == root_index ? root_depth_mm : root_depth_mm + dj.dz;
    if (!(z > 0.0)) {
      throw ComputeError("joint " + std::to_string(j) + " decodes to non-positive depth " +
                         std::to_string(z) + " mm");
    }
    const Vec2 original = inverse_warp_point(transform, {dj.u, dj.v});
    pose.joints_mm[j] = backproject(k, original, z);
  }
  return pose;
}

namespace {

// Mean of (i + 0.5) under weights exp(-(i + 0.5 - center)^2 * inv_two_var)
// over i in [0, n).
double truncated_mean(double center, int n, double inv_two_var) {
  double best = INFINITY;
  for (int i = 0; i < n; ++i) best = std::min(best, std::abs(i + 0.5 - center));
  double z = 0.0, m = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = i + 0.5 - center;
    const double w = std::exp(-(e * e - best * best) * inv_two_var);
    z += w;
    m += w * (i + 0.5);
  }
  return m / z;
}

// Bump center whose truncated mean equals target. The volume boundary pulls
// the mean inward, so centers near the edge are pushed outward; targets
// beyond the reachable range saturate.
double compensated_center(double target, int n, double inv_two_var) {
  double lo = -4.0 * n, hi = 5.0 * n;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (truncated_mean(mid, n, inv_two_var) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

VolumetricHeatmap encode_gaussian(const Pose3D& pose, const CropTransform& transform,
                                  const CameraIntrinsics& k, double root_depth_mm, int root_index,
                                  double sigma_voxels, const HeatmapShape& shape) {
  if (!(sigma_voxels > 0.0)) throw ValidationError("sigma must be positive");
  if (!(root_depth_mm > 0.0)) throw ValidationError("root depth must be positive");
  const int joints = pose.joint_count();
  if (root_index < 0 || root_index >= joints) throw ValidationError("root index out of range");
  auto hm = VolumetricHeatmap::zeros(joints, shape.depth, shape.height, shape.width,
                                     shape.crop_size, shape.depth_span_mm);
  if (transform.crop_size != hm.crop_size) {
    throw ValidationError("crop transform size does not match the heatmap crop size");
  }
  const double inv_two_var = 1.0 / (2.0 * sigma_voxels * sigma_voxels);
  for (int j = 0; j < joints; ++j) {
    const Vec3& p = pose.joints_mm[j];
    const Vec2 crop = warp_point(transform, project(k, p));
    const double dz = j == root_index ? 0.0 : p.z() - root_depth_mm;
    const VoxelCoord target = crop_to_voxel(hm, {crop.x(), crop.y(), dz});
    if (target.d < 0 || target.d >= hm.depth || target.h < 0 || target.h >= hm.height ||
        target.w < 0 || target.w >= hm.width) {
      throw ComputeError("joint " + std::to_string(j) + " lies outside the heatmap volume");
    }
    // The score volume is separable, so the softmax mean factorizes per axis.
    const VoxelCoord c{compensated_center(target.d, hm.depth, inv_two_var),
                       compensated_center(target.h, hm.height, inv_two_var),
                       compensated_center(target.w, hm.width, inv_two_var)};
    for (int d = 0; d < hm.depth; ++d) {
      const double ed = (d + 0.5 - c.d) * (d + 0.5 - c.d);
      for (int h = 0; h < hm.height; ++h) {
        const double eh = (h + 0.5 - c.h) * (h + 0.5 - c.h);
        for (int w = 0; w < hm.width; ++w) {
          const double ew = (w + 0.5 - c.w) * (w + 0.5 - c.w);
          hm.at(j, d, h, w) = -(ed + eh + ew) * inv_two_var;
        }
      }
    }
  }
  return hm;
}

VolumetricHeatmap flip_width(const VolumetricHeatmap& hm) {
  VolumetricHeatmap out = hm;
  for (int j = 0; j < hm.joints; ++j)
    for (int d = 0; d < hm.depth; ++d)
      for (int h = 0; h < hm.height; ++h)
        for (int w = 0; w < hm.width; ++w) out.at(j, d, h, w) = hm.at(j, d, h, hm.width - 1 - w);
  return out;
}

double l1_loss(const Pose3D& pred, const Pose3D& gt) {
  if (pred.joint_count() != gt.joint_count()) {
    throw ValidationError("l1_loss: joint count mismatch");
  }
  if (gt.joint_count() == 0) return 0.0;
  double sum = 0.0;
  for (int j = 0; j < gt.joint_count(); ++j) {
    sum += (pred.joints_mm[j] - gt.joints_mm[j]).cwiseAbs().sum();
  }
  return sum / (3.0 * gt.joint_count());
}

// ---------------------------------------------------------------- file format

namespace {

constexpr char kMagic[4] = {'V', 'H', 'M', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_heatmap(const VolumetricHeatmap& hm) {
  hm.validate();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(20 + hm.scores.size() * 4 + 64);
  put_u32(out, static_cast<std::uint32_t>(hm.joints));
  put_u32(out, static_cast<std::uint32_t>(hm.depth));
  put_u32(out, static_cast<std::uint32_t>(hm.height));
  put_u32(out, static_cast<std::uint32_t>(hm.width));
  for (double s : hm.scores) {
    const float f = static_cast<float>(s);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  const std::string trailer =
      nlohmann::json{{"crop_size", hm.crop_size}, {"depth_span_mm", hm.depth_span_mm}}.dump();
  out.insert(out.end(), trailer.begin(), trailer.end());
  return out;
}

VolumetricHeatmap decode_heatmap(std::span<const std::uint8_t> b) {
  if (b.size() < 20 || std::memcmp(b.data(), kMagic, 4) != 0) {
    throw ValidationError("not a VHM1 heatmap");
  }
  const std::uint64_t dims[4] = {get_u32(b, 4), get_u32(b, 8), get_u32(b, 12), get_u32(b, 16)};
  const std::uint64_t count = dims[0] * dims[1] * dims[2] * dims[3];
  if (count == 0 || 20 + count * 4 > b.size()) throw ValidationError("heatmap payload truncated");
  VolumetricHeatmap hm;
  hm.joints = static_cast<int>(dims[0]);
  hm.depth = static_cast<int>(dims[1]);
  hm.height = static_cast<int>(dims[2]);
  hm.width = static_cast<int>(dims[3]);
  hm.scores.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(b, 20 + i * 4);
    float f;
    std::memcpy(&f, &bits, 4);
    hm.scores[i] = f;
  }
  const auto* tail = reinterpret_cast<const char*>(b.data() + 20 + count * 4);
  const std::string trailer(tail, b.size() - 20 - count * 4);
  try {
    const auto j = nlohmann::json::parse(trailer);
    hm.crop_size = j.at("crop_size").get<int>();
    hm.depth_span_mm = j.at("depth_span_mm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("heatmap trailer: ") + e.what());
  }
  hm.validate();
  return hm;
}

void write_heatmap(const VolumetricHeatmap& hm, const std::filesystem::path& path) {
  const auto bytes = encode_heatmap(hm);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write heatmap " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing heatmap " + path.string());
}

VolumetricHeatmap read_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open heatmap " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_heatmap(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace occbench
