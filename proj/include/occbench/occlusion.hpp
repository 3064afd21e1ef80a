#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "occbench/geometry.hpp"
#include "occbench/image.hpp"
#include "occbench/random.hpp"

namespace occbench {

enum class OcclusionKind { none, circles, single_rectangle, rectangles, bars, objects, mixture };

// The five concrete occluder families; mixture picks among these.
inline constexpr std::array<OcclusionKind, 5> kOccluderFamilies = {
    OcclusionKind::circles, OcclusionKind::single_rectangle, OcclusionKind::rectangles,
    OcclusionKind::bars, OcclusionKind::objects};

std::string_view to_string(OcclusionKind kind);
OcclusionKind parse_occlusion_kind(std::string_view name);
bool needs_library(OcclusionKind kind);

inline constexpr double kMaxOcclusionDegree = 0.7;

struct OcclusionSpec {
  OcclusionKind kind = OcclusionKind::none;
  double target_degree = 0.0;  // fraction of bbox pixels, in [0, 0.7]
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Fill { solid_black, object_texture };
enum class LibrarySplit { train, test };

std::string_view to_string(LibrarySplit split);
LibrarySplit parse_split(std::string_view name);

// Where a scaled library entry sits in image coordinates. The full scaled
// bitmap spans [x0, x0 + width) x [y0, y0 + height); the mask itself may be
// clipped to the image.
struct ObjectPlacement {
  std::string id;
  int x0 = 0;
  int y0 = 0;
  int width = 1;
  int height = 1;

  friend bool operator==(const ObjectPlacement&, const ObjectPlacement&) = default;
};

struct OccluderMask {
  int x0 = 0;  // top-left anchor in image coordinates
  int y0 = 0;
  AlphaMap alpha;
  std::optional<ObjectPlacement> object;

  friend bool operator==(const OccluderMask&, const OccluderMask&) = default;
};

struct OccluderMaskSet {
  int image_width = 0;
  int image_height = 0;
  Fill fill = Fill::solid_black;
  OcclusionKind kind = OcclusionKind::none;  // family actually generated
  std::vector<OccluderMask> masks;

  std::vector<std::string> source_ids() const;
  // Union of masks, 255 where any mask alpha >= 128.
  AlphaMap coverage() const;

  friend bool operator==(const OccluderMaskSet&, const OccluderMaskSet&) = default;
};

struct ObjectEntry {
  std::string id;
  RgbaImage bitmap;  // alpha is the segmentation mask
  LibrarySplit split = LibrarySplit::train;
};

class ObjectLibrary {
 public:
  ObjectLibrary() = default;
  explicit ObjectLibrary(std::vector<ObjectEntry> entries);

  const std::vector<ObjectEntry>& entries() const { return entries_; }
  const ObjectEntry* find(std::string_view id) const;
  std::vector<const ObjectEntry*> split(LibrarySplit which) const;

  // Directory with manifest.json {entries:[{id, file, split}]} and RGBA PNGs.
  static ObjectLibrary load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  // Random opaque blobs for desk-scale runs.
  static ObjectLibrary synthetic(int train_count, int test_count, std::uint64_t seed);

 private:
  void validate() const;
  std::vector<ObjectEntry> entries_;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Shape-family parameters; sizes are relative to the bbox unless noted.
struct OccluderParams {
  int min_count = 1;
  int max_count = 8;
  Range circle_radius{0.05, 0.25};       // x larger bbox side
  Range rectangle_side{0.10, 0.40};      // x larger bbox side
  Range aspect{0.3, 1.0 / 0.3};          // height / width
  Range erasing_area{0.02, 0.4};         // single rectangle, x image area
  Range bar_width{0.02, 0.08};           // x bbox diagonal
  Range bar_half_length{0.25, 0.75};     // x bbox diagonal
  int max_objects = 3;
  Range object_size{0.3, 0.7};           // larger object side x larger bbox side
  double tolerance = 0.02;
  int max_iterations = 20;
  int max_layouts = 50;
  int max_shapes = 64;
};

struct DegreeMeasurement {
  double occluded_fraction = 0.0;
  std::int64_t occluded_pixel_count = 0;
  std::int64_t bbox_pixel_count = 0;
};

// Pixels of bbox (clipped to the image) covered by mask alpha >= 128,
// overlapping masks counted once.
DegreeMeasurement measure_degree(const OccluderMaskSet& masks, const BoundingBox& bbox);

struct ImageSize {
  int width = 0;
  int height = 0;
};

// Random occluders over `bbox` calibrated to spec.target_degree. `library`
// is required for objects and mixture; only entries of `split` are used.
OccluderMaskSet generate(const OcclusionSpec& spec, const BoundingBox& bbox, ImageSize image,
                         const ObjectLibrary* library, LibrarySplit split, Rng& rng,
                         const OccluderParams& params = {});
// Same, drawing from a stream seeded by spec.seed.
OccluderMaskSet generate(const OcclusionSpec& spec, const BoundingBox& bbox, ImageSize image,
                         const ObjectLibrary* library, LibrarySplit split,
                         const OccluderParams& params = {});

// Black fill or alpha-blended library texture; pixels outside all masks are
// untouched.
Image composite(const Image& image, const OccluderMaskSet& masks, const ObjectLibrary* library);

struct AugmentationPolicy {
  OcclusionSpec spec;
  double apply_probability = 0.5;

  void validate() const;
};

struct PolicyResult {
  Image image;
  bool applied = false;
  DegreeMeasurement degree;
  OccluderMaskSet masks;
};

PolicyResult apply_policy(const AugmentationPolicy& policy, const Image& image,
                          const BoundingBox& bbox, const ObjectLibrary* library,
                          LibrarySplit split, Rng& rng, const OccluderParams& params = {});

struct CalibrationCell {
  OcclusionKind kind = OcclusionKind::none;
  double degree = 0.0;
  int samples = 0;
  double mean_count = 0.0;
  double std_count = 0.0;
  double mean_fraction = 0.0;
  double max_abs_error = 0.0;       // max |measured - target| over samples
  double relative_deviation = 0.0;  // |mean - cross-kind mean| / cross-kind mean
  bool flagged = false;
};

struct CalibrationReport {
  std::vector<CalibrationCell> cells;
  double deviation_threshold = 0.10;
  std::int64_t bbox_pixel_count = 0;

  bool any_flagged() const;
};

CalibrationReport calibrate_distributions(const std::vector<OcclusionKind>& kinds,
                                          const std::vector<double>& degrees,
                                          const BoundingBox& bbox, ImageSize image,
                                          int samples_per_cell, const ObjectLibrary* library,
                                          LibrarySplit split, Rng& rng,
                                          const OccluderParams& params = {});

}  // namespace occbench
