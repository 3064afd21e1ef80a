#include "occbench/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "occbench/error.hpp"

namespace occbench {

std::string_view to_string(OcclusionKind kind) {
  switch (kind) {
    case OcclusionKind::none: return "none";
    case OcclusionKind::circles: return "circles";
    case OcclusionKind::single_rectangle: return "single_rectangle";
    case OcclusionKind::rectangles: return "rectangles";
    case OcclusionKind::bars: return "bars";
    case OcclusionKind::objects: return "objects";
    case OcclusionKind::mixture: return "mixture";
  }
  return "none";
}

OcclusionKind parse_occlusion_kind(std::string_view name) {
  for (auto k : {OcclusionKind::none, OcclusionKind::circles, OcclusionKind::single_rectangle,
                 OcclusionKind::rectangles, OcclusionKind::bars, OcclusionKind::objects,
                 OcclusionKind::mixture}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown occlusion kind '" + std::string(name) + "'");
}

bool needs_library(OcclusionKind kind) {
  return kind == OcclusionKind::objects || kind == OcclusionKind::mixture;
}

void OcclusionSpec::validate() const {
  if (!(target_degree >= 0.0 && target_degree <= kMaxOcclusionDegree + 1e-12)) {
    throw ValidationError("occlusion degree must be within [0, 0.7]");
  }
}

std::string_view to_string(LibrarySplit split) {
  return split == LibrarySplit::train ? "train" : "test";
}

LibrarySplit parse_split(std::string_view name) {
  if (name == "train") return LibrarySplit::train;
  if (name == "test") return LibrarySplit::test;
  throw ValidationError("unknown library split '" + std::string(name) + "'");
}

std::vector<std::string> OccluderMaskSet::source_ids() const {
  std::vector<std::string> ids;
  for (const auto& m : masks) {
    if (m.object) ids.push_back(m.object->id);
  }
  return ids;
}

AlphaMap OccluderMaskSet::coverage() const {
  AlphaMap out(image_width, image_height);
  for (const auto& m : masks) {
    for (int y = 0; y < m.alpha.height(); ++y) {
      for (int x = 0; x < m.alpha.width(); ++x) {
        if (m.alpha.at(x, y) >= 128) out.at(m.x0 + x, m.y0 + y) = 255;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- library

ObjectLibrary::ObjectLibrary(std::vector<ObjectEntry> entries) : entries_(std::move(entries)) {
  validate();
}

void ObjectLibrary::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    if (!ids.insert(e.id).second) throw ValidationError("duplicate object id '" + e.id + "'");
    if (e.bitmap.rgb.width() != e.bitmap.alpha.width() ||
        e.bitmap.rgb.height() != e.bitmap.alpha.height()) {
      throw ValidationError("object '" + e.id + "': color and alpha sizes differ");
    }
    const auto a = e.bitmap.alpha.bytes();
    if (std::none_of(a.begin(), a.end(), [](std::uint8_t v) { return v >= 128; })) {
      throw ValidationError("object '" + e.id + "' has an empty alpha mask");
    }
  }
}

const ObjectEntry* ObjectLibrary::find(std::string_view id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<const ObjectEntry*> ObjectLibrary::split(LibrarySplit which) const {
  std::vector<const ObjectEntry*> out;
  for (const auto& e : entries_) {
    if (e.split == which) out.push_back(&e);
  }
  return out;
}

ObjectLibrary ObjectLibrary::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open object library manifest in " + dir.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("object library manifest: " + std::string(e.what()));
  }
  std::vector<ObjectEntry> entries;
  for (const auto& ej : doc.at("entries")) {
    ObjectEntry e;
    e.id = ej.at("id").get<std::string>();
    e.split = parse_split(ej.at("split").get<std::string>());
    e.bitmap = read_png_rgba(dir / ej.at("file").get<std::string>());
    entries.push_back(std::move(e));
  }
  return ObjectLibrary(std::move(entries));
}

void ObjectLibrary::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : entries_) {
    const std::string file = e.id + ".png";
    write_png(e.bitmap, dir / file);
    entries.push_back({{"id", e.id}, {"file", file}, {"split", std::string(to_string(e.split))}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write object library manifest in " + dir.string());
  out << nlohmann::json{{"entries", entries}}.dump(1) << '\n';
}

ObjectLibrary ObjectLibrary::synthetic(int train_count, int test_count, std::uint64_t seed) {
  Rng rng(derive_seed({seed, hash_string("object-library")}));
  std::vector<ObjectEntry> entries;
  auto make = [&rng](const std::string& id, LibrarySplit split) {
    const int w = uniform_int(rng, 48, 96);
    const int h = uniform_int(rng, 48, 96);
    ObjectEntry e{id, {Image(w, h), AlphaMap(w, h)}, split};
    struct Ellipse {
      double cx, cy, rx, ry;
    };
    std::vector<Ellipse> parts{{w / 2.0, h / 2.0, w * uniform(rng, 0.3, 0.48), h * uniform(rng, 0.3, 0.48)}};
    const int extra = uniform_int(rng, 1, 3);
    for (int i = 0; i < extra; ++i) {
      parts.push_back({uniform(rng, 0.25, 0.75) * w, uniform(rng, 0.25, 0.75) * h,
                       w * uniform(rng, 0.1, 0.25), h * uniform(rng, 0.1, 0.25)});
    }
    const Rgb base{static_cast<std::uint8_t>(uniform_int(rng, 20, 235)),
                   static_cast<std::uint8_t>(uniform_int(rng, 20, 235)),
                   static_cast<std::uint8_t>(uniform_int(rng, 20, 235))};
    const double stripe = uniform(rng, 4.0, 12.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        bool inside = false;
        for (const auto& p : parts) {
          const double dx = (x - p.cx) / p.rx;
          const double dy = (y - p.cy) / p.ry;
          inside = inside || dx * dx + dy * dy <= 1.0;
        }
        const int shade = (static_cast<int>((x + y) / stripe) % 2) ? 20 : -20;
        auto c = [shade](std::uint8_t v) {
          return static_cast<std::uint8_t>(std::clamp(v + shade, 0, 255));
        };
        e.bitmap.rgb.set(x, y, {c(base.r), c(base.g), c(base.b)});
        e.bitmap.alpha.at(x, y) = inside ? 255 : 0;
      }
    }
    return e;
  };
  char id[32];
  for (int i = 0; i < train_count; ++i) {
    std::snprintf(id, sizeof id, "train_%03d", i);
    entries.push_back(make(id, LibrarySplit::train));
  }
  for (int i = 0; i < test_count; ++i) {
    std::snprintf(id, sizeof id, "test_%03d", i);
    entries.push_back(make(id, LibrarySplit::test));
  }
  return ObjectLibrary(std::move(entries));
}

// ---------------------------------------------------------------- shapes

namespace {

// Half-open pixel index range.
struct PixelRange {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  int width() const { return std::max(0, x1 - x0); }
  int height() const { return std::max(0, y1 - y0); }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
};

PixelRange pixels_of(const BoundingBox& b, ImageSize image) {
  PixelRange r;
  r.x0 = std::max(0, static_cast<int>(std::ceil(b.x)));
  r.x1 = std::min(image.width, static_cast<int>(std::ceil(b.x + b.w)));
  r.y0 = std::max(0, static_cast<int>(std::ceil(b.y)));
  r.y1 = std::min(image.height, static_cast<int>(std::ceil(b.y + b.h)));
  return r;
}

struct Shape {
  enum class Type { disk, rect, bar, object } type = Type::disk;
  Vec2 center{0, 0};
  double radius = 0;          // disk
  double half_w = 0;          // rect
  double half_h = 0;          // rect
  double angle = 0;           // bar
  double half_len = 0;        // bar
  double half_width = 0;      // bar
  const ObjectEntry* entry = nullptr;
  double scale = 1.0;         // object

  // Grows the shape by s; bars only lengthen.
  Shape scaled(double s) const {
    Shape out = *this;
    out.radius *= s;
    out.half_w *= s;
    out.half_h *= s;
    out.half_len *= s;
    out.scale *= s;
    return out;
  }
};

ObjectPlacement place_object(const Shape& s) {
  ObjectPlacement p;
  p.id = s.entry->id;
  p.width = std::max(1, static_cast<int>(std::lround(s.entry->bitmap.rgb.width() * s.scale)));
  p.height = std::max(1, static_cast<int>(std::lround(s.entry->bitmap.rgb.height() * s.scale)));
  p.x0 = static_cast<int>(std::lround(s.center.x() - 0.5 * p.width));
  p.y0 = static_cast<int>(std::lround(s.center.y() - 0.5 * p.height));
  return p;
}

// Nearest-neighbor source index for column/row `i` of a scaled bitmap.
inline int source_index(int i, int full, int src) {
  return std::min(src - 1, static_cast<int>((i + 0.5) * src / full));
}

// Integer interval [lo, hi] of x with |a*x + b| <= limit, intersected in place.
void clip_abs_linear(double a, double b, double limit, double& lo, double& hi) {
  if (std::abs(a) < 1e-12) {
    if (std::abs(b) > limit) hi = lo - 1;
    return;
  }
  double x0 = (-limit - b) / a;
  double x1 = (limit - b) / a;
  if (x0 > x1) std::swap(x0, x1);
  lo = std::max(lo, x0);
  hi = std::min(hi, x1);
}

// Calls span(y, xa, xb) for opaque runs or pixel(x, y, alpha) for textured
// objects, restricted to `clip`.
template <typename SpanFn, typename PixelFn>
void rasterize(const Shape& s, const PixelRange& clip, SpanFn&& span, PixelFn&& pixel) {
  const double cx = s.center.x();
  const double cy = s.center.y();
  switch (s.type) {
    case Shape::Type::disk: {
      const double r2 = s.radius * s.radius;
      const int ya = std::max(clip.y0, static_cast<int>(std::ceil(cy - s.radius)));
      const int yb = std::min(clip.y1 - 1, static_cast<int>(std::floor(cy + s.radius)));
      for (int y = ya; y <= yb; ++y) {
        const double rem = r2 - (y - cy) * (y - cy);
        if (rem < 0) continue;
        const double half = std::sqrt(rem);
        const int xa = std::max(clip.x0, static_cast<int>(std::ceil(cx - half)));
        const int xb = std::min(clip.x1, static_cast<int>(std::floor(cx + half)) + 1);
        if (xa < xb) span(y, xa, xb);
      }
      break;
    }
    case Shape::Type::rect: {
      const int ya = std::max(clip.y0, static_cast<int>(std::ceil(cy - s.half_h)));
      const int yb = std::min(clip.y1, static_cast<int>(std::ceil(cy + s.half_h)));
      const int xa = std::max(clip.x0, static_cast<int>(std::ceil(cx - s.half_w)));
      const int xb = std::min(clip.x1, static_cast<int>(std::ceil(cx + s.half_w)));
      if (xa >= xb) break;
      for (int y = ya; y < yb; ++y) span(y, xa, xb);
      break;
    }
    case Shape::Type::bar: {
      const double c = std::cos(s.angle), sn = std::sin(s.angle);
      const double reach_y = s.half_len * std::abs(sn) + s.half_width * std::abs(c);
      const int ya = std::max(clip.y0, static_cast<int>(std::ceil(cy - reach_y)));
      const int yb = std::min(clip.y1 - 1, static_cast<int>(std::floor(cy + reach_y)));
      for (int y = ya; y <= yb; ++y) {
        const double dy = y - cy;
        double lo = clip.x0, hi = clip.x1 - 1;
        // along-axis: (x - cx) c + dy sn ; across-axis: -(x - cx) sn + dy c
        clip_abs_linear(c, -cx * c + dy * sn, s.half_len, lo, hi);
        clip_abs_linear(-sn, cx * sn + dy * c, s.half_width, lo, hi);
        if (lo > hi) continue;
        const int xa = static_cast<int>(std::ceil(lo));
        const int xb = static_cast<int>(std::floor(hi)) + 1;
        if (xa < xb) span(y, xa, xb);
      }
      break;
    }
    case Shape::Type::object: {
      const ObjectPlacement p = place_object(s);
      const AlphaMap& alpha = s.entry->bitmap.alpha;
      const int ya = std::max(clip.y0, p.y0);
      const int yb = std::min(clip.y1, p.y0 + p.height);
      const int xa = std::max(clip.x0, p.x0);
      const int xb = std::min(clip.x1, p.x0 + p.width);
      for (int y = ya; y < yb; ++y) {
        const int sy = source_index(y - p.y0, p.height, alpha.height());
        for (int x = xa; x < xb; ++x) {
          const std::uint8_t a = alpha.at(source_index(x - p.x0, p.width, alpha.width()), sy);
          if (a) pixel(x, y, a);
        }
      }
      break;
    }
  }
}

// Fraction of bbox pixels covered by the union of shapes grown by `s`.
class CoverageCounter {
 public:
  explicit CoverageCounter(const PixelRange& box)
      : box_(box), bits_(static_cast<std::size_t>(box.area())) {}

  double fraction(const std::vector<Shape>& shapes, double s) {
    if (box_.area() == 0) return 0.0;
    std::fill(bits_.begin(), bits_.end(), 0);
    const int w = box_.width();
    for (const auto& base : shapes) {
      rasterize(
          base.scaled(s), box_,
          [&](int y, int xa, int xb) {
            std::fill_n(&bits_[static_cast<std::size_t>(y - box_.y0) * w + (xa - box_.x0)], xb - xa, 1);
          },
          [&](int x, int y, std::uint8_t a) {
            if (a >= 128) bits_[static_cast<std::size_t>(y - box_.y0) * w + (x - box_.x0)] = 1;
          });
    }
    const auto count = std::count(bits_.begin(), bits_.end(), 1);
    return static_cast<double>(count) / static_cast<double>(box_.area());
  }

 private:
  PixelRange box_;
  std::vector<std::uint8_t> bits_;
};

OccluderMask to_mask(const Shape& s, ImageSize image) {
  const PixelRange canvas{0, image.width, 0, image.height};
  // Bounds first, then fill.
  int x0 = image.width, y0 = image.height, x1 = -1, y1 = -1;
  auto extend = [&](int y, int xa, int xb) {
    x0 = std::min(x0, xa);
    x1 = std::max(x1, xb - 1);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  };
  rasterize(s, canvas, extend, [&](int x, int y, std::uint8_t) { extend(y, x, x + 1); });
  OccluderMask m;
  if (x1 < x0) return m;
  m.x0 = x0;
  m.y0 = y0;
  m.alpha = AlphaMap(x1 - x0 + 1, y1 - y0 + 1);
  rasterize(
      s, canvas,
      [&](int y, int xa, int xb) {
        for (int x = xa; x < xb; ++x) m.alpha.at(x - x0, y - y0) = 255;
      },
      [&](int x, int y, std::uint8_t a) { m.alpha.at(x - x0, y - y0) = a; });
  if (s.type == Shape::Type::object) m.object = place_object(s);
  return m;
}

Vec2 random_point_in(const BoundingBox& b, Rng& rng) {
  return {uniform(rng, b.x, b.x + b.w), uniform(rng, b.y, b.y + b.h)};
}

struct Layout {
  std::vector<Shape> shapes;
  double max_scale = 1.0;
};

double extent_of(const Shape& s) {
  switch (s.type) {
    case Shape::Type::disk: return s.radius;
    case Shape::Type::rect: return std::min(s.half_w, s.half_h);
    case Shape::Type::bar: return s.half_len;
    case Shape::Type::object:
      return 0.5 * s.scale * std::min(s.entry->bitmap.rgb.width(), s.entry->bitmap.rgb.height());
  }
  return 1.0;
}

// Scale at which every shape reaches well past the bbox.
double saturating_scale(const std::vector<Shape>& shapes, const BoundingBox& b) {
  const double diag = std::hypot(b.w, b.h);
  double s = 1.0;
  for (const auto& sh : shapes) s = std::max(s, 2.5 * diag / std::max(extent_of(sh), 1e-6));
  return s;
}

Shape sample_shape(OcclusionKind kind, const BoundingBox& b, ImageSize image,
                   const std::vector<const ObjectEntry*>& objects, Rng& rng,
                   const OccluderParams& p) {
  const double side = std::max(b.w, b.h);
  const double diag = std::hypot(b.w, b.h);
  Shape s;
  switch (kind) {
    case OcclusionKind::circles:
      s.type = Shape::Type::disk;
      s.center = random_point_in(b, rng);
      s.radius = uniform(rng, p.circle_radius.lo, p.circle_radius.hi) * side;
      break;
    case OcclusionKind::rectangles: {
      s.type = Shape::Type::rect;
      s.center = random_point_in(b, rng);
      const double w = uniform(rng, p.rectangle_side.lo, p.rectangle_side.hi) * side;
      s.half_w = 0.5 * w;
      s.half_h = 0.5 * w * uniform(rng, p.aspect.lo, p.aspect.hi);
      break;
    }
    case OcclusionKind::single_rectangle: {
      // Random-erasing draw over the whole image, accepted once its center
      // falls inside the bbox.
      s.type = Shape::Type::rect;
      const double area = static_cast<double>(image.width) * image.height;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        const double target = uniform(rng, p.erasing_area.lo, p.erasing_area.hi) * area;
        const double aspect = uniform(rng, p.aspect.lo, p.aspect.hi);
        const double h = std::sqrt(target * aspect);
        const double w = std::sqrt(target / aspect);
        if (w >= image.width || h >= image.height) continue;
        const double x = uniform(rng, 0.0, image.width - w);
        const double y = uniform(rng, 0.0, image.height - h);
        const Vec2 c(x + 0.5 * w, y + 0.5 * h);
        if (c.x() < b.x || c.x() > b.x + b.w || c.y() < b.y || c.y() > b.y + b.h) continue;
        s.center = c;
        s.half_w = 0.5 * w;
        s.half_h = 0.5 * h;
        return s;
      }
      throw ComputeError("single rectangle: no erasing rectangle centered on the bbox");
    }
    case OcclusionKind::bars:
      s.type = Shape::Type::bar;
      s.center = random_point_in(b, rng);
      s.angle = uniform(rng, 0.0, std::numbers::pi);
      s.half_width = 0.5 * uniform(rng, p.bar_width.lo, p.bar_width.hi) * diag;
      s.half_len = uniform(rng, p.bar_half_length.lo, p.bar_half_length.hi) * diag;
      break;
    case OcclusionKind::objects: {
      s.type = Shape::Type::object;
      s.entry = objects[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(objects.size()) - 1))];
      s.center = random_point_in(b, rng);
      const double obj_side = std::max(s.entry->bitmap.rgb.width(), s.entry->bitmap.rgb.height());
      s.scale = uniform(rng, p.object_size.lo, p.object_size.hi) * side / obj_side;
      break;
    }
    default:
      throw ValidationError("not a concrete occluder family");
  }
  return s;
}

int initial_count(OcclusionKind kind, Rng& rng, const OccluderParams& p) {
  switch (kind) {
    case OcclusionKind::single_rectangle: return 1;
    case OcclusionKind::objects: return uniform_int(rng, 1, std::max(1, p.max_objects));
    default: return uniform_int(rng, p.min_count, p.max_count);
  }
}

OccluderMaskSet generate_family(OcclusionKind kind, double target, const BoundingBox& b,
                                ImageSize image, const ObjectLibrary* library, LibrarySplit split,
                                Rng& rng, const OccluderParams& p) {
  std::vector<const ObjectEntry*> objects;
  if (kind == OcclusionKind::objects) {
    if (!library) throw ValidationError("object occluders need an object library");
    objects = library->split(split);
    if (objects.empty()) {
      throw ComputeError("object library has no '" + std::string(to_string(split)) +
                         "' entries; target degree unreachable");
    }
  }
  const PixelRange box = pixels_of(b, image);
  if (box.area() == 0) throw ValidationError("bbox covers no image pixels");
  CoverageCounter counter(box);

  for (int layout = 0; layout < p.max_layouts; ++layout) {
    std::vector<Shape> shapes;
    const int n = initial_count(kind, rng, p);
    for (int i = 0; i < n; ++i) shapes.push_back(sample_shape(kind, b, image, objects, rng, p));
    // Add shapes while even the saturated layout falls short.
    double hi = saturating_scale(shapes, b);
    while (counter.fraction(shapes, hi) < target &&
           static_cast<int>(shapes.size()) < p.max_shapes && kind != OcclusionKind::single_rectangle) {
      shapes.push_back(sample_shape(kind, b, image, objects, rng, p));
      hi = saturating_scale(shapes, b);
    }
    double lo = 0.0;
    double best_scale = hi;
    double best_err = std::abs(counter.fraction(shapes, hi) - target);
    for (int it = 0; it < p.max_iterations && best_err > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double f = counter.fraction(shapes, mid);
      const double err = std::abs(f - target);
      if (err < best_err) {
        best_err = err;
        best_scale = mid;
      }
      (f < target ? lo : hi) = mid;
    }
    if (best_err > p.tolerance) continue;

    OccluderMaskSet set;
    set.image_width = image.width;
    set.image_height = image.height;
    set.kind = kind;
    set.fill = kind == OcclusionKind::objects ? Fill::object_texture : Fill::solid_black;
    for (const auto& sh : shapes) {
      OccluderMask m = to_mask(sh.scaled(best_scale), image);
      if (m.alpha.width() > 0) set.masks.push_back(std::move(m));
    }
    return set;
  }
  throw ComputeError("occlusion degree " + std::to_string(target) + " unreachable for " +
                     std::string(to_string(kind)) + " after " + std::to_string(p.max_layouts) +
                     " layouts");
}

}  // namespace

OccluderMaskSet generate(const OcclusionSpec& spec, const BoundingBox& bbox, ImageSize image,
                         const ObjectLibrary* library, LibrarySplit split, Rng& rng,
                         const OccluderParams& params) {
  spec.validate();
  bbox.validate();
  if (image.width <= 0 || image.height <= 0) throw ValidationError("image size must be positive");
  if (needs_library(spec.kind) && !library) {
    throw ValidationError(std::string(to_string(spec.kind)) + " occlusion requires an object library");
  }
  OcclusionKind kind = spec.kind;
  if (kind == OcclusionKind::mixture) {
    kind = kOccluderFamilies[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(kOccluderFamilies.size()) - 1))];
  }
  if (kind == OcclusionKind::none || spec.target_degree <= 0.0) {
    OccluderMaskSet empty;
    empty.image_width = image.width;
    empty.image_height = image.height;
    empty.kind = kind;
    empty.fill = kind == OcclusionKind::objects ? Fill::object_texture : Fill::solid_black;
    return empty;
  }
  return generate_family(kind, spec.target_degree, bbox, image, library, split, rng, params);
}

OccluderMaskSet generate(const OcclusionSpec& spec, const BoundingBox& bbox, ImageSize image,
                         const ObjectLibrary* library, LibrarySplit split,
                         const OccluderParams& params) {
  Rng rng(spec.seed);
  return generate(spec, bbox, image, library, split, rng, params);
}

DegreeMeasurement measure_degree(const OccluderMaskSet& set, const BoundingBox& bbox) {
  const PixelRange box = pixels_of(bbox, {set.image_width, set.image_height});
  DegreeMeasurement out;
  out.bbox_pixel_count = box.area();
  if (out.bbox_pixel_count == 0) return out;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(box.area()), 0);
  const int w = box.width();
  for (const auto& m : set.masks) {
    const int ya = std::max(box.y0, m.y0), yb = std::min(box.y1, m.y0 + m.alpha.height());
    const int xa = std::max(box.x0, m.x0), xb = std::min(box.x1, m.x0 + m.alpha.width());
    for (int y = ya; y < yb; ++y) {
      for (int x = xa; x < xb; ++x) {
        if (m.alpha.at(x - m.x0, y - m.y0) >= 128) {
          bits[static_cast<std::size_t>(y - box.y0) * w + (x - box.x0)] = 1;
        }
      }
    }
  }
  out.occluded_pixel_count = std::count(bits.begin(), bits.end(), 1);
  out.occluded_fraction =
      static_cast<double>(out.occluded_pixel_count) / static_cast<double>(out.bbox_pixel_count);
  return out;
}

Image composite(const Image& image, const OccluderMaskSet& set, const ObjectLibrary* library) {
  Image out = image;
  for (const auto& m : set.masks) {
    const ObjectEntry* entry = nullptr;
    if (m.object) {
      if (!library) throw ValidationError("compositing object occluders needs the object library");
      entry = library->find(m.object->id);
      if (!entry) throw ValidationError("object library has no entry '" + m.object->id + "'");
    }
    for (int y = 0; y < m.alpha.height(); ++y) {
      const int iy = m.y0 + y;
      if (iy < 0 || iy >= out.height()) continue;
      for (int x = 0; x < m.alpha.width(); ++x) {
        const int ix = m.x0 + x;
        const std::uint8_t a = m.alpha.at(x, y);
        if (a == 0 || ix < 0 || ix >= out.width()) continue;
        Rgb src{0, 0, 0};
        if (entry) {
          const auto& p = *m.object;
          src = entry->bitmap.rgb.at(source_index(ix - p.x0, p.width, entry->bitmap.rgb.width()),
                                     source_index(iy - p.y0, p.height, entry->bitmap.rgb.height()));
        }
        if (a == 255) {
          out.set(ix, iy, src);
          continue;
        }
        const Rgb dst = out.at(ix, iy);
        auto blend = [a](int s, int d) {
          return static_cast<std::uint8_t>((a * s + (255 - a) * d + 127) / 255);
        };
        out.set(ix, iy, {blend(src.r, dst.r), blend(src.g, dst.g), blend(src.b, dst.b)});
      }
    }
  }
  return out;
}

void AugmentationPolicy::validate() const {
  spec.validate();
  if (!(apply_probability >= 0.0 && apply_probability <= 1.0)) {
    throw ValidationError("apply_probability must be within [0, 1]");
  }
}

PolicyResult apply_policy(const AugmentationPolicy& policy, const Image& image,
                          const BoundingBox& bbox, const ObjectLibrary* library,
                          LibrarySplit split, Rng& rng, const OccluderParams& params) {
  policy.validate();
  PolicyResult r;
  const ImageSize size{image.width(), image.height()};
  r.masks.image_width = size.width;
  r.masks.image_height = size.height;
  r.applied = bernoulli(rng, policy.apply_probability);
  if (!r.applied) {
    r.image = image;
    r.degree = measure_degree(r.masks, bbox);
    return r;
  }
  r.masks = generate(policy.spec, bbox, size, library, split, rng, params);
  r.image = composite(image, r.masks, library);
  r.degree = measure_degree(r.masks, bbox);
  return r;
}

bool CalibrationReport::any_flagged() const {
  return std::any_of(cells.begin(), cells.end(), [](const CalibrationCell& c) { return c.flagged; });
}

CalibrationReport calibrate_distributions(const std::vector<OcclusionKind>& kinds,
                                          const std::vector<double>& degrees,
                                          const BoundingBox& bbox, ImageSize image,
                                          int samples_per_cell, const ObjectLibrary* library,
                                          LibrarySplit split, Rng& rng,
                                          const OccluderParams& params) {
  if (samples_per_cell < 30) throw ValidationError("calibration needs at least 30 samples per cell");
  if (kinds.empty() || degrees.empty()) throw ValidationError("calibration needs kinds and degrees");
  CalibrationReport report;
  report.bbox_pixel_count = pixels_of(bbox, image).area();
  for (double degree : degrees) {
    const std::size_t first = report.cells.size();
    for (OcclusionKind kind : kinds) {
      CalibrationCell cell;
      cell.kind = kind;
      cell.degree = degree;
      cell.samples = samples_per_cell;
      double sum = 0.0, sum_sq = 0.0, frac = 0.0;
      for (int i = 0; i < samples_per_cell; ++i) {
        const auto set = generate({kind, degree, 0}, bbox, image, library, split, rng, params);
        const auto m = measure_degree(set, bbox);
        const double c = static_cast<double>(m.occluded_pixel_count);
        sum += c;
        sum_sq += c * c;
        frac += m.occluded_fraction;
        cell.max_abs_error = std::max(cell.max_abs_error, std::abs(m.occluded_fraction - degree));
      }
      cell.mean_count = sum / samples_per_cell;
      cell.std_count = std::sqrt(std::max(0.0, sum_sq / samples_per_cell - cell.mean_count * cell.mean_count));
      cell.mean_fraction = frac / samples_per_cell;
      report.cells.push_back(cell);
    }
    double cross = 0.0;
    for (std::size_t i = first; i < report.cells.size(); ++i) cross += report.cells[i].mean_count;
    cross /= static_cast<double>(report.cells.size() - first);
    for (std::size_t i = first; i < report.cells.size(); ++i) {
      auto& c = report.cells[i];
      c.relative_deviation = cross > 0.0 ? std::abs(c.mean_count - cross) / cross : 0.0;
      c.flagged = c.relative_deviation > report.deviation_threshold;
    }
  }
  return report;
}

}  // namespace occbench
