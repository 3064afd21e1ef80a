#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "occbench/error.hpp"
#include "occbench/occlusion.hpp"
#include "occbench/random.hpp"
#include "test_support.hpp"

namespace occbench {
namespace {

const ImageSize kImage{256, 256};
const BoundingBox kBbox{64.0, 32.0, 128.0, 192.0};

// Pixel-count oracle: visits every pixel of the bbox and asks every mask
// whether it covers that pixel with alpha >= 128.
DegreeMeasurement count_pixels(const OccluderMaskSet& set, const BoundingBox& b) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(b.x)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(b.y)));
  const int x1 = std::min(set.image_width, static_cast<int>(std::ceil(b.x + b.w)));
  const int y1 = std::min(set.image_height, static_cast<int>(std::ceil(b.y + b.h)));
  DegreeMeasurement m;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      ++m.bbox_pixel_count;
      for (const auto& mask : set.masks) {
        const int mx = x - mask.x0, my = y - mask.y0;
        if (mx >= 0 && my >= 0 && mx < mask.alpha.width() && my < mask.alpha.height() &&
            mask.alpha.at(mx, my) >= 128) {
          ++m.occluded_pixel_count;
          break;
        }
      }
    }
  }
  m.occluded_fraction = static_cast<double>(m.occluded_pixel_count) / m.bbox_pixel_count;
  return m;
}

OccluderMask rect_mask(int x0, int y0, int w, int h, std::uint8_t alpha = 255) {
  return {x0, y0, AlphaMap(w, h, alpha), std::nullopt};
}

OccluderMaskSet mask_set(std::vector<OccluderMask> masks, ImageSize image = kImage) {
  OccluderMaskSet s;
  s.image_width = image.width;
  s.image_height = image.height;
  s.kind = OcclusionKind::rectangles;
  s.masks = std::move(masks);
  return s;
}

const ObjectLibrary& library() {
  static const ObjectLibrary lib = ObjectLibrary::synthetic(12, 6, 99);
  return lib;
}

OccluderMaskSet make(OcclusionKind kind, double degree, std::uint64_t seed, const BoundingBox& b = kBbox,
                     LibrarySplit split = LibrarySplit::test) {
  return generate({kind, degree, seed}, b, kImage, &library(), split);
}

// Each row and column of a convex shape's support is one contiguous run.
bool rows_and_columns_contiguous(const AlphaMap& a) {
  auto runs_ok = [&](bool by_row) {
    const int outer = by_row ? a.height() : a.width();
    const int inner = by_row ? a.width() : a.height();
    for (int o = 0; o < outer; ++o) {
      int runs = 0;
      bool prev = false;
      for (int i = 0; i < inner; ++i) {
        const bool on = (by_row ? a.at(i, o) : a.at(o, i)) >= 128;
        if (on && !prev) ++runs;
        prev = on;
      }
      if (runs > 1) return false;
    }
    return true;
  };
  return runs_ok(true) && runs_ok(false);
}

TEST(OcclusionKind, ParseRoundTrip) {
  for (auto k : {OcclusionKind::none, OcclusionKind::circles, OcclusionKind::single_rectangle,
                 OcclusionKind::rectangles, OcclusionKind::bars, OcclusionKind::objects, OcclusionKind::mixture}) {
    EXPECT_EQ(parse_occlusion_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_occlusion_kind("triangles"), ValidationError);
  EXPECT_THROW((OcclusionSpec{OcclusionKind::circles, 0.71, 0}.validate()), ValidationError);
  EXPECT_THROW((OcclusionSpec{OcclusionKind::circles, -0.1, 0}.validate()), ValidationError);
}

TEST(Generate, ZeroTargetIsEmpty) {
  for (auto k : kOccluderFamilies) {
    const auto s = make(k, 0.0, 1);
    EXPECT_TRUE(s.masks.empty());
    EXPECT_EQ(measure_degree(s, kBbox).occluded_pixel_count, 0);
  }
  EXPECT_TRUE(make(OcclusionKind::none, 0.5, 1).masks.empty());
}

TEST(Generate, RectanglesOn100x100HitTarget) {
  const BoundingBox b{70, 60, 100, 100};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = make(OcclusionKind::rectangles, 0.30, seed, b);
    const auto m = count_pixels(s, b);
    EXPECT_EQ(m.bbox_pixel_count, 10000);
    EXPECT_GE(m.occluded_fraction, 0.28) << "seed " << seed;
    EXPECT_LE(m.occluded_fraction, 0.32) << "seed " << seed;
  }
}

TEST(Generate, EveryKindWithinTolerance) {
  for (auto k : {OcclusionKind::circles, OcclusionKind::single_rectangle, OcclusionKind::rectangles,
                 OcclusionKind::bars, OcclusionKind::objects, OcclusionKind::mixture}) {
    for (double degree : {0.1, 0.4, 0.7}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = make(k, degree, seed);
        const auto oracle = count_pixels(s, kBbox);
        const auto m = measure_degree(s, kBbox);
        EXPECT_EQ(m.occluded_pixel_count, oracle.occluded_pixel_count);
        EXPECT_EQ(m.bbox_pixel_count, oracle.bbox_pixel_count);
        EXPECT_LE(std::abs(oracle.occluded_fraction - degree), 0.02)
            << to_string(k) << " degree " << degree << " seed " << seed;
      }
    }
  }
}

TEST(Generate, FractionalBboxClippedToImage) {
  const BoundingBox b{200.4, -10.7, 90.2, 120.9};  // hangs off the right and top edges
  for (auto k : kOccluderFamilies) {
    const auto s = make(k, 0.3, 5, b);
    const auto oracle = count_pixels(s, b);
    EXPECT_EQ(measure_degree(s, b).occluded_pixel_count, oracle.occluded_pixel_count);
    EXPECT_LE(std::abs(oracle.occluded_fraction - 0.3), 0.02) << to_string(k);
  }
}

TEST(Generate, SingleRectangleIsOneFullRectangle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = make(OcclusionKind::single_rectangle, 0.35, seed);
    ASSERT_EQ(s.masks.size(), 1u);
    const auto& a = s.masks[0].alpha;
    for (auto v : a.bytes()) ASSERT_EQ(v, 255);
    EXPECT_EQ(s.fill, Fill::solid_black);
  }
}

TEST(Generate, GeometricShapesAreConvexSolidBlack) {
  for (auto k : {OcclusionKind::circles, OcclusionKind::rectangles, OcclusionKind::bars}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = make(k, 0.3, seed);
      EXPECT_EQ(s.fill, Fill::solid_black);
      EXPECT_TRUE(s.source_ids().empty());
      for (const auto& m : s.masks) EXPECT_TRUE(rows_and_columns_contiguous(m.alpha)) << to_string(k);
    }
  }
}

TEST(Generate, CirclesAreRound) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& m : make(OcclusionKind::circles, 0.2, seed).masks) {
      const auto& a = m.alpha;
      // Unclipped disks only.
      if (m.x0 <= 0 || m.y0 <= 0 || m.x0 + a.width() >= kImage.width || m.y0 + a.height() >= kImage.height) continue;
      if (a.width() < 12) continue;
      int area = 0;
      for (auto v : a.bytes()) area += v >= 128;
      const double r = 0.5 * a.width();
      EXPECT_NEAR(area / (M_PI * r * r), 1.0, 0.15);
      EXPECT_LE(std::abs(a.width() - a.height()), 1);
      ++checked;
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(Generate, BarsHaveVariedOrientation) {
  int oblique = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (const auto& m : make(OcclusionKind::bars, 0.2, seed).masks) {
      int area = 0;
      for (auto v : m.alpha.bytes()) area += v >= 128;
      const double fill = static_cast<double>(area) / (m.alpha.width() * m.alpha.height());
      if (fill < 0.5) ++oblique;
      ++total;
    }
  }
  EXPECT_GT(oblique, total / 3);
}

TEST(Generate, ObjectsUseRequestedSplitOnly) {
  std::set<std::string> train_ids, test_ids;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto tr = make(OcclusionKind::objects, 0.3, seed, kBbox, LibrarySplit::train);
    const auto te = make(OcclusionKind::objects, 0.3, seed, kBbox, LibrarySplit::test);
    EXPECT_EQ(tr.fill, Fill::object_texture);
    for (const auto& id : tr.source_ids()) {
      EXPECT_EQ(library().find(id)->split, LibrarySplit::train);
      train_ids.insert(id);
    }
    for (const auto& id : te.source_ids()) {
      EXPECT_EQ(library().find(id)->split, LibrarySplit::test);
      test_ids.insert(id);
    }
  }
  for (const auto& id : train_ids) EXPECT_EQ(test_ids.count(id), 0u);
  EXPECT_GT(train_ids.size(), 1u);
  EXPECT_GT(test_ids.size(), 1u);
}

TEST(Generate, MixtureDelegatesToEveryFamily) {
  std::set<OcclusionKind> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = make(OcclusionKind::mixture, 0.2, seed);
    EXPECT_NE(s.kind, OcclusionKind::mixture);
    seen.insert(s.kind);
  }
  EXPECT_EQ(seen.size(), kOccluderFamilies.size());
}

TEST(Generate, Deterministic) {
  for (auto k : kOccluderFamilies) {
    EXPECT_TRUE(make(k, 0.4, 77) == make(k, 0.4, 77));
    EXPECT_FALSE(make(k, 0.4, 77) == make(k, 0.4, 78));
  }
  Rng a(5), b(5);
  const OcclusionSpec spec{OcclusionKind::bars, 0.3, 0};
  EXPECT_TRUE(generate(spec, kBbox, kImage, nullptr, LibrarySplit::test, a) ==
              generate(spec, kBbox, kImage, nullptr, LibrarySplit::test, b));
}

TEST(Generate, LibraryRequirements) {
  EXPECT_THROW(generate({OcclusionKind::objects, 0.3, 1}, kBbox, kImage, nullptr, LibrarySplit::test), ValidationError);
  EXPECT_THROW(generate({OcclusionKind::mixture, 0.3, 1}, kBbox, kImage, nullptr, LibrarySplit::test), ValidationError);
  const ObjectLibrary train_only = ObjectLibrary::synthetic(3, 0, 1);
  EXPECT_THROW(generate({OcclusionKind::objects, 0.3, 1}, kBbox, kImage, &train_only, LibrarySplit::test), ComputeError);
  EXPECT_NO_THROW(generate({OcclusionKind::circles, 0.3, 1}, kBbox, kImage, nullptr, LibrarySplit::test));
}

TEST(MeasureDegree, FullAndHalfCover) {
  const BoundingBox b{10, 20, 40, 30};
  EXPECT_EQ(measure_degree(mask_set({rect_mask(0, 0, 100, 100)}), b).occluded_fraction, 1.0);
  const auto half = measure_degree(mask_set({rect_mask(10, 20, 20, 30)}), b);
  EXPECT_EQ(half.occluded_fraction, 0.5);
  EXPECT_EQ(half.occluded_pixel_count, 600);
  EXPECT_EQ(half.bbox_pixel_count, 1200);
  EXPECT_EQ(measure_degree(mask_set({rect_mask(10, 20, 20, 30, 127)}), b).occluded_pixel_count, 0);
  EXPECT_EQ(measure_degree(mask_set({rect_mask(10, 20, 20, 30, 128)}), b).occluded_pixel_count, 600);
}

TEST(MeasureDegree, OverlapCountedOnce) {
  const BoundingBox b{0, 0, 100, 100};
  const auto s = mask_set({rect_mask(0, 0, 60, 100), rect_mask(40, 0, 60, 100)});
  EXPECT_EQ(measure_degree(s, b).occluded_pixel_count, 10000);
  EXPECT_EQ(count_pixels(s, b).occluded_pixel_count, 10000);
}

TEST(MeasureDegree, UnionBoundedBySumEqualityIffDisjoint) {
  Rng rng(31);
  const BoundingBox b{0, 0, 128, 128};
  int equal_cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<OccluderMask> masks;
    const int n = uniform_int(rng, 1, 4);
    for (int i = 0; i < n; ++i) {
      masks.push_back(rect_mask(uniform_int(rng, -10, 120), uniform_int(rng, -10, 120), uniform_int(rng, 1, 30),
                                uniform_int(rng, 1, 30)));
    }
    std::int64_t sum = 0;
    for (const auto& m : masks) sum += measure_degree(mask_set({m}), b).occluded_pixel_count;
    const auto together = measure_degree(mask_set(masks), b).occluded_pixel_count;
    EXPECT_EQ(together, count_pixels(mask_set(masks), b).occluded_pixel_count);
    EXPECT_LE(together, sum);
    // Overlap inside the bbox, checked pixel by pixel.
    bool overlap = false;
    for (int y = 0; y < 128 && !overlap; ++y) {
      for (int x = 0; x < 128 && !overlap; ++x) {
        int hits = 0;
        for (const auto& m : masks) {
          hits += x >= m.x0 && y >= m.y0 && x < m.x0 + m.alpha.width() && y < m.y0 + m.alpha.height();
        }
        overlap = hits > 1;
      }
    }
    EXPECT_EQ(together == sum, !overlap);
    equal_cases += together == sum;
  }
  EXPECT_GT(equal_cases, 10);
}

TEST(Composite, EmptySetLeavesImage) {
  const Image img(32, 32, {10, 20, 30});
  EXPECT_TRUE(composite(img, mask_set({}, {32, 32}), nullptr) == img);
}

TEST(Composite, FullBlackMask) {
  const Image img(32, 32, {10, 20, 30});
  EXPECT_TRUE(composite(img, mask_set({rect_mask(0, 0, 32, 32)}, {32, 32}), nullptr) == Image(32, 32));
}

TEST(Composite, ObjectBlendEndpoints) {
  RgbaImage obj{Image(4, 4, {200, 100, 50}), AlphaMap(4, 4, 0)};
  obj.alpha.at(1, 1) = 255;
  const ObjectLibrary lib({ObjectEntry{"obj", obj, LibrarySplit::test}});
  OccluderMaskSet s = mask_set({}, {16, 16});
  s.fill = Fill::object_texture;
  s.masks.push_back({5, 6, obj.alpha, ObjectPlacement{"obj", 5, 6, 4, 4}});
  const Image img(16, 16, {1, 2, 3});
  const Image out = composite(img, s, &lib);
  EXPECT_EQ(out.at(6, 7), (Rgb{200, 100, 50}));
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (x != 6 || y != 7) EXPECT_EQ(out.at(x, y), (Rgb{1, 2, 3}));
    }
  }
  s.masks[0].object->id = "missing";
  EXPECT_THROW(composite(img, s, &lib), ValidationError);
}

TEST(Composite, OnlyMaskedPixelsChange) {
  Rng rng(32);
  Image img(256, 256);
  for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(uniform_int(rng, 1, 255));
  for (auto k : kOccluderFamilies) {
    const auto s = make(k, 0.3, 8);
    const auto cov = s.coverage();
    const Image out = composite(img, s, &library());
    for (int y = 0; y < 256; ++y) {
      for (int x = 0; x < 256; ++x) {
        bool touched = false;
        for (const auto& m : s.masks) {
          const int mx = x - m.x0, my = y - m.y0;
          touched = touched || (mx >= 0 && my >= 0 && mx < m.alpha.width() && my < m.alpha.height() &&
                                m.alpha.at(mx, my) > 0);
        }
        if (!touched) ASSERT_EQ(out.at(x, y), img.at(x, y)) << to_string(k);
        if (cov.at(x, y) == 255 && s.fill == Fill::solid_black) ASSERT_EQ(out.at(x, y), (Rgb{0, 0, 0}));
      }
    }
  }
}

TEST(Policy, DegenerateProbabilities) {
  const Image img(256, 256, {90, 90, 90});
  Rng rng(33);
  for (int i = 0; i < 50; ++i) {
    const auto never = apply_policy({{OcclusionKind::circles, 0.3, 0}, 0.0}, img, kBbox, nullptr, LibrarySplit::train, rng);
    EXPECT_FALSE(never.applied);
    EXPECT_TRUE(never.image == img);
    const auto always = apply_policy({{OcclusionKind::circles, 0.3, 0}, 1.0}, img, kBbox, nullptr, LibrarySplit::train, rng);
    EXPECT_TRUE(always.applied);
    EXPECT_NEAR(always.degree.occluded_fraction, 0.3, 0.02);
  }
  EXPECT_THROW(apply_policy({{OcclusionKind::circles, 0.3, 0}, 1.5}, img, kBbox, nullptr, LibrarySplit::train, rng),
               ValidationError);
}

TEST(Policy, HalfProbabilityConcentrates) {
  const Image img(64, 64, {90, 90, 90});
  const BoundingBox b{16, 8, 32, 48};
  Rng rng(34);
  int applied = 0;
  for (int i = 0; i < 10000; ++i) {
    applied += apply_policy({{OcclusionKind::rectangles, 0.2, 0}, 0.5}, img, b, nullptr, LibrarySplit::train, rng).applied;
  }
  EXPECT_GE(applied, 4800);
  EXPECT_LE(applied, 5200);
}

TEST(Calibration, SingleKindHasZeroDeviation) {
  Rng rng(35);
  const auto r = calibrate_distributions({OcclusionKind::bars}, {0.4}, kBbox, kImage, 30, nullptr,
                                         LibrarySplit::test, rng);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].relative_deviation, 0.0);
  EXPECT_FALSE(r.any_flagged());
}

TEST(Calibration, ZeroDegreeMeansZero) {
  Rng rng(36);
  const std::vector<OcclusionKind> kinds(kOccluderFamilies.begin(), kOccluderFamilies.end());
  const auto r = calibrate_distributions(kinds, {0.0}, kBbox, kImage, 30, &library(), LibrarySplit::test, rng);
  for (const auto& c : r.cells) EXPECT_EQ(c.mean_count, 0.0);
  EXPECT_FALSE(r.any_flagged());
}

TEST(Calibration, AllKindsAtThirtyPercentAgree) {
  Rng rng(37);
  const std::vector<OcclusionKind> kinds(kOccluderFamilies.begin(), kOccluderFamilies.end());
  const auto r = calibrate_distributions(kinds, {0.3}, kBbox, kImage, 200, &library(), LibrarySplit::test, rng);
  ASSERT_EQ(r.cells.size(), kinds.size());
  for (const auto& c : r.cells) {
    EXPECT_LE(c.relative_deviation, 0.10) << to_string(c.kind);
    EXPECT_LE(c.max_abs_error, 0.02) << to_string(c.kind);
    EXPECT_EQ(c.samples, 200);
  }
  EXPECT_FALSE(r.any_flagged());
  EXPECT_THROW(calibrate_distributions(kinds, {0.3}, kBbox, kImage, 29, &library(), LibrarySplit::test, rng),
               ValidationError);
}

TEST(Library, RejectsDuplicatesAndEmptyMasks) {
  RgbaImage obj{Image(4, 4), AlphaMap(4, 4, 255)};
  EXPECT_THROW(ObjectLibrary({{"a", obj, LibrarySplit::train}, {"a", obj, LibrarySplit::test}}), ValidationError);
  RgbaImage empty{Image(4, 4), AlphaMap(4, 4, 0)};
  EXPECT_THROW(ObjectLibrary({{"b", empty, LibrarySplit::train}}), ValidationError);
}

TEST(Library, SaveLoadRoundTrip) {
  const auto dir = testing::scratch_dir();
  library().save(dir);
  const auto back = ObjectLibrary::load(dir);
  ASSERT_EQ(back.entries().size(), library().entries().size());
  for (std::size_t i = 0; i < back.entries().size(); ++i) {
    EXPECT_EQ(back.entries()[i].id, library().entries()[i].id);
    EXPECT_EQ(back.entries()[i].split, library().entries()[i].split);
    EXPECT_TRUE(back.entries()[i].bitmap.alpha == library().entries()[i].bitmap.alpha);
    EXPECT_TRUE(back.entries()[i].bitmap.rgb == library().entries()[i].bitmap.rgb);
  }
  EXPECT_EQ(library().split(LibrarySplit::train).size(), 12u);
  EXPECT_EQ(library().split(LibrarySplit::test).size(), 6u);
  EXPECT_THROW(ObjectLibrary::load(dir / "missing"), IoError);
}

}  // namespace
}  // namespace occbench
