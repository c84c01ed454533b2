#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "sguie/regions.hpp"
#include "support.hpp"

using namespace sguie;

namespace {

const std::uint8_t kColors[8][3] = {{0, 0, 0},     {0, 0, 255},   {0, 255, 0},   {0, 255, 255},
                                    {255, 0, 0},   {255, 0, 255}, {255, 255, 0}, {255, 255, 255}};

void paint(Rgb8Image& img, int id, std::size_t y0, std::size_t x0, std::size_t y1, std::size_t x1) {
  for (std::size_t y = y0; y < y1; ++y) {
    for (std::size_t x = x0; x < x1; ++x) img.set(y, x, kColors[id][0], kColors[id][1], kColors[id][2]);
  }
}

/// Full-image 0/1 mask of one region.
std::vector<std::uint8_t> full_mask(const SemanticRegion& r, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> m(h * w, 0);
  for (std::size_t y = 0; y < r.bbox.height(); ++y) {
    for (std::size_t x = 0; x < r.bbox.width(); ++x) m[(r.bbox.y0 + y) * w + r.bbox.x0 + x] = r.mask[y * r.bbox.width() + x];
  }
  return m;
}

}  // namespace

TEST(DecodeMask, AllBlackIsBackground) {
  const auto m = decode_mask(Rgb8Image(6, 7));
  for (auto l : m.labels) EXPECT_EQ(l, 0);
  EXPECT_TRUE(extract_regions(m, 6, 7).regions.empty());
}

TEST(DecodeMask, YellowBlockIsFish) {
  Rgb8Image img(32, 32);
  paint(img, 6, 5, 5, 15, 15);
  const auto m = decode_mask(img);
  std::size_t fish = 0, other = 0;
  for (auto l : m.labels) (l == 6 ? fish : other) += 1;
  EXPECT_EQ(fish, 100u);
  EXPECT_EQ(other, 32u * 32u - 100u);
  EXPECT_EQ(Palette::suim().name(6), "fish_vertebrates");
}

TEST(DecodeMask, BinarizesAt127) {
  Rgb8Image img(1, 3);
  img.set(0, 0, 250, 250, 4);
  img.set(0, 1, 128, 127, 0);
  img.set(0, 2, 127, 127, 128);
  const auto m = decode_mask(img);
  EXPECT_EQ(m.labels[0], 6);
  EXPECT_EQ(m.labels[1], 4);
  EXPECT_EQ(m.labels[2], 1);
}

TEST(DecodeMask, UnknownColorListsOffenders) {
  Rgb8Image img(2, 2);
  img.set(0, 0, 200, 200, 200);
  Palette p({{0, 0, 0, 0, "background"}, {255, 255, 0, 1, "fish"}});
  try {
    decode_mask(img, p);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("255,255,255"), std::string::npos) << e.what();
  }
}

TEST(ExtractRegions, SingleBlob) {
  Rgb8Image img(24, 24);
  paint(img, 2, 5, 5, 15, 15);
  const auto set = extract_regions(decode_mask(img), 24, 24);
  ASSERT_EQ(set.regions.size(), 1u);
  const auto& r = set.regions[0];
  EXPECT_EQ(r.category_id, 2);
  EXPECT_EQ(r.bbox, (Box{5, 5, 15, 15}));
  EXPECT_EQ(r.mask.size(), 100u);
  for (auto v : r.mask) EXPECT_EQ(v, 1);
}

TEST(ExtractRegions, TwoCategoriesTwoRegions) {
  Rgb8Image img(30, 30);
  paint(img, 5, 0, 0, 8, 8);
  paint(img, 1, 12, 14, 20, 29);
  const auto set = extract_regions(decode_mask(img), 30, 30);
  ASSERT_EQ(set.regions.size(), 2u);
  EXPECT_EQ(set.regions[0].category_id, 1);
  EXPECT_EQ(set.regions[1].category_id, 5);
  EXPECT_EQ(set.regions[0].bbox, (Box{12, 14, 20, 29}));
}

TEST(ExtractRegions, UnionBoundingBox) {
  Rgb8Image img(30, 30);
  paint(img, 3, 0, 0, 4, 4);
  paint(img, 3, 20, 20, 24, 24);
  const auto set = extract_regions(decode_mask(img), 30, 30);
  ASSERT_EQ(set.regions.size(), 1u);
  const auto& r = set.regions[0];
  EXPECT_EQ(r.bbox, (Box{0, 0, 24, 24}));
  EXPECT_EQ(r.mask.size(), 24u * 24u);
  for (std::size_t y = 0; y < 24; ++y) {
    for (std::size_t x = 0; x < 24; ++x) {
      const bool on = (y < 4 && x < 4) || (y >= 20 && x >= 20);
      EXPECT_EQ(r.mask[y * 24 + x], on ? 1 : 0) << y << "," << x;
    }
  }
  EXPECT_EQ(r.pixel_count(), 32u);
}

TEST(ExtractRegions, SmallRegionsDroppedAndReported) {
  Rgb8Image img(20, 20);
  paint(img, 6, 0, 0, 3, 10);   // 3 rows high: dropped
  paint(img, 7, 10, 10, 14, 14);
  const auto m = decode_mask(img);
  const auto set = extract_regions(m, 20, 20);
  ASSERT_EQ(set.regions.size(), 1u);
  EXPECT_EQ(set.regions[0].category_id, 7);
  ASSERT_EQ(set.dropped.size(), 1u);
  EXPECT_EQ(set.dropped[0].category_id, 6);
  EXPECT_EQ(set.dropped[0].pixels, 30u);
  EXPECT_EQ(set.dropped[0].bbox, (Box{0, 0, 3, 10}));
}

TEST(ExtractRegions, SizeMismatch) {
  EXPECT_THROW(extract_regions(decode_mask(Rgb8Image(4, 5)), 5, 4), ShapeError);
}

TEST(CoverageReport, Examples) {
  Rgb8Image none(16, 16);
  paint(none, 1, 0, 0, 8, 8);
  auto m = decode_mask(none);
  EXPECT_DOUBLE_EQ(coverage_report(extract_regions(m, 16, 16), m), 1.0);

  Rgb8Image tiny(16, 16);
  paint(tiny, 1, 0, 0, 2, 2);
  paint(tiny, 2, 10, 10, 13, 13);
  m = decode_mask(tiny);
  EXPECT_DOUBLE_EQ(coverage_report(extract_regions(m, 16, 16), m), 0.0);

  Rgb8Image half(16, 16);
  paint(half, 1, 0, 0, 4, 4);
  paint(half, 2, 8, 0, 9, 16);  // 1x16, same 16 pixels, dropped
  m = decode_mask(half);
  EXPECT_DOUBLE_EQ(coverage_report(extract_regions(m, 16, 16), m), 0.5);
}

TEST(ExtractRegions, RandomMasksRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t h = 20 + rng() % 40, w = 20 + rng() % 40;
    Rgb8Image img(h, w);
    const int rects = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < rects; ++k) {
      const int id = static_cast<int>(rng() % 8);
      const std::size_t y0 = rng() % h, x0 = rng() % w;
      const std::size_t y1 = std::min(h, y0 + 1 + rng() % 15), x1 = std::min(w, x0 + 1 + rng() % 15);
      paint(img, id, y0, x0, y1, x1);
    }
    const SemanticMask m = decode_mask(img);
    const RegionSet set = extract_regions(m, h, w);

    // Expected: label support with dropped categories cleared.
    SemanticMask expected = m;
    for (auto& l : expected.labels) {
      for (const auto& d : set.dropped) {
        if (l == d.category_id) l = 0;
      }
    }
    EXPECT_EQ(paste_regions(set.regions, h, w), expected) << "trial " << trial;

    for (std::size_t a = 0; a < set.regions.size(); ++a) {
      const auto& r = set.regions[a];
      if (a > 0) EXPECT_LT(set.regions[a - 1].category_id, r.category_id);
      const std::size_t bw = r.bbox.width(), bh = r.bbox.height();
      bool top = false, bottom = false, left = false, right = false;
      for (std::size_t x = 0; x < bw; ++x) {
        top |= r.mask[x] != 0;
        bottom |= r.mask[(bh - 1) * bw + x] != 0;
      }
      for (std::size_t y = 0; y < bh; ++y) {
        left |= r.mask[y * bw] != 0;
        right |= r.mask[y * bw + bw - 1] != 0;
      }
      EXPECT_TRUE(top && bottom && left && right) << "trial " << trial << " category " << r.category_id;
      const auto fa = full_mask(r, h, w);
      for (std::size_t b = a + 1; b < set.regions.size(); ++b) {
        const auto fb = full_mask(set.regions[b], h, w);
        for (std::size_t i = 0; i < fa.size(); ++i) ASSERT_FALSE(fa[i] && fb[i]);
      }
    }
    const RegionSet again = extract_regions(m, h, w);
    ASSERT_EQ(again.regions.size(), set.regions.size());
    for (std::size_t a = 0; a < set.regions.size(); ++a) {
      EXPECT_EQ(again.regions[a].bbox, set.regions[a].bbox);
      EXPECT_EQ(again.regions[a].mask, set.regions[a].mask);
    }
  }
}

TEST(Palette, JsonOverride) {
  const auto p = Palette::from_json(nlohmann::ordered_json::parse(
      R"({"0,0,0": "water", "255,0,0": "coral", "0,255,0": {"id": 9, "name": "kelp"}, "0,0,255": 4})"));
  ASSERT_EQ(p.entries().size(), 4u);
  EXPECT_EQ(p.find(0, 0, 0)->id, 0);
  EXPECT_EQ(p.find(255, 0, 0)->id, 1);
  EXPECT_EQ(p.find(0, 255, 0)->id, 9);
  EXPECT_EQ(p.name(9), "kelp");
  EXPECT_EQ(p.find(0, 0, 255)->id, 4);

  Rgb8Image img(8, 8);
  paint(img, 2, 0, 0, 4, 4);
  const auto m = decode_mask(img, p);
  EXPECT_EQ(m.at(0, 0), 9);
  EXPECT_EQ(extract_regions(m, 8, 8, p).regions.at(0).name, "kelp");

  EXPECT_THROW(Palette::from_json(nlohmann::ordered_json::parse(R"({"1,2": "x"})")), FormatError);
  EXPECT_THROW(Palette::from_json(nlohmann::ordered_json::parse(R"({"0,0,0": 1, "1,1,1": 1})")), FormatError);
  EXPECT_THROW(Palette::from_json(nlohmann::ordered_json::parse("[1]")), FormatError);

  const auto dir = sguie::testing::temp_dir("palette");
  std::ofstream(dir / "p.json") << R"({"0,0,0": "water", "255,255,0": "fish"})";
  EXPECT_EQ(Palette::load(dir / "p.json").find(255, 255, 0)->id, 1);
  EXPECT_THROW(Palette::load(dir / "missing.json"), FormatError);
}
