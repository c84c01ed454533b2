#pragma once

// Color-coded semantic masks: palette lookup, per-category union regions,
// and the crops the semantic branch consumes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "sguie/errors.hpp"
#include "sguie/image.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

struct Category {
  std::uint8_t r = 0, g = 0, b = 0;
  int id = 0;
  std::string name;
};

/// Color to category mapping. Id 0 is background and never yields a region.
class Palette {
 public:
  Palette() = default;
  explicit Palette(std::vector<Category> entries) : entries_(std::move(entries)) {
    std::set<std::tuple<int, int, int>> colors;
    std::set<int> ids;
    for (const auto& e : entries_) {
      if (!colors.insert({e.r, e.g, e.b}).second) throw FormatError("palette: duplicate color " + color_key(e.r, e.g, e.b));
      if (e.id < 0 || e.id > 255) throw FormatError("palette: id out of range for " + e.name);
      if (!ids.insert(e.id).second) throw FormatError("palette: duplicate id " + std::to_string(e.id));
    }
  }

  /// SUIM convention after binarization.
  static Palette suim() {
    return Palette({{0, 0, 0, 0, "background"},
                    {0, 0, 255, 1, "human_divers"},
                    {0, 255, 0, 2, "aquatic_plants"},
                    {0, 255, 255, 3, "wrecks_ruins"},
                    {255, 0, 0, 4, "robots"},
                    {255, 0, 255, 5, "reefs_invertebrates"},
                    {255, 255, 0, 6, "fish_vertebrates"},
                    {255, 255, 255, 7, "sea_floor_rocks"}});
  }

  /// JSON object mapping "R,G,B" to an id, a name, or {"id": .., "name": ..}.
  /// Bare names receive ids in document order, background ("0,0,0") first.
  static Palette from_json(const nlohmann::ordered_json& doc) {
    if (!doc.is_object()) throw FormatError("palette: expected a JSON object");
    std::vector<Category> entries;
    int next_id = 0;
    for (const auto& [key, value] : doc.items()) {
      Category c;
      int r = 0, g = 0, b = 0;
      char comma1 = 0, comma2 = 0;
      std::istringstream is(key);
      if (!(is >> r >> comma1 >> g >> comma2 >> b) || comma1 != ',' || comma2 != ',' || r < 0 || r > 255 || g < 0 ||
          g > 255 || b < 0 || b > 255) {
        throw FormatError("palette: bad color key '" + key + "'");
      }
      c.r = static_cast<std::uint8_t>(r);
      c.g = static_cast<std::uint8_t>(g);
      c.b = static_cast<std::uint8_t>(b);
      if (value.is_number_integer()) {
        c.id = value.get<int>();
        c.name = "category_" + std::to_string(c.id);
      } else if (value.is_string()) {
        c.name = value.get<std::string>();
        c.id = (r == 0 && g == 0 && b == 0) ? 0 : ++next_id;
      } else if (value.is_object()) {
        c.id = value.at("id").get<int>();
        c.name = value.value("name", "category_" + std::to_string(c.id));
      } else {
        throw FormatError("palette: bad value for '" + key + "'");
      }
      entries.push_back(c);
    }
    return Palette(std::move(entries));
  }

  static Palette load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open palette " + path.string());
    try {
      return from_json(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("palette " + path.string() + ": " + e.what());
    }
  }

  const std::vector<Category>& entries() const { return entries_; }

  const Category* find(std::uint8_t r, std::uint8_t g, std::uint8_t b) const {
    for (const auto& e : entries_) {
      if (e.r == r && e.g == g && e.b == b) return &e;
    }
    return nullptr;
  }

  std::string name(int id) const {
    for (const auto& e : entries_) {
      if (e.id == id) return e.name;
    }
    return "category_" + std::to_string(id);
  }

  static std::string color_key(int r, int g, int b) {
    return std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b);
  }

 private:
  std::vector<Category> entries_;
};

/// Per-pixel category ids, row-major.
struct SemanticMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  friend bool operator==(const SemanticMask&, const SemanticMask&) = default;
};

/// Channels above 127 become 255, the rest 0, before palette lookup.
inline SemanticMask decode_mask(const Rgb8Image& img, const Palette& palette = Palette::suim()) {
  SemanticMask m{img.height, img.width, std::vector<std::uint8_t>(img.height * img.width)};
  std::set<std::tuple<int, int, int>> unknown;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const std::uint8_t r = img.pixels[i * 3] > 127 ? 255 : 0;
    const std::uint8_t g = img.pixels[i * 3 + 1] > 127 ? 255 : 0;
    const std::uint8_t b = img.pixels[i * 3 + 2] > 127 ? 255 : 0;
    const Category* c = palette.find(r, g, b);
    if (c == nullptr) {
      unknown.insert({r, g, b});
      continue;
    }
    m.labels[i] = static_cast<std::uint8_t>(c->id);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& [r, g, b] : unknown) list += (list.empty() ? "" : "; ") + Palette::color_key(r, g, b);
    throw FormatError("decode_mask: colors not in palette after binarization: " + list);
  }
  return m;
}

/// All pixels of one category: the tight bounding box of their union and
/// a binary mask over that box.
struct SemanticRegion {
  int category_id = 0;
  std::string name;
  Box bbox;
  std::vector<std::uint8_t> mask;  // bbox.height() x bbox.width(), values 0/1

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }

  template <typename T>
  Tensor<T> mask_tensor() const {
    std::vector<T> v(mask.begin(), mask.end());
    return Tensor<T>(Shape{1, 1, bbox.height(), bbox.width()}, std::move(v));
  }
};

struct DroppedRegion {
  int category_id = 0;
  Box bbox;
  std::size_t pixels = 0;
};

struct RegionSet {
  std::vector<SemanticRegion> regions;  // sorted by category id
  std::vector<DroppedRegion> dropped;   // bbox smaller than the minimum side
};

inline constexpr std::size_t kMinRegionSide = 4;

inline RegionSet extract_regions(const SemanticMask& mask, std::size_t image_height, std::size_t image_width,
                                 const Palette& palette = Palette::suim()) {
  if (mask.height != image_height || mask.width != image_width) {
    throw ShapeError("extract_regions: mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                     " does not match image " + std::to_string(image_height) + "x" + std::to_string(image_width));
  }
  std::map<int, Box> boxes;
  std::map<int, std::size_t> counts;
  for (std::size_t y = 0; y < mask.height; ++y) {
    for (std::size_t x = 0; x < mask.width; ++x) {
      const int id = mask.at(y, x);
      if (id == 0) continue;
      auto [it, fresh] = boxes.try_emplace(id, Box{y, x, y + 1, x + 1});
      Box& b = it->second;
      if (!fresh) {
        b.y0 = std::min(b.y0, y);
        b.x0 = std::min(b.x0, x);
        b.y1 = std::max(b.y1, y + 1);
        b.x1 = std::max(b.x1, x + 1);
      }
      ++counts[id];
    }
  }
  RegionSet out;
  for (const auto& [id, b] : boxes) {
    if (b.height() < kMinRegionSide || b.width() < kMinRegionSide) {
      out.dropped.push_back({id, b, counts[id]});
      continue;
    }
    SemanticRegion r{id, palette.name(id), b, std::vector<std::uint8_t>(b.height() * b.width())};
    for (std::size_t y = 0; y < b.height(); ++y) {
      for (std::size_t x = 0; x < b.width(); ++x) r.mask[y * b.width() + x] = mask.at(b.y0 + y, b.x0 + x) == id;
    }
    out.regions.push_back(std::move(r));
  }
  return out;
}

template <typename T>
RegionSet extract_regions(const SemanticMask& mask, const Tensor<T>& image, const Palette& palette = Palette::suim()) {
  return extract_regions(mask, image.shape().h, image.shape().w, palette);
}

/// Fraction of non-background pixels covered by some region (1 when there
/// are none).
inline double coverage_report(const RegionSet& set, const SemanticMask& mask) {
  std::size_t foreground = 0;
  for (auto l : mask.labels) foreground += l != 0;
  if (foreground == 0) return 1.0;
  std::size_t covered = 0;
  for (const auto& r : set.regions) covered += r.pixel_count();
  return static_cast<double>(covered) / static_cast<double>(foreground);
}

/// Label canvas rebuilt from region masks; background elsewhere.
inline SemanticMask paste_regions(const std::vector<SemanticRegion>& regions, std::size_t height, std::size_t width) {
  SemanticMask m{height, width, std::vector<std::uint8_t>(height * width, 0)};
  for (const auto& r : regions) {
    for (std::size_t y = 0; y < r.bbox.height(); ++y) {
      for (std::size_t x = 0; x < r.bbox.width(); ++x) {
        if (r.mask[y * r.bbox.width() + x]) {
          m.labels[(r.bbox.y0 + y) * width + r.bbox.x0 + x] = static_cast<std::uint8_t>(r.category_id);
        }
      }
    }
  }
  return m;
}

}  // namespace sguie
