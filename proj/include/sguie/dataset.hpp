#pragma once

// Dataset layout: <root>/images/<id>.<ext> raw inputs, <root>/reference/<id>.<ext>
// enhanced targets, <root>/masks/<id>.<ext> color-coded semantic masks.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sguie/errors.hpp"
#include "sguie/image.hpp"
#include "sguie/regions.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

enum class Split { Train, Val, Test, Unassigned };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    default: return "unassigned";
  }
}

struct DatasetEntry {
  std::string id;
  std::filesystem::path raw;
  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> mask;
  Split split = Split::Unassigned;
  std::vector<std::string> flags;  // "missing reference", "missing mask"

  bool complete() const { return reference.has_value() && mask.has_value(); }
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;  // sorted by id

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [&](const DatasetEntry& e) { return e.split == s; }));
  }
  std::size_t flagged() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const DatasetEntry& e) { return !e.flags.empty(); }));
  }
  std::vector<const DatasetEntry*> split(Split s) const {
    std::vector<const DatasetEntry*> out;
    for (const auto& e : entries) {
      if (e.split == s) out.push_back(&e);
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["root"] = root.string();
    doc["counts"] = {{"total", entries.size()},
                     {"train", count(Split::Train)},
                     {"val", count(Split::Val)},
                     {"test", count(Split::Test)},
                     {"flagged", flagged()}};
    doc["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      nlohmann::ordered_json j;
      j["id"] = e.id;
      j["raw"] = e.raw.string();
      j["reference"] = e.reference ? nlohmann::ordered_json(e.reference->string()) : nlohmann::ordered_json(nullptr);
      j["mask"] = e.mask ? nlohmann::ordered_json(e.mask->string()) : nlohmann::ordered_json(nullptr);
      j["split"] = split_name(e.split);
      j["flags"] = e.flags;
      doc["entries"].push_back(std::move(j));
    }
    return doc;
  }
};

/// Explicit newline-delimited id lists take precedence; ids in neither list
/// go to train. Without lists, a seeded shuffle assigns the ratios.
struct SplitSpec {
  std::optional<std::filesystem::path> test_list;
  std::optional<std::filesystem::path> val_list;
  double test_ratio = 110.0 / 1635.0;
  double val_ratio = 0.0;
  std::uint64_t seed = 0;
};

inline std::set<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open split list " + path.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line.erase(line.find_last_not_of(" \t\r") + 1);
    line.erase(0, line.find_first_not_of(" \t"));
    if (!line.empty() && line[0] != '#') ids.insert(line);
  }
  return ids;
}

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

/// id -> path for the image files of one directory (absent directory: empty).
inline std::map<std::string, std::filesystem::path> index_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    if (!f.is_regular_file() || !is_image_file(f.path())) continue;
    const std::string id = f.path().stem().string();
    if (!out.emplace(id, f.path()).second) {
      throw FormatError("duplicate id '" + id + "' in " + dir.string() + " (" + out[id].filename().string() + ", " +
                        f.path().filename().string() + ")");
    }
  }
  return out;
}

}  // namespace detail

inline DatasetManifest scan_dataset(const std::filesystem::path& root, const SplitSpec& spec = {}) {
  if (!std::filesystem::is_directory(root)) throw FormatError("dataset root " + root.string() + " is not a directory");
  const auto raws = detail::index_dir(root / "images");
  if (raws.empty()) throw FormatError("dataset " + root.string() + " has no images under images/");
  const auto refs = detail::index_dir(root / "reference");
  const auto masks = detail::index_dir(root / "masks");

  DatasetManifest m;
  m.root = root;
  for (const auto& [id, path] : raws) {
    DatasetEntry e;
    e.id = id;
    e.raw = path;
    if (auto it = refs.find(id); it != refs.end()) e.reference = it->second;
    else e.flags.push_back("missing reference");
    if (auto it = masks.find(id); it != masks.end()) e.mask = it->second;
    else e.flags.push_back("missing mask");
    m.entries.push_back(std::move(e));
  }

  if (spec.test_list || spec.val_list) {
    const auto test = spec.test_list ? read_id_list(*spec.test_list) : std::set<std::string>{};
    const auto val = spec.val_list ? read_id_list(*spec.val_list) : std::set<std::string>{};
    for (auto& e : m.entries) {
      e.split = test.count(e.id) ? Split::Test : val.count(e.id) ? Split::Val : Split::Train;
    }
  } else {
    if (spec.test_ratio < 0 || spec.val_ratio < 0 || spec.test_ratio + spec.val_ratio > 1) {
      throw UsageError("split ratios must be non-negative and sum to at most 1");
    }
    std::vector<std::size_t> order(m.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = static_cast<double>(order.size());
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_ratio * n));
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val_ratio * n));
    for (std::size_t k = 0; k < order.size(); ++k) {
      m.entries[order[k]].split = k < n_test ? Split::Test : k < n_test + n_val ? Split::Val : Split::Train;
    }
  }
  for (auto& e : m.entries) {
    if (e.split == Split::Train && !e.complete()) e.split = Split::Unassigned;
  }
  return m;
}

template <typename T>
struct SamplePair {
  std::string id;
  Tensor<T> raw;
  Tensor<T> reference;  // undefined when the entry has none
  std::vector<SemanticRegion> regions;
  std::vector<DroppedRegion> dropped;
  SemanticMask labels;  // transformed label map (empty without a mask)
};

struct LoadOptions {
  std::size_t target = 256;
  std::size_t margin = 30;  // resize to target + margin before cropping
  bool augment = false;
  std::uint64_t seed = 0;
};

/// Bilinear resize (nearest for the mask) to target+margin, then a crop of
/// target x target: random position and horizontal flip with p = 0.5 when
/// augmenting, centred otherwise. Regions come from the transformed mask.
template <typename T>
SamplePair<T> load_sample(const DatasetEntry& entry, const LoadOptions& opt = {},
                          const Palette& palette = Palette::suim()) {
  const Rgb8Image raw = read_image(entry.raw);
  std::optional<Rgb8Image> ref, mask;
  if (entry.reference) {
    ref = read_image(*entry.reference);
    if (ref->height != raw.height || ref->width != raw.width) {
      throw ShapeError(entry.id + ": reference size differs from the raw image");
    }
  }
  if (entry.mask) {
    mask = read_image(*entry.mask);
    if (mask->height != raw.height || mask->width != raw.width) {
      throw ShapeError(entry.id + ": mask " + std::to_string(mask->height) + "x" + std::to_string(mask->width) +
                       " does not match image " + std::to_string(raw.height) + "x" + std::to_string(raw.width));
    }
  }

  const std::size_t big = opt.target + opt.margin;
  std::size_t y0 = opt.margin / 2, x0 = opt.margin / 2;
  bool flip = false;
  if (opt.augment) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> off(0, opt.margin);
    y0 = off(rng);
    x0 = off(rng);
    flip = std::bernoulli_distribution(0.5)(rng);
  }
  const Box crop{y0, x0, y0 + opt.target, x0 + opt.target};
  auto transform = [&](const Rgb8Image& img, bool nearest) {
    Rgb8Image out = crop_image(nearest ? resize_nearest(img, big, big) : resize_bilinear(img, big, big), crop);
    return flip ? flip_horizontal(out) : out;
  };

  SamplePair<T> s;
  s.id = entry.id;
  s.raw = to_tensor<T>(transform(raw, false));
  if (ref) s.reference = to_tensor<T>(transform(*ref, false));
  if (mask) {
    s.labels = decode_mask(transform(*mask, true), palette);
    RegionSet rs = extract_regions(s.labels, opt.target, opt.target, palette);
    s.regions = std::move(rs.regions);
    s.dropped = std::move(rs.dropped);
  }
  return s;
}

}  // namespace sguie
