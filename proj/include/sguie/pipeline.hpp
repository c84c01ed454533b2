#pragma once

// Whole-image enhancement and directory-level evaluation.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sguie/dataset.hpp"
#include "sguie/image.hpp"
#include "sguie/metrics.hpp"
#include "sguie/model.hpp"
#include "sguie/regions.hpp"

namespace sguie {

struct EnhanceResult {
  Rgb8Image image;
  std::vector<DroppedRegion> dropped;
  std::size_t regions = 0;
};

/// Eval-mode forward pass at the image's native size. Without a mask the
/// main branch runs alone (zero regions).
template <typename T>
EnhanceResult enhance_image(SguieParams<T>& params, const Rgb8Image& raw, const std::optional<Rgb8Image>& mask,
                            const Palette& palette = Palette::suim()) {
  if (raw.empty()) throw ShapeError("enhance_image: empty image");
  EnhanceResult out;
  std::vector<SemanticRegion> regions;
  if (mask) {
    if (mask->height != raw.height || mask->width != raw.width) {
      throw ShapeError("mask " + std::to_string(mask->height) + "x" + std::to_string(mask->width) +
                       " does not match image " + std::to_string(raw.height) + "x" + std::to_string(raw.width));
    }
    RegionSet set = extract_regions(decode_mask(*mask, palette), raw.height, raw.width, palette);
    regions = std::move(set.regions);
    out.dropped = std::move(set.dropped);
  }
  out.regions = regions.size();
  Tape<T> tape(false);
  const auto fwd = sguie_forward(tape, to_tensor<T>(raw), std::span<const SemanticRegion>(regions), params, Mode::Eval);
  out.image = to_rgb8(fwd.output);
  return out;
}

struct EvalOptions {
  std::optional<std::filesystem::path> dir_a;  // enhanced outputs
  std::optional<std::filesystem::path> dir_b;  // references, matched to dir_a by id
  std::optional<std::filesystem::path> noref;  // images scored with UIQM / UCIQE
  std::optional<std::filesystem::path> chart;  // chart layout JSON, applied to dir_a (or noref)
};

struct EvalResult {
  MetricReport report;
  std::vector<std::string> unmatched;  // "<dir>/<file>: reason"
};

/// Full-reference metrics (mse, psnr, ssim) for every id present in both
/// dir_a and dir_b; uiqm / uciqe for noref; chart scores when a layout is given.
inline EvalResult evaluate(const EvalOptions& opt) {
  EvalResult res;
  auto index = [](const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw FormatError("directory " + dir.string() + " not found");
    return detail::index_dir(dir);
  };
  std::map<std::string, std::filesystem::path> a;
  if (opt.dir_a) a = index(*opt.dir_a);
  if (opt.dir_b) {
    if (!opt.dir_a) throw UsageError("evaluate: a reference directory needs a directory to compare");
    const auto b = index(*opt.dir_b);
    for (const auto& [id, p] : a) {
      if (!b.count(id)) res.unmatched.push_back(p.string() + ": no counterpart in " + opt.dir_b->string());
    }
    for (const auto& [id, p] : b) {
      if (!a.count(id)) res.unmatched.push_back(p.string() + ": no counterpart in " + opt.dir_a->string());
    }
    for (const auto& [id, pa] : a) {
      auto it = b.find(id);
      if (it == b.end()) continue;
      const MetricImage x = to_metric(read_image(pa)), y = to_metric(read_image(it->second));
      if (x.height != y.height || x.width != y.width) {
        res.unmatched.push_back(pa.string() + ": size differs from " + it->second.string());
        continue;
      }
      const double m = mse(x, y);
      res.report.add(id, "mse", m);
      res.report.add(id, "psnr", psnr_from_mse(m));
      res.report.add(id, "ssim", ssim(x, y));
    }
  }
  std::map<std::string, std::filesystem::path> nr;
  if (opt.noref) {
    nr = index(*opt.noref);
    for (const auto& [id, p] : nr) {
      const MetricImage x = to_metric(read_image(p));
      const UiqmResult q = uiqm(x);
      res.report.add(id, "uiqm", q.uiqm);
      res.report.add(id, "uciqe", uciqe(x).uciqe);
    }
  }
  if (opt.chart) {
    std::ifstream in(*opt.chart);
    if (!in) throw FormatError("cannot open chart layout " + opt.chart->string());
    std::vector<ChartPatch> layout;
    try {
      layout = parse_chart_layout(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("chart layout " + opt.chart->string() + ": " + e.what());
    }
    const auto& targets = opt.dir_a ? a : nr;
    if (targets.empty()) throw UsageError("evaluate: a chart layout needs images to score");
    for (const auto& [id, p] : targets) {
      const ChartScore s = score_chart(to_metric(read_image(p)), layout);
      res.report.add(id, "ciede2000", s.ciede2000);
      res.report.add(id, "angular_error", s.angular_error);
    }
  }
  return res;
}

}  // namespace sguie
