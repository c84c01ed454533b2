// Acceptance run: one PASS/FAIL line per primary criterion, exit status 1 if any fails.
//
//   acceptance            run every criterion
//   acceptance NAME...    run only the named criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "curation_fixture.hpp"
#include "metric_oracles.hpp"
#include "model_fixture.hpp"
#include "sguie/gradcheck_suite.hpp"
#include "sguie/sguie.hpp"
#include "support.hpp"

using namespace sguie;
using namespace sguie::testing;
namespace fs = std::filesystem;

namespace {

/// Collects failed expectations; the first few are echoed in the summary line.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream os;
      os << what << ": got " << got << ", want " << want << " +- " << tol;
      failures_.push_back(os.str());
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }

  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
    for (std::size_t i = 0; i < failures_.size() && i < 5; ++i) os << (os.tellp() > 0 ? "; " : "") << failures_[i];
    if (failures_.size() > 5) os << "; ... " << failures_.size() - 5 << " more";
    return os.str();
  }

 private:
  std::vector<std::string> failures_, notes_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a.data()[i] != b.data()[i]) return false;
  }
  return true;
}

// ------------------------------------------------------------------ criteria

void autograd_suite(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst32 = 0, worst64 = 0;
  std::size_t ops = 0;
  for (const auto& r : op_gradcheck_suite<float>(1e-3, 5)) {
    c.expect(r.shapes >= 5, r.op + " f32 checked on fewer than 5 shapes");
    c.expect(r.max_rel_error <= 1e-3, r.op + " f32 " + fmt("%.3g", r.max_rel_error));
    worst32 = std::max(worst32, r.max_rel_error);
    ++ops;
  }
  for (const auto& r : op_gradcheck_suite<double>(1e-5, 5)) {
    c.expect(r.shapes >= 5, r.op + " f64 checked on fewer than 5 shapes");
    c.expect(r.max_rel_error <= 1e-6, r.op + " f64 " + fmt("%.3g", r.max_rel_error));
    worst64 = std::max(worst64, r.max_rel_error);
  }
  const double t = seconds_since(t0);
  c.expect(t < 60.0, "runtime " + fmt("%.1f s", t) + " exceeds 60 s");
  c.note(std::to_string(ops) + " ops, worst f32 " + fmt("%.2e", worst32) + ", worst f64 " + fmt("%.2e", worst64) +
         ", " + fmt("%.1f s", t));
}

void whole_model_gradient(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto p = conditioned_params(1);
  std::mt19937_64 rng(101);
  auto I = image<double>(16, 16, rng);
  const auto set = extract_regions(two_region_mask(16, 16), 16, 16);
  c.expect(set.regions.size() == 2, "fixture should have 2 regions");
  Tensor<double> target;
  {
    Tape<double> tape(false);
    auto E = sguie_forward(tape, I, std::span<const SemanticRegion>(set.regions), p, Mode::Train).output;
    std::uniform_real_distribution<double> u(-0.025, 0.025);
    std::vector<double> t(E.data().begin(), E.data().end());
    for (auto& v : t) v += u(rng);
    target = Tensor<double>(E.shape(), t);
  }
  const auto r = grad_check<double>(
      [&](Tape<double>& tape, std::span<const Tensor<double>>) {
        auto res = sguie_forward(tape, I, std::span<const SemanticRegion>(set.regions), p, Mode::Train);
        return loss_l2(tape, res.output, target);
      },
      parameter_values(p), whole_model_options());
  const auto named = p.named_parameters();
  for (std::size_t k = 0; k < named.size(); ++k) {
    c.expect(r.per_input[k] <= 1e-6, named[k].first + " " + fmt("%.3g", r.per_input[k]));
  }
  const double t = seconds_since(t0);
  c.expect(t < 120.0, "runtime " + fmt("%.1f s", t) + " exceeds 120 s");
  c.note(std::to_string(named.size()) + " parameter groups, worst " + fmt("%.2e", r.max_rel_error) + ", " +
         fmt("%.1f s", t));
}

void structural_identities(Check& c) {
  std::mt19937_64 rng(40);
  {
    auto p = make_params<float>(HyperConfig{}, InitMode::Zero);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{32, 32}, {19, 27}}) {
      auto I = image<float>(h, w, rng);
      const auto set = extract_regions(two_region_mask(h, w), h, w);
      for (Mode mode : {Mode::Train, Mode::Eval}) {
        Tape<float> tape(false);
        auto res = sguie_forward(tape, I, std::span<const SemanticRegion>(set.regions), p, mode);
        c.expect(bit_equal(res.output, I), "zero-init output differs from input");
        for (std::size_t k = 0; k < set.regions.size(); ++k) {
          const auto I_k = crop(tape, I, set.regions[k].bbox);
          c.expect(bit_equal(res.features.srm[k].S, I_k), "zero-init S_k differs from I_k");
          c.expect(bit_equal(res.region_outputs[k], I_k), "zero-init E_k differs from I_k");
        }
      }
    }
  }
  {
    auto p = make_params<double>(HyperConfig{}, InitMode::Kaiming, 5);
    const std::size_t H = 24, W = 20;
    const auto mask = two_region_mask(H, W);
    const auto set = extract_regions(mask, H, W);
    auto f = features<double>(32, H, W, rng);
    std::vector<FusionRegion<double>> regions;
    for (const auto& r : set.regions) {
      regions.push_back({features<double>(32, r.bbox.height(), r.bbox.width(), rng), r.mask_tensor<double>(), r.bbox});
    }
    Tape<double> tape(false);
    auto F = sgf_fuse(tape, f, regions, p.sgf, Mode::Train);
    std::size_t outside = 0, mismatched = 0;
    for (std::size_t ch = 0; ch < 32; ++ch) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          if (mask.at(y, x) != 0) continue;
          ++outside;
          mismatched += F.at(ch, y, x) != f.at(ch, y, x);
        }
      }
    }
    c.expect(outside > 0 && mismatched == 0, std::to_string(mismatched) + " fused values changed outside the masks");
  }
  {
    auto p = make_params<float>(HyperConfig{}, InitMode::Kaiming, 9);
    auto I = image<float>(20, 40, rng);
    const auto set = extract_regions(all_categories_mask(20, 40), 20, 40);
    auto reversed = set.regions;
    std::reverse(reversed.begin(), reversed.end());
    auto shuffled = set.regions;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (Mode mode : {Mode::Train, Mode::Eval}) {
      Tape<float> tape(false);
      auto a = sguie_forward(tape, I, std::span<const SemanticRegion>(set.regions), p, mode);
      for (const auto* order : {&reversed, &shuffled}) {
        auto b = sguie_forward(tape, I, std::span<const SemanticRegion>(*order), p, mode);
        c.expect(bit_equal(a.output, b.output), "output depends on region order");
      }
    }
  }
  {
    auto p = make_params<float>(HyperConfig{}, InitMode::Kaiming);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{37, 53}, {1, 3}, {5, 5}}) {
      Tape<float> tape(false);
      auto y = cam_forward(tape, features<float>(32, h, w, rng), p.cam);
      c.expect(y.shape() == Shape{1, 32, h, w}, "CAM changed size " + std::to_string(h) + "x" + std::to_string(w));
    }
  }
  c.note("identity, mask locality, order invariance, odd-size CAM");
}

/// One 128x128 triple: a smooth textured reference, a raw with a blue-green
/// cast and veiling offset, and a mask with a fish blob over a sea floor band.
fs::path write_overfit_triple() {
  const auto root = temp_dir("acceptance_overfit");
  const std::size_t H = 128, W = 128;
  Rgb8Image raw(H, W), ref(H, W), mask(H, W);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const double gain[3] = {0.6, 0.85, 1.0};
  auto to8 = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      std::uint8_t r8[3], g8[3];
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = 0.5 + 0.25 * std::sin(0.2 * x + 0.1 * ch) * std::cos(0.15 * y) + 0.1 * u(rng);
        g8[ch] = to8(v);
        r8[ch] = to8(0.08 + v * gain[ch] * 0.9);
      }
      ref.set(y, x, g8[0], g8[1], g8[2]);
      raw.set(y, x, r8[0], r8[1], r8[2]);
      if (y >= 10 && y < 60 && x >= 20 && x < 90) mask.set(y, x, 255, 255, 0);
      if (y >= 70) mask.set(y, x, 255, 0, 0);
    }
  }
  write_image(root / "images" / "t.png", raw);
  write_image(root / "reference" / "t.png", ref);
  write_image(root / "masks" / "t.png", mask);
  return root;
}

void overfit_dynamics(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  SplitSpec split;
  split.test_ratio = 0.0;
  const auto manifest = scan_dataset(write_overfit_triple(), split);
  LoadOptions load;
  load.target = 128;
  load.margin = 0;
  const auto sample = load_sample<float>(*manifest.split(Split::Train).at(0), load);
  c.expect(sample.regions.size() == 2, "overfit triple should give 2 regions");

  TrainConfig cfg;
  cfg.seed = 1;
  cfg.image_size = 128;
  cfg.augment = false;
  Trainer<float> trainer(cfg);
  constexpr int kIters = 300, kWindow = 20;
  std::vector<double> losses;
  for (int it = 0; it < kIters; ++it) losses.push_back(trainer.step(sample, 1e-4));

  std::vector<double> smoothed;
  for (int b = 0; b < kIters / kWindow; ++b) {
    double s = 0;
    for (int k = 0; k < kWindow; ++k) s += losses[b * kWindow + k];
    smoothed.push_back(s / kWindow);
  }
  for (std::size_t b = 1; b < smoothed.size(); ++b) {
    c.expect(smoothed[b] < smoothed[b - 1], "smoothed loss rose at block " + std::to_string(b) + " (" +
                                                fmt("%.3e", smoothed[b - 1]) + " -> " + fmt("%.3e", smoothed[b]) + ")");
  }

  Tape<float> tape(false);
  const auto out = sguie_forward(tape, sample.raw, std::span<const SemanticRegion>(sample.regions), trainer.params(),
                                 Mode::Eval);
  const double psnr = psnr_from_mse(mse(to_metric(to_rgb8(out.output)), to_metric(to_rgb8(sample.reference))));
  c.expect(psnr >= 30.0, "final PSNR " + fmt("%.2f dB", psnr) + " below 30 dB");
  const double t = seconds_since(t0);
  c.expect(t < 600.0, "runtime " + fmt("%.0f s", t) + " exceeds 10 min");
  c.note("loss " + fmt("%.3e", smoothed.front()) + " -> " + fmt("%.3e", smoothed.back()) + " over " +
         std::to_string(smoothed.size()) + " blocks, PSNR " + fmt("%.2f dB", psnr) + ", " + fmt("%.0f s", t) + " on " +
         std::to_string(Eigen::nbThreads()) + " thread(s)");
}

void metric_oracles(Check& c) {
  std::mt19937_64 rng(77);
  double worst_ssim = 0;
  for (int t = 0; t < 10; ++t) {
    const auto a = random_image(24, 24, rng), b = random_image(24, 24, rng);
    c.near(ssim(a, a), 1.0, 1e-9, "SSIM(x,x)");
    c.expect(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12, "SSIM not symmetric");
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - oracle_ssim(a, b)));
    const double m = mse(a, b);
    c.near(psnr_from_mse(m), 10.0 * std::log10(255.0 * 255.0 / m), 1e-9, "PSNR from MSE");
  }
  c.expect(worst_ssim <= 1e-6, "SSIM differs from window oracle by " + fmt("%.3g", worst_ssim));

  const auto pairs = ciede2000_pairs();
  c.expect(pairs.size() == 34, "verification set should have 34 pairs");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    c.near(ciede2000(pairs[i].a, pairs[i].b), pairs[i].expected, 1e-4, "CIEDE2000 pair " + std::to_string(i + 1));
  }
  c.near(ciede2000(pairs[0].a, pairs[0].b), 2.0425, 1e-4, "CIEDE2000 first pair");

  c.near(angular_error(128, 128, 128), 0.0, 1e-6, "angular error gray");
  c.near(angular_error(255, 0, 0), 54.7356, 1e-3, "angular error red");

  double worst_uiqm = 0, worst_uciqe = 0;
  for (int t = 0; t < 12; ++t) {
    const auto m = random_image(16, 16, rng);
    worst_uiqm = std::max(worst_uiqm, std::abs(uiqm(m).uiqm - oracle_uiqm(m).uiqm));
    worst_uciqe = std::max(worst_uciqe, std::abs(uciqe(m).uciqe - oracle_uciqe(m)));
  }
  c.expect(worst_uiqm <= 1e-6, "UIQM oracle gap " + fmt("%.3g", worst_uiqm));
  c.expect(worst_uciqe <= 1e-6, "UCIQE oracle gap " + fmt("%.3g", worst_uciqe));
  for (double v : {0.0, 77.0, 128.0, 255.0}) {
    const auto g = constant_image(16, 16, v, v, v);
    c.near(uiqm(g).uiqm, 0.0, 1e-6, "UIQM constant gray");
    c.near(uciqe(g).uciqe, 0.0, 1e-6, "UCIQE constant gray");
  }
  c.note("34 CIEDE2000 pairs, 12 fixtures, UIQM gap " + fmt("%.1e", worst_uiqm) + ", UCIQE gap " +
         fmt("%.1e", worst_uciqe));
}

void region_machinery(Check& c) {
  static const std::uint8_t colors[8][3] = {{0, 0, 0},   {0, 0, 255},   {0, 255, 0},   {0, 255, 255},
                                            {255, 0, 0}, {255, 0, 255}, {255, 255, 0}, {255, 255, 255}};
  auto paint = [](Rgb8Image& img, int id, std::size_t y0, std::size_t x0, std::size_t y1, std::size_t x1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) img.set(y, x, colors[id][0], colors[id][1], colors[id][2]);
    }
  };
  std::mt19937_64 rng(2025);
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t h = 20 + rng() % 40, w = 20 + rng() % 40;
    Rgb8Image img(h, w);
    for (int k = 0, n = 1 + static_cast<int>(rng() % 8); k < n; ++k) {
      const std::size_t y0 = rng() % h, x0 = rng() % w;
      // Rectangles at least kMinRegionSide on a side, so nothing is dropped.
      const std::size_t y1 = std::min(h, y0 + 4 + rng() % 12), x1 = std::min(w, x0 + 4 + rng() % 12);
      paint(img, static_cast<int>(rng() % 8), y0, x0, y1, x1);
    }
    const auto m = decode_mask(img);
    const auto set = extract_regions(m, h, w);
    SemanticMask expected = m;
    for (auto& l : expected.labels) {
      for (const auto& d : set.dropped) {
        if (l == d.category_id) l = 0;
      }
    }
    c.expect(paste_regions(set.regions, h, w) == expected, "round trip differs in trial " + std::to_string(trial));
  }

  Rgb8Image img(30, 30);
  paint(img, 3, 0, 0, 4, 4);
  paint(img, 3, 20, 20, 24, 24);
  const auto set = extract_regions(decode_mask(img), 30, 30);
  c.expect(set.regions.size() == 1, "two reef blobs should form one region");
  if (set.regions.size() == 1) {
    const auto& r = set.regions[0];
    c.expect(r.bbox == Box{0, 0, 24, 24}, "union bbox should be (0,0)-(24,24)");
    c.expect(r.pixel_count() == 32, "union region should hold 32 pixels");
    bool exact = r.mask.size() == 24 * 24;
    for (std::size_t y = 0; exact && y < 24; ++y) {
      for (std::size_t x = 0; x < 24; ++x) {
        const bool on = (y < 4 && x < 4) || (y >= 20 && x >= 20);
        exact = exact && r.mask[y * 24 + x] == (on ? 1 : 0);
      }
    }
    c.expect(exact, "union mask contents");
  }
  c.note(std::to_string(trials) + " random masks, union bbox (0,0)-(24,24) with 32 pixels");
}

void checkpoint(Check& c) {
  const auto dir = temp_dir("acceptance_ckpt");
  HyperConfig cfg = small_config();
  auto src = make_params<float>(cfg, InitMode::Kaiming, 21);
  std::mt19937_64 rng(22);
  std::normal_distribution<float> d(0.0f, 1.0f);
  src.visit([&](const std::string&, auto& obj) {
    using Obj = std::decay_t<decltype(obj)>;
    if constexpr (std::is_same_v<Obj, RunningStats<float>>) {
      for (auto& v : obj.mean) v = d(rng);
      for (auto& v : obj.var) v = std::abs(d(rng)) + 0.1f;
    }
  });
  save_checkpoint(dir / "a.sguie", src);
  auto loaded = load_model<float>(dir / "a.sguie");
  c.expect(encode_checkpoint(loaded) == encode_checkpoint(src), "re-encoded checkpoint differs");
  bool same = true;
  auto a = src.parameters(), b = loaded.parameters();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k]->value.numel(); ++i) {
      same = same && std::memcmp(&a[k]->value.data()[i], &b[k]->value.data()[i], sizeof(float)) == 0;
    }
  }
  c.expect(same, "loaded parameters are not bit-identical");

  std::ifstream in(dir / "a.sguie", std::ios::binary);
  const std::vector<char> good{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  auto load_bytes = [&](std::vector<char> bytes) {
    {
      std::ofstream out(dir / "bad.sguie", std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    auto target = make_params<float>(cfg, InitMode::Kaiming, 23);
    load_checkpoint(dir / "bad.sguie", target);
  };
  int cases = 0;
  auto corrupt = [&](std::vector<char> bytes, const std::string& what) {
    ++cases;
    try {
      load_bytes(std::move(bytes));
      c.expect(false, what + ": accepted");
    } catch (const FormatError&) {
    } catch (const std::exception& e) {
      c.expect(false, what + ": wrong error type (" + e.what() + ")");
    }
  };
  auto flip = [&](std::size_t at) {
    auto bytes = good;
    bytes[at] = static_cast<char>(bytes[at] ^ 0x10);
    return bytes;
  };
  corrupt(flip(0), "bad magic");
  corrupt(flip(good.size() / 2), "payload bit flip");
  corrupt(flip(good.size() - 1), "checksum bit flip");
  corrupt(std::vector<char>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() / 3)), "truncated");
  auto longer = good;
  longer.push_back('x');
  corrupt(longer, "trailing garbage");
  corrupt({}, "empty file");
  c.note("round trip bit-exact, " + std::to_string(cases) + " corruptions rejected with FormatError");
}

void curation_tally(Check& c) {
  const auto dir = temp_dir("acceptance_tally");
  TallyResult live;
  {
    CurationStore store(scripted_session(), dir / "ledger.jsonl");
    for (const auto& [v, i, m] : scripted_votes()) store.record_vote(v, i, m);
    live = store.current_tally();
  }
  const auto expected = scripted_expected();
  c.expect(live.images.size() == 4, "tally should cover 4 images");
  for (const auto& im : live.images) {
    const auto& e = expected.at(im.id);
    c.expect(im.winner == e.winner, im.id + " winner " + im.winner + ", want " + e.winner);
    c.expect(im.tie == e.tie, im.id + " tie flag");
    for (const auto& [m, n] : im.counts) {
      auto it = e.nonzero.find(m);
      c.expect(n == (it == e.nonzero.end() ? 0 : it->second), im.id + " count for " + m);
    }
  }
  c.expect(live.total_votes == 40, "40 effective votes");
  const auto shares = scripted_vote_share();
  double vote_sum = 0, ref_sum = 0;
  for (const auto& [m, v] : live.vote_share) {
    vote_sum += v;
    c.near(v, shares.at(m), 1e-12, "vote share " + m);
  }
  for (const auto& [m, v] : live.reference_share) ref_sum += v;
  c.near(vote_sum, 100.0, 1e-9, "vote shares sum");
  c.near(ref_sum, 100.0, 1e-9, "reference shares sum");

  // 60/30/10 on a single image.
  auto one = scripted_session();
  one.images.resize(1);
  CurationStore small(one, dir / "603010.jsonl");
  for (int v = 1; v <= 10; ++v) small.record_vote(volunteer_name(v), "img1", v <= 6 ? "m01" : v <= 9 ? "m02" : "m03");
  const auto t = small.current_tally();
  c.near(t.vote_share.at("m01"), 60.0, 1e-12, "60/30/10 first");
  c.near(t.vote_share.at("m02"), 30.0, 1e-12, "60/30/10 second");
  c.near(t.vote_share.at("m03"), 10.0, 1e-12, "60/30/10 third");

  const auto replayed = tally(scripted_session(), read_ledger(dir / "ledger.jsonl"));
  c.expect(replayed.to_json().dump() == live.to_json().dump(), "replayed JSON differs");
  c.expect(replayed.csv() == live.csv(), "replayed CSV differs");
  const auto again = tally(scripted_session(), read_ledger(dir / "ledger.jsonl"));
  c.expect(again.to_json().dump() == replayed.to_json().dump(), "second replay differs");
  c.note("winners m03/m02*/m09*/m12 (* tie), shares sum " + fmt("%.12g", vote_sum) + ", replay bit-exact");
}

struct Criterion {
  const char* name;
  std::function<void(Check&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"autograd-suite", autograd_suite},         {"whole-model-gradient", whole_model_gradient},
      {"structural-identities", structural_identities}, {"overfit-dynamics", overfit_dynamics},
      {"metric-oracles", metric_oracles},         {"region-machinery", region_machinery},
      {"checkpoint", checkpoint},                 {"curation-tally", curation_tally},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& cr : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.name) == only.end()) continue;
    ++ran;
    Check c;
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    failed += !c.ok();
    std::cout << (c.ok() ? "PASS " : "FAIL ") << cr.name << "  " << c.summary() << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no criterion matches the given names\n";
    return 2;
  }
  std::cout << ran - failed << "/" << ran << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
