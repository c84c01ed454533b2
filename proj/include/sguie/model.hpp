#pragma once

// SGUIE-Net. Main branch: head conv -> semantic fusion -> cascaded attention
// module (CAM) -> tail conv with a global residual. Semantic branch: one
// region-wise enhancement pass (stem, FAB, U-Net) per semantic region.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "sguie/errors.hpp"
#include "sguie/ops.hpp"
#include "sguie/regions.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

struct HyperConfig {
  std::uint32_t base_channels = 32;      // C
  std::uint32_t reduction = 8;           // r
  std::uint32_t rg_count = 3;
  std::uint32_t fab_per_rg = 4;
  std::uint32_t unet_depth = 3;
  std::uint32_t srm_stem_channels = 32;  // Cs
  std::uint32_t unet_channels = 32;      // C_u

  void validate() const {
    auto fail = [](const std::string& m) { throw UsageError("HyperConfig: " + m); };
    if (base_channels == 0 || srm_stem_channels == 0 || unet_channels == 0) fail("channel widths must be positive");
    if (reduction == 0 || base_channels < reduction) fail("need 1 <= reduction <= base_channels");
    if (rg_count < 1 || fab_per_rg < 1) fail("rg_count and fab_per_rg must be at least 1");
    if (unet_depth < 1 || unet_depth > 8) fail("unet_depth must be in [1, 8]");
  }

  std::size_t bottleneck(std::size_t channels) const { return std::max<std::size_t>(channels / reduction, 1); }

  friend bool operator==(const HyperConfig&, const HyperConfig&) = default;
};

template <typename T>
struct Conv {
  Parameter<T> weight;
  Parameter<T> bias;
  std::size_t pad = 0;

  Conv() = default;
  /// Convs feeding a batch norm go without bias: its gradient is identically zero.
  Conv(std::size_t cout, std::size_t cin, std::size_t k, bool with_bias = true)
      : weight(Shape{cout, cin, k, k}), pad(k / 2) {
    if (with_bias) bias = Parameter<T>(Shape{1, cout, 1, 1});
  }

  bool has_bias() const { return bias.value.defined(); }

  Tensor<T> operator()(Tape<T>& tape, const Tensor<T>& x) const {
    return conv2d(tape, x, weight.value, bias.value, 1, pad);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".weight", weight);
    if (has_bias()) f(p + ".bias", bias);
  }
};

template <typename T>
struct BatchNorm {
  Parameter<T> gamma;
  Parameter<T> beta;
  RunningStats<T> stats;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t c) : gamma(Shape{1, c, 1, 1}), beta(Shape{1, c, 1, 1}), stats(c) {
    std::fill(gamma.value.mutable_data().begin(), gamma.value.mutable_data().end(), T(1));
  }

  Tensor<T> operator()(Tape<T>& tape, const Tensor<T>& x, Mode mode) {
    return batchnorm2d(tape, x, gamma.value, beta.value, stats, mode);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    f(p + ".gamma", gamma);
    f(p + ".beta", beta);
    f(p + ".running", stats);
  }
};

/// C -> bottleneck -> C on the pooled descriptor.
template <typename T>
struct ChannelAttention {
  Conv<T> down, up;
  ChannelAttention() = default;
  ChannelAttention(std::size_t c, std::size_t mid) : down(mid, c, 1), up(c, mid, 1) {}
  template <typename F>
  void visit(const std::string& p, F&& f) {
    down.visit(p + ".down", f);
    up.visit(p + ".up", f);
  }
};

/// C -> bottleneck -> 1 attention plane.
template <typename T>
struct PixelAttention {
  Conv<T> down, up;
  PixelAttention() = default;
  PixelAttention(std::size_t c, std::size_t mid) : down(mid, c, 1), up(1, mid, 1) {}
  template <typename F>
  void visit(const std::string& p, F&& f) {
    down.visit(p + ".down", f);
    up.visit(p + ".up", f);
  }
};

template <typename T>
struct FabParams {
  Conv<T> conv1, conv2, conv3;
  ChannelAttention<T> ca;
  PixelAttention<T> pa;
  FabParams() = default;
  FabParams(std::size_t c, std::size_t mid)
      : conv1(c, c, 3), conv2(c, c, 3), conv3(c, c, 3), ca(c, mid), pa(c, mid) {}
  template <typename F>
  void visit(const std::string& p, F&& f) {
    conv1.visit(p + ".conv1", f);
    conv2.visit(p + ".conv2", f);
    conv3.visit(p + ".conv3", f);
    ca.visit(p + ".ca", f);
    pa.visit(p + ".pa", f);
  }
};

template <typename T>
struct ResidualGroupParams {
  std::vector<FabParams<T>> fabs;
  Conv<T> conv;
  template <typename F>
  void visit(const std::string& p, F&& f) {
    for (std::size_t i = 0; i < fabs.size(); ++i) fabs[i].visit(p + ".fab" + std::to_string(i), f);
    conv.visit(p + ".conv", f);
  }
};

template <typename T>
struct CamParams {
  std::vector<ResidualGroupParams<T>> groups;
  Conv<T> merge;
  template <typename F>
  void visit(const std::string& p, F&& f) {
    for (std::size_t i = 0; i < groups.size(); ++i) groups[i].visit(p + ".rg" + std::to_string(i), f);
    merge.visit(p + ".merge", f);
  }
};

/// conv3-relu-conv3-relu.
template <typename T>
struct DoubleConv {
  Conv<T> a, b;
  DoubleConv() = default;
  DoubleConv(std::size_t cout, std::size_t cin) : a(cout, cin, 3), b(cout, cout, 3) {}
  template <typename F>
  void visit(const std::string& p, F&& f) {
    a.visit(p + ".a", f);
    b.visit(p + ".b", f);
  }
};

template <typename T>
struct UNetParams {
  std::vector<DoubleConv<T>> enc;
  DoubleConv<T> bottleneck;
  std::vector<Conv<T>> up;
  std::vector<DoubleConv<T>> dec;
  Conv<T> head;
  template <typename F>
  void visit(const std::string& p, F&& f) {
    for (std::size_t i = 0; i < enc.size(); ++i) enc[i].visit(p + ".enc" + std::to_string(i), f);
    bottleneck.visit(p + ".bottleneck", f);
    for (std::size_t i = 0; i < up.size(); ++i) up[i].visit(p + ".up" + std::to_string(i), f);
    for (std::size_t i = 0; i < dec.size(); ++i) dec[i].visit(p + ".dec" + std::to_string(i), f);
    head.visit(p + ".head", f);
  }
};

template <typename T>
struct SrmParams {
  Conv<T> stem;
  FabParams<T> fab;
  Conv<T> proj;
  UNetParams<T> unet;
  Conv<T> out;
  template <typename F>
  void visit(const std::string& p, F&& f) {
    stem.visit(p + ".stem", f);
    fab.visit(p + ".fab", f);
    proj.visit(p + ".proj", f);
    unet.visit(p + ".unet", f);
    out.visit(p + ".out", f);
  }
};

/// Semantic guidance: two Conv-BN-ReLU units at C_u and a 1x1 lift to C.
template <typename T>
struct SgfParams {
  Conv<T> conv1;
  BatchNorm<T> bn1;
  Conv<T> conv2;
  BatchNorm<T> bn2;
  Conv<T> proj;
  template <typename F>
  void visit(const std::string& p, F&& f) {
    conv1.visit(p + ".conv1", f);
    bn1.visit(p + ".bn1", f);
    conv2.visit(p + ".conv2", f);
    bn2.visit(p + ".bn2", f);
    proj.visit(p + ".proj", f);
  }
};

template <typename T>
struct SguieParams {
  HyperConfig config;
  Conv<T> head;
  SrmParams<T> srm;
  SgfParams<T> sgf;
  CamParams<T> cam;
  Conv<T> tail;

  /// Allocates every tensor for `cfg`, all weights zero and BN at identity.
  static SguieParams make(const HyperConfig& cfg) {
    cfg.validate();
    const std::size_t C = cfg.base_channels, Cs = cfg.srm_stem_channels, Cu = cfg.unet_channels;
    SguieParams p;
    p.config = cfg;
    p.head = Conv<T>(C, 3, 3);
    p.srm.stem = Conv<T>(Cs, 3, 3);
    p.srm.fab = FabParams<T>(Cs, cfg.bottleneck(Cs));
    p.srm.proj = Conv<T>(3, Cs, 1);
    std::size_t in = 3;
    std::vector<std::size_t> widths;
    for (std::size_t l = 0; l < cfg.unet_depth; ++l) {
      const std::size_t w = Cu << std::min<std::size_t>(l, 2);
      widths.push_back(w);
      p.srm.unet.enc.emplace_back(w, in);
      in = w;
    }
    p.srm.unet.bottleneck = DoubleConv<T>(in, in);
    for (std::size_t l = 0; l < cfg.unet_depth; ++l) {
      const std::size_t below = l + 1 < cfg.unet_depth ? widths[l + 1] : widths.back();
      p.srm.unet.up.emplace_back(widths[l], below, 3);
      p.srm.unet.dec.emplace_back(widths[l], 2 * widths[l]);
    }
    p.srm.unet.head = Conv<T>(Cu, Cu, 1);
    p.srm.out = Conv<T>(3, Cu, 3);
    p.sgf.conv1 = Conv<T>(Cu, Cu, 3, false);
    p.sgf.bn1 = BatchNorm<T>(Cu);
    p.sgf.conv2 = Conv<T>(Cu, Cu, 3, false);
    p.sgf.bn2 = BatchNorm<T>(Cu);
    p.sgf.proj = Conv<T>(C, Cu, 1);
    for (std::size_t g = 0; g < cfg.rg_count; ++g) {
      ResidualGroupParams<T> rg;
      for (std::size_t i = 0; i < cfg.fab_per_rg; ++i) rg.fabs.emplace_back(C, cfg.bottleneck(C));
      rg.conv = Conv<T>(C, C, 3);
      p.cam.groups.push_back(std::move(rg));
    }
    p.cam.merge = Conv<T>(C, C, 3);
    p.tail = Conv<T>(3, C, 3);
    return p;
  }

  /// Calls f(name, Parameter<T>&) for trainable tensors and
  /// f(name, RunningStats<T>&) for batch-norm buffers, in a fixed order.
  template <typename F>
  void visit(F&& f) {
    head.visit("head", f);
    srm.visit("srm", f);
    sgf.visit("sgf", f);
    cam.visit("cam", f);
    tail.visit("tail", f);
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    visit([&](const std::string&, auto& obj) {
      if constexpr (std::is_same_v<std::decay_t<decltype(obj)>, Parameter<T>>) out.push_back(&obj);
    });
    return out;
  }

  std::vector<std::pair<std::string, Parameter<T>*>> named_parameters() {
    std::vector<std::pair<std::string, Parameter<T>*>> out;
    visit([&](const std::string& name, auto& obj) {
      if constexpr (std::is_same_v<std::decay_t<decltype(obj)>, Parameter<T>>) out.emplace_back(name, &obj);
    });
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->numel();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
};

enum class InitMode {
  Kaiming,  // fan-in normal conv weights, zero biases
  Zero,     // every conv weight and bias zero: the network is the identity map
};

struct InitOptions {
  InitMode mode = InitMode::Kaiming;
  std::uint64_t seed = 0;
  /// CAM merge conv starts as the identity instead of its mode's default.
  bool identity_merge = false;
  /// Tail conv starts at zero so training begins from E = I.
  bool zero_tail = false;
};

/// Centre tap 1 on the diagonal, everything else 0.
template <typename T>
void set_identity(Conv<T>& conv) {
  const Shape& s = conv.weight.shape();
  if (s.n != s.c || s.h % 2 == 0 || s.w % 2 == 0) throw ShapeError("set_identity: needs a square odd kernel with Cin == Cout");
  auto w = conv.weight.value.mutable_data();
  std::fill(w.begin(), w.end(), T(0));
  for (std::size_t c = 0; c < s.n; ++c) w[((c * s.c + c) * s.h + s.h / 2) * s.w + s.w / 2] = T(1);
  if (conv.has_bias()) {
    auto b = conv.bias.value.mutable_data();
    std::fill(b.begin(), b.end(), T(0));
  }
}

template <typename T>
void zero_conv(Conv<T>& conv) {
  for (auto* p : {&conv.weight, &conv.bias}) {
    if (!p->value.defined()) continue;
    auto d = p->value.mutable_data();
    std::fill(d.begin(), d.end(), T(0));
  }
}

/// Resets every tensor, BN statistics and optimizer state. Kaiming draws come
/// from one mt19937_64 stream in visit order, so a seed fixes the result.
template <typename T>
void initialize(SguieParams<T>& params, const InitOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  params.visit([&](const std::string& name, auto& obj) {
    using Obj = std::decay_t<decltype(obj)>;
    if constexpr (std::is_same_v<Obj, RunningStats<T>>) {
      std::fill(obj.mean.begin(), obj.mean.end(), T(0));
      std::fill(obj.var.begin(), obj.var.end(), T(1));
    } else {
      obj.step_count = 0;
      std::fill(obj.adam_m.begin(), obj.adam_m.end(), T(0));
      std::fill(obj.adam_v.begin(), obj.adam_v.end(), T(0));
      obj.zero_grad();
      auto d = obj.value.mutable_data();
      const auto ends_with = [&](const char* suffix) {
        const std::string s(suffix);
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
      };
      if (ends_with(".gamma")) {
        std::fill(d.begin(), d.end(), T(1));
      } else if (ends_with(".weight") && opt.mode == InitMode::Kaiming) {
        const Shape& s = obj.shape();
        const double fan_in = static_cast<double>(s.c * s.h * s.w);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (auto& v : d) v = static_cast<T>(dist(rng));
      } else {
        std::fill(d.begin(), d.end(), T(0));
      }
    }
  });
  if (opt.identity_merge) set_identity(params.cam.merge);
  if (opt.zero_tail) zero_conv(params.tail);
}

/// Per-thread call counters, for structural checks.
struct ForwardCounters {
  std::size_t fab = 0;
  std::size_t rg = 0;
  std::size_t srm = 0;
};

inline ForwardCounters& forward_counters() {
  thread_local ForwardCounters counters;
  return counters;
}

template <typename T>
Tensor<T> channel_attention(Tape<T>& tape, const Tensor<T>& x, const ChannelAttention<T>& p) {
  const Tensor<T> s = sigmoid(tape, p.up(tape, relu(tape, p.down(tape, global_avg_pool(tape, x)))));
  return mul(tape, x, s);
}

template <typename T>
Tensor<T> pixel_attention(Tape<T>& tape, const Tensor<T>& x, const PixelAttention<T>& p) {
  const Tensor<T> s = sigmoid(tape, p.up(tape, relu(tape, p.down(tape, x))));
  return mul(tape, x, s);
}

/// y = x + conv(relu(conv x)); out = x + PA(CA(conv y)).
template <typename T>
Tensor<T> fab_forward(Tape<T>& tape, const Tensor<T>& x, const FabParams<T>& p) {
  ++forward_counters().fab;
  const Tensor<T> y = add(tape, x, p.conv2(tape, relu(tape, p.conv1(tape, x))));
  const Tensor<T> z = pixel_attention(tape, channel_attention(tape, p.conv3(tape, y), p.ca), p.pa);
  return add(tape, x, z);
}

template <typename T>
Tensor<T> rg_forward(Tape<T>& tape, const Tensor<T>& x, const ResidualGroupParams<T>& p) {
  ++forward_counters().rg;
  Tensor<T> h = x;
  for (const auto& fab : p.fabs) h = fab_forward(tape, h, fab);
  return add(tape, x, p.conv(tape, h));
}

/// merge(f + RG_n(...RG_1(f))); no resampling anywhere.
template <typename T>
Tensor<T> cam_forward(Tape<T>& tape, const Tensor<T>& f, const CamParams<T>& p) {
  Tensor<T> g = f;
  for (const auto& rg : p.groups) g = rg_forward(tape, g, rg);
  return p.merge(tape, add(tape, f, g));
}

template <typename T>
Tensor<T> double_conv(Tape<T>& tape, const Tensor<T>& x, const DoubleConv<T>& p) {
  return relu(tape, p.b(tape, relu(tape, p.a(tape, x))));
}

/// Replicate-pads to a multiple of 2^depth, runs the encoder/decoder, and
/// crops back to the input size. Output has C_u channels.
template <typename T>
Tensor<T> unet_forward(Tape<T>& tape, const Tensor<T>& x, const UNetParams<T>& p) {
  const std::size_t depth = p.enc.size();
  const Padded<T> padded = pad_to_multiple(tape, x, std::size_t{1} << depth);
  Tensor<T> h = padded.tensor;
  std::vector<Tensor<T>> skips;
  for (std::size_t l = 0; l < depth; ++l) {
    h = double_conv(tape, h, p.enc[l]);
    skips.push_back(h);
    h = maxpool2(tape, h);
  }
  h = double_conv(tape, h, p.bottleneck);
  for (std::size_t l = depth; l-- > 0;) {
    h = p.up[l](tape, upsample2_nearest(tape, h));
    h = double_conv(tape, concat_channels(tape, h, skips[l]), p.dec[l]);
  }
  h = p.head(tape, h);
  const Shape& s = h.shape();
  if (s.h == padded.height && s.w == padded.width) return h;
  return crop(tape, h, padded.original());
}

template <typename T>
struct SrmOutput {
  Tensor<T> S;  // pre-processed region, 3 channels
  Tensor<T> R;  // residual features, C_u channels
  Tensor<T> E;  // enhanced region, 3 channels
};

/// S = I + proj(FAB(stem(I))); R = UNet(S); E = I + out(R).
template <typename T>
SrmOutput<T> srm_region_forward(Tape<T>& tape, const Tensor<T>& I_k, const SrmParams<T>& p) {
  const Shape& s = I_k.shape();
  if (s.c != 3) throw ShapeError("srm_region_forward: expected 3 channels, got " + s.str());
  if (s.h < kMinRegionSide || s.w < kMinRegionSide) {
    throw DegenerateRegionError("srm_region_forward: region " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                " is smaller than " + std::to_string(kMinRegionSide) + "x" +
                                std::to_string(kMinRegionSide));
  }
  ++forward_counters().srm;
  SrmOutput<T> out;
  out.S = add(tape, I_k, p.proj(tape, fab_forward(tape, p.stem(tape, I_k), p.fab)));
  out.R = unet_forward(tape, out.S, p.unet);
  out.E = add(tape, I_k, p.out(tape, out.R));
  return out;
}

/// One region's contribution to the fusion step.
template <typename T>
struct FusionRegion {
  Tensor<T> R;     // [1, C_u, h, w]
  Tensor<T> mask;  // [1, 1, h, w], values 0/1
  Box bbox;
};

template <typename T>
struct FusionTrace {
  std::vector<Tensor<T>> X, X_masked, A;
};

namespace detail {

template <typename T>
void require_disjoint(const std::vector<FusionRegion<T>>& regions, std::size_t H, std::size_t W) {
  std::vector<std::uint8_t> seen(H * W, 0);
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const auto& r = regions[k];
    require_box(Shape{1, 1, H, W}, r.bbox, "sgf_fuse");
    const Shape& ms = r.mask.shape();
    if (ms.c != 1 || ms.h != r.bbox.height() || ms.w != r.bbox.width()) {
      throw ShapeError("sgf_fuse: mask " + ms.str() + " does not match its box");
    }
    const auto m = r.mask.data();
    for (std::size_t y = 0; y < ms.h; ++y) {
      for (std::size_t x = 0; x < ms.w; ++x) {
        if (m[y * ms.w + x] == T(0)) continue;
        auto& cell = seen[(r.bbox.y0 + y) * W + r.bbox.x0 + x];
        if (cell) {
          throw InvariantError("sgf_fuse: region masks overlap at (" + std::to_string(r.bbox.y0 + y) + ", " +
                               std::to_string(r.bbox.x0 + x) + ")");
        }
        cell = 1;
      }
    }
  }
}

}  // namespace detail

/// X = sigmoid(Dconv(R)), X' = X * m, A = crop(f_g) * X', F = f_g + sum_k A_k
/// placed at each box. Inside mask k this is f_g * (1 + X_k).
template <typename T>
Tensor<T> sgf_fuse(Tape<T>& tape, const Tensor<T>& f_g, const std::vector<FusionRegion<T>>& regions,
                   SgfParams<T>& p, Mode mode, FusionTrace<T>* trace = nullptr) {
  const Shape& s = f_g.shape();
  detail::require_disjoint(regions, s.h, s.w);
  Tensor<T> F = f_g;
  for (const auto& r : regions) {
    Tensor<T> h = relu(tape, p.bn1(tape, p.conv1(tape, r.R), mode));
    h = relu(tape, p.bn2(tape, p.conv2(tape, h), mode));
    const Tensor<T> X = sigmoid(tape, p.proj(tape, h));
    const Tensor<T> Xm = mul(tape, X, r.mask);
    const Tensor<T> A = mul(tape, crop(tape, f_g, r.bbox), Xm);
    F = add_at(tape, F, A, r.bbox);
    if (trace) {
      trace->X.push_back(X);
      trace->X_masked.push_back(Xm);
      trace->A.push_back(A);
    }
  }
  return F;
}

template <typename T>
struct FeatureBundle {
  Tensor<T> f_g;
  std::vector<SrmOutput<T>> srm;  // S_k, R_k, E_k per region
  FusionTrace<T> fusion;          // X_k, X'_k, A_k per region
  Tensor<T> F;
};

template <typename T>
struct ForwardResult {
  Tensor<T> output;                     // E
  std::vector<Tensor<T>> region_outputs;  // E_k
  std::vector<Box> region_boxes;
  FeatureBundle<T> features;
};

/// f_g = head(I); F = sgf_fuse(f_g, SRM(I_k)); E = I + tail(CAM(F)).
/// Eval mode clamps E to [0,1]; training leaves it unclamped.
template <typename T>
ForwardResult<T> sguie_forward(Tape<T>& tape, const Tensor<T>& I, std::span<const SemanticRegion> regions,
                               SguieParams<T>& p, Mode mode) {
  const Shape& s = I.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("sguie_forward: expected [1,3,H,W], got " + s.str());
  ForwardResult<T> res;
  res.features.f_g = p.head(tape, I);
  std::vector<FusionRegion<T>> fusion;
  for (const auto& region : regions) {
    const Tensor<T> I_k = crop(tape, I, region.bbox);
    SrmOutput<T> o = srm_region_forward(tape, I_k, p.srm);
    fusion.push_back({o.R, region.template mask_tensor<T>(), region.bbox});
    res.region_outputs.push_back(o.E);
    res.region_boxes.push_back(region.bbox);
    res.features.srm.push_back(std::move(o));
  }
  res.features.F = sgf_fuse(tape, res.features.f_g, fusion, p.sgf, mode, &res.features.fusion);
  Tensor<T> E = add(tape, I, p.tail(tape, cam_forward(tape, res.features.F, p.cam)));
  if (mode == Mode::Eval) E = clamp(tape, E, T(0), T(1));
  res.output = E;
  return res;
}

/// Mean squared error over every channel and pixel.
template <typename T>
Tensor<T> loss_l2(Tape<T>& tape, const Tensor<T>& E, const Tensor<T>& E_gt) {
  return mse_loss(tape, E, E_gt);
}

/// loss_l2(E, E_gt) + lambda * mean_k mse(E_k, crop(E_gt, box_k)).
template <typename T>
Tensor<T> training_loss(Tape<T>& tape, const ForwardResult<T>& fwd, const Tensor<T>& E_gt, double lambda_aux) {
  Tensor<T> loss = loss_l2(tape, fwd.output, E_gt);
  if (lambda_aux == 0.0 || fwd.region_outputs.empty()) return loss;
  Tensor<T> aux;
  for (std::size_t k = 0; k < fwd.region_outputs.size(); ++k) {
    const Tensor<T> term = mse_loss(tape, fwd.region_outputs[k], crop(tape, E_gt, fwd.region_boxes[k]));
    aux = aux.defined() ? add(tape, aux, term) : term;
  }
  const T w = static_cast<T>(lambda_aux / static_cast<double>(fwd.region_outputs.size()));
  return add(tape, loss, scale(tape, aux, w));
}

}  // namespace sguie
