#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cutgan/core/nn.hpp"

namespace cutgan {

struct GeneratorConfig {
  int n_downsampling = 2;  // the architecture below is fixed at two
  int n_residual_blocks = 9;
  int64_t base_channels = 64;
  std::vector<std::string> tap_layers = {"input_rgb", "down1", "down2", "res1", "res5"};

  void validate() const {
    check(n_downsampling == 2, "GeneratorConfig: only n_downsampling=2 is supported");
    check(n_residual_blocks >= 6,
          "GeneratorConfig: encoder split before residual block 6 requires >= 6 blocks");
    check(base_channels >= 1, "GeneratorConfig: base_channels must be positive");
    check(!tap_layers.empty(), "GeneratorConfig: tap_layers empty");
  }
};

// One tapped encoder feature map plus its geometry.
template <typename T>
struct FeatureTap {
  std::string id;
  Var<T> features;      // [B, C_l, H_l, W_l]
  int receptive_field;  // square edge, input pixels
  int stride;           // input pixels per feature step
};

template <typename T>
using FeatureStack = std::vector<FeatureTap<T>>;

// ResNet encoder-decoder translator. Kernel plan (7; 3/s2; 4/s2; residual
// block 1 = 3+4, later blocks 3+3) puts the five standard tap points at
// receptive fields 1, 9, 15, 35, 99 with strides 1, 2, 4, 4, 4. The layers up
// to and including residual block 5 form the encoder used for feature taps.
template <typename T>
class ResnetGenerator {
 public:
  struct ResBlock {
    nn::Conv2d<T> conv1, conv2;
    nn::InstanceNorm2d<T> in1, in2;
    int pad2_hi = 1;  // second conv: reflect pad (1, pad2_hi)

    Var<T> forward(const Var<T>& x) const {
      auto h = ops::reflect_pad2d(x, 1, 1, 1, 1);
      h = ops::relu(in1.forward(conv1.forward(h)));
      h = ops::reflect_pad2d(h, 1, pad2_hi, 1, pad2_hi);
      h = in2.forward(conv2.forward(h));
      return ops::add(x, h);
    }
  };

  ResnetGenerator() = default;

  ResnetGenerator(GeneratorConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    int64_t b = cfg_.base_channels;
    stem_conv_ = nn::Conv2d<T>(3, b, 7, 1, 0, seed, "gen.stem");
    stem_norm_ = nn::InstanceNorm2d<T>(b);
    down1_ = nn::Conv2d<T>(b, 2 * b, 3, 2, 1, seed, "gen.down1");
    down1_norm_ = nn::InstanceNorm2d<T>(2 * b);
    down2_ = nn::Conv2d<T>(2 * b, 4 * b, 4, 2, 1, seed, "gen.down2");
    down2_norm_ = nn::InstanceNorm2d<T>(4 * b);
    for (int i = 0; i < cfg_.n_residual_blocks; ++i) {
      ResBlock blk;
      std::string path = "gen.res" + std::to_string(i + 1);
      blk.conv1 = nn::Conv2d<T>(4 * b, 4 * b, 3, 1, 0, seed, path + ".conv1");
      int k2 = (i == 0) ? 4 : 3;
      blk.conv2 = nn::Conv2d<T>(4 * b, 4 * b, k2, 1, 0, seed, path + ".conv2");
      blk.pad2_hi = (k2 == 4) ? 2 : 1;
      blk.in1 = nn::InstanceNorm2d<T>(4 * b);
      blk.in2 = nn::InstanceNorm2d<T>(4 * b);
      blocks_.push_back(std::move(blk));
    }
    up1_ = nn::ConvTranspose2d<T>(4 * b, 2 * b, 3, 2, 1, 1, seed, "gen.up1");
    up1_norm_ = nn::InstanceNorm2d<T>(2 * b);
    up2_ = nn::ConvTranspose2d<T>(2 * b, b, 3, 2, 1, 1, seed, "gen.up2");
    up2_norm_ = nn::InstanceNorm2d<T>(b);
    out_conv_ = nn::Conv2d<T>(b, 3, 7, 1, 0, seed, "gen.out");
  }

  const GeneratorConfig& config() const { return cfg_; }

  static const std::vector<std::string>& known_taps() {
    static const std::vector<std::string> taps = {"input_rgb", "down1", "down2", "res1", "res5"};
    return taps;
  }

  // Analytic receptive field / stride from the kernel-stride composition.
  static int receptive_field(const std::string& tap) {
    return tap_geometry(tap).first;
  }
  static int tap_stride(const std::string& tap) { return tap_geometry(tap).second; }

  // Full translation pass. Also returns the encoder taps when requested so a
  // training step never runs the encoder twice on the same image.
  struct Forward {
    Var<T> output;
    FeatureStack<T> taps;
  };

  Forward forward(const Var<T>& x, bool collect_taps) const {
    validate_input(x);
    FeatureStack<T> taps;
    Var<T> h = encode_impl(x, collect_taps ? &taps : nullptr);
    for (size_t i = 5; i < blocks_.size(); ++i) h = blocks_[i].forward(h);
    h = ops::relu(up1_norm_.forward(up1_.forward(h)));
    h = ops::relu(up2_norm_.forward(up2_.forward(h)));
    h = ops::reflect_pad2d(h, 3, 3, 3, 3);
    h = ops::tanh_op(out_conv_.forward(h));
    return {h, std::move(taps)};
  }

  Var<T> translate(const Var<T>& x) const { return forward(x, false).output; }

  // Encoder-only pass over the requested taps (defaults to the config list).
  FeatureStack<T> encode(const Var<T>& x,
                         const std::vector<std::string>* tap_layers = nullptr) const {
    validate_input(x);
    const auto& want = tap_layers ? *tap_layers : cfg_.tap_layers;
    for (const auto& t : want) tap_geometry(t);  // throws on unknown tap
    FeatureStack<T> all;
    encode_impl(x, &all);
    FeatureStack<T> out;
    for (const auto& t : want) {
      for (auto& tap : all)
        if (tap.id == t) out.push_back(tap);
    }
    return out;
  }

  void params(nn::ParamMap<T>& out) const {
    stem_conv_.params("gen.stem", out);
    stem_norm_.params("gen.stem_norm", out);
    down1_.params("gen.down1", out);
    down1_norm_.params("gen.down1_norm", out);
    down2_.params("gen.down2", out);
    down2_norm_.params("gen.down2_norm", out);
    for (size_t i = 0; i < blocks_.size(); ++i) {
      std::string p = "gen.res" + std::to_string(i + 1);
      blocks_[i].conv1.params(p + ".conv1", out);
      blocks_[i].in1.params(p + ".in1", out);
      blocks_[i].conv2.params(p + ".conv2", out);
      blocks_[i].in2.params(p + ".in2", out);
    }
    up1_.params("gen.up1", out);
    up1_norm_.params("gen.up1_norm", out);
    up2_.params("gen.up2", out);
    up2_norm_.params("gen.up2_norm", out);
    out_conv_.params("gen.out", out);
  }

  int64_t param_count() const {
    nn::ParamMap<T> pm;
    params(pm);
    return nn::param_count(pm);
  }

 private:
  static std::pair<int, int> tap_geometry(const std::string& tap) {
    // (receptive field, stride); composed from the kernel plan above.
    if (tap == "input_rgb") return {1, 1};
    if (tap == "down1") return {9, 2};
    if (tap == "down2") return {15, 4};
    if (tap == "res1") return {35, 4};
    if (tap == "res5") return {99, 4};
    throw std::runtime_error("unknown tap layer: " + tap);
  }

  static void validate_input(const Var<T>& x) {
    check(x.value().ndim() == 4 && x.value().dim(1) == 3,
          "generator: input must be B,3,H,W, got " + shape_str(x.value().shape()));
    check(x.value().dim(2) % 4 == 0 && x.value().dim(3) % 4 == 0,
          "generator: spatial dims must be divisible by 4, got " +
              shape_str(x.value().shape()));
    check(x.value().dim(2) >= 12 && x.value().dim(3) >= 12,
          "generator: spatial dims must be at least 12, got " + shape_str(x.value().shape()));
  }

  // Runs the encoder (through residual block 5); returns the trunk tensor.
  // When taps is non-null, records all five standard taps.
  Var<T> encode_impl(const Var<T>& x, FeatureStack<T>* taps) const {
    auto record = [&](const char* id, const Var<T>& v) {
      if (!taps) return;
      auto [rf, st] = tap_geometry(id);
      taps->push_back({id, v, rf, st});
    };
    record("input_rgb", x);
    Var<T> h = ops::reflect_pad2d(x, 3, 3, 3, 3);
    h = ops::relu(stem_norm_.forward(stem_conv_.forward(h)));
    Var<T> d1 = down1_.forward(h);
    record("down1", d1);
    h = ops::relu(down1_norm_.forward(d1));
    Var<T> d2 = down2_.forward(h);
    record("down2", d2);
    h = ops::relu(down2_norm_.forward(d2));
    h = blocks_[0].forward(h);
    record("res1", h);
    for (int i = 1; i < 5; ++i) h = blocks_[static_cast<size_t>(i)].forward(h);
    record("res5", h);
    return h;
  }

  GeneratorConfig cfg_;
  nn::Conv2d<T> stem_conv_, down1_, down2_, out_conv_;
  nn::InstanceNorm2d<T> stem_norm_, down1_norm_, down2_norm_, up1_norm_, up2_norm_;
  std::vector<ResBlock> blocks_;
  nn::ConvTranspose2d<T> up1_, up2_;
};

}  // namespace cutgan
