#pragma once

#include <string>
#include <vector>

#include "cutgan/core/nn.hpp"

namespace cutgan {

struct DiscriminatorConfig {
  int n_layers = 3;  // stride-2 stages; 3 gives the 70x70 PatchGAN
  int64_t base_channels = 64;

  void validate() const {
    check(n_layers >= 1, "DiscriminatorConfig: n_layers must be >= 1");
    check(base_channels >= 1, "DiscriminatorConfig: base_channels must be positive");
  }
};

// Fully convolutional PatchGAN. Raw scores, no sigmoid: the least-squares
// adversarial loss operates on unsquashed outputs.
template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;

  PatchDiscriminator(DiscriminatorConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    int64_t b = cfg_.base_channels;
    convs_.emplace_back(3, b, 4, 2, 1, seed, "disc.conv0");
    int64_t mult = 1;
    for (int i = 1; i < cfg_.n_layers; ++i) {
      int64_t prev = mult;
      mult = std::min<int64_t>(1 << i, 8);
      convs_.emplace_back(b * prev, b * mult, 4, 2, 1, seed, "disc.conv" + std::to_string(i));
      norms_.emplace_back(b * mult);
    }
    int64_t prev = mult;
    mult = std::min<int64_t>(1 << cfg_.n_layers, 8);
    convs_.emplace_back(b * prev, b * mult, 4, 1, 1, seed,
                        "disc.conv" + std::to_string(cfg_.n_layers));
    norms_.emplace_back(b * mult);
    final_ = nn::Conv2d<T>(b * mult, 1, 4, 1, 1, seed, "disc.final");
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  // [B,3,H,W] in [-1,1] -> [B,1,N,N] raw score map.
  Var<T> forward(const Var<T>& x) const {
    check(x.value().ndim() == 4 && x.value().dim(1) == 3,
          "discriminator: input must be B,3,H,W, got " + shape_str(x.value().shape()));
    Var<T> h = ops::leaky_relu(convs_[0].forward(x), static_cast<T>(0.2));
    for (size_t i = 1; i < convs_.size(); ++i) {
      h = convs_[i].forward(h);
      h = norms_[i - 1].forward(h);
      h = ops::leaky_relu(h, static_cast<T>(0.2));
    }
    return final_.forward(h);
  }

  // Score-map edge for a square input, from the stride arithmetic.
  int64_t score_map_size(int64_t input_size) const {
    int64_t s = input_size;
    for (int i = 0; i < cfg_.n_layers; ++i) s = (s + 2 - 4) / 2 + 1;
    s = s + 2 - 4 + 1;  // stride-1 stage
    s = s + 2 - 4 + 1;  // final conv
    return s;
  }

  void params(nn::ParamMap<T>& out) const {
    for (size_t i = 0; i < convs_.size(); ++i)
      convs_[i].params("disc.conv" + std::to_string(i), out);
    for (size_t i = 0; i < norms_.size(); ++i)
      norms_[i].params("disc.norm" + std::to_string(i + 1), out);
    final_.params("disc.final", out);
  }

  int64_t param_count() const {
    nn::ParamMap<T> pm;
    params(pm);
    return nn::param_count(pm);
  }

 private:
  DiscriminatorConfig cfg_;
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<nn::InstanceNorm2d<T>> norms_;
  nn::Conv2d<T> final_;
};

}  // namespace cutgan
