#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cutgan/core/ops.hpp"
#include "cutgan/core/rng.hpp"

namespace cutgan {
namespace nn {

// Named parameter list. Registration order is fixed and deterministic; the
// optimizer and checkpoint writer iterate it directly.
template <typename T>
using ParamMap = std::vector<std::pair<std::string, Var<T>>>;

template <typename T>
int64_t param_count(const ParamMap<T>& params) {
  int64_t n = 0;
  for (const auto& [name, v] : params) n += v.value().numel();
  return n;
}

// Gaussian(0, 0.02) weights, zero bias: DCGAN-family init, one keyed stream
// per parameter so init is independent of construction order.
template <typename T>
Tensor<T> init_gaussian(Shape shape, uint64_t seed, const std::string& path, T stddev = static_cast<T>(0.02)) {
  Rng rng = Rng::keyed(seed, "init." + path);
  return Tensor<T>::randn(std::move(shape), rng, stddev);
}

template <typename T>
struct Conv2d {
  Var<T> w, b;
  int stride = 1;
  int pt = 0, pb = 0, pl = 0, pr = 0;

  Conv2d() = default;
  Conv2d(int64_t in_ch, int64_t out_ch, int k, int stride_, int pad, uint64_t seed,
         const std::string& path)
      : Conv2d(in_ch, out_ch, k, stride_, pad, pad, pad, pad, seed, path) {}
  Conv2d(int64_t in_ch, int64_t out_ch, int k, int stride_, int pt_, int pb_, int pl_, int pr_,
         uint64_t seed, const std::string& path)
      : stride(stride_), pt(pt_), pb(pb_), pl(pl_), pr(pr_) {
    w = Var<T>::leaf(init_gaussian<T>({out_ch, in_ch, k, k}, seed, path + ".w"), true);
    b = Var<T>::leaf(Tensor<T>(Shape{out_ch}, 0), true);
  }

  Var<T> forward(const Var<T>& x) const {
    return ops::conv2d(x, w, b, stride, stride, pt, pb, pl, pr);
  }

  void params(const std::string& prefix, ParamMap<T>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

template <typename T>
struct ConvTranspose2d {
  Var<T> w, b;
  int stride = 1, pad = 0, output_padding = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(int64_t in_ch, int64_t out_ch, int k, int stride_, int pad_, int outpad,
                  uint64_t seed, const std::string& path)
      : stride(stride_), pad(pad_), output_padding(outpad) {
    w = Var<T>::leaf(init_gaussian<T>({in_ch, out_ch, k, k}, seed, path + ".w"), true);
    b = Var<T>::leaf(Tensor<T>(Shape{out_ch}, 0), true);
  }

  Var<T> forward(const Var<T>& x) const {
    return ops::conv_transpose2d(x, w, b, stride, pad, output_padding);
  }

  void params(const std::string& prefix, ParamMap<T>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

template <typename T>
struct InstanceNorm2d {
  Var<T> gamma, beta;
  T eps = static_cast<T>(1e-5);

  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int64_t ch) {
    gamma = Var<T>::leaf(Tensor<T>(Shape{ch}, 1), true);
    beta = Var<T>::leaf(Tensor<T>(Shape{ch}, 0), true);
  }

  Var<T> forward(const Var<T>& x) const { return ops::instance_norm2d(x, gamma, beta, eps); }

  void params(const std::string& prefix, ParamMap<T>& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
};

template <typename T>
struct Linear {
  Var<T> w, b;

  Linear() = default;
  Linear(int64_t in_dim, int64_t out_dim, uint64_t seed, const std::string& path) {
    w = Var<T>::leaf(init_gaussian<T>({out_dim, in_dim}, seed, path + ".w"), true);
    b = Var<T>::leaf(Tensor<T>(Shape{out_dim}, 0), true);
  }

  Var<T> forward(const Var<T>& x) const { return ops::linear(x, w, b); }

  void params(const std::string& prefix, ParamMap<T>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

}  // namespace nn
}  // namespace cutgan
