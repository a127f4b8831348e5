#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cutgan/core/nn.hpp"

namespace cutgan {

enum class AttentionKind { self_attention, external_attention, bam, triplet, random };

inline AttentionKind attention_kind_from_string(const std::string& s) {
  if (s == "self") return AttentionKind::self_attention;
  if (s == "external") return AttentionKind::external_attention;
  if (s == "bam") return AttentionKind::bam;
  if (s == "triplet") return AttentionKind::triplet;
  if (s == "random") return AttentionKind::random;
  throw std::runtime_error("unknown attention mechanism '" + s +
                           "' (expected self|external|bam|triplet|random)");
}

inline std::string attention_kind_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::self_attention: return "self";
    case AttentionKind::external_attention: return "external";
    case AttentionKind::bam: return "bam";
    case AttentionKind::triplet: return "triplet";
    case AttentionKind::random: return "random";
  }
  return "?";
}

struct AttentionConfig {
  AttentionKind kind = AttentionKind::self_attention;
  int self_key_dim = 0;      // 0 = auto max(1, C/8)
  int external_memory = 64;  // memory slots
  int bam_reduction = 16;    // channel reduction (auto-clamped to >= 1)
  int bam_dilation = 4;
};

// Top-k selection result for one layer.
struct LayerSelection {
  std::vector<int64_t> indices;     // descending significance, ties by ascending index
  std::vector<double> significance; // aligned with indices
};

struct PatchSelection {
  std::vector<std::string> layer_ids;
  std::vector<LayerSelection> layers;
  int k = 256;
};

// Hard top-k with the documented tie-break. Invariant under strictly
// monotone rescaling of the scores.
template <typename T>
LayerSelection select_top_k(const std::vector<T>& significance, int64_t k) {
  check(k >= 1, "select_patches: k must be >= 1");
  int64_t s = static_cast<int64_t>(significance.size());
  std::vector<int64_t> order(static_cast<size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (significance[static_cast<size_t>(a)] != significance[static_cast<size_t>(b)])
      return significance[static_cast<size_t>(a)] > significance[static_cast<size_t>(b)];
    return a < b;
  });
  int64_t kk = std::min(k, s);
  LayerSelection sel;
  sel.indices.assign(order.begin(), order.begin() + kk);
  sel.significance.reserve(static_cast<size_t>(kk));
  for (int64_t i = 0; i < kk; ++i)
    sel.significance.push_back(static_cast<double>(significance[static_cast<size_t>(sel.indices[static_cast<size_t>(i)])]));
  return sel;
}

namespace detail {

// Repeated mirroring keeps the index in range even when the pad exceeds the
// map size (tiny maps with dilated kernels).
inline int64_t mirror_safe(int64_t k, int64_t n) {
  if (n == 1) return 0;
  while (k < 0 || k >= n) {
    if (k < 0) k = -k;
    if (k >= n) k = 2 * n - 2 - k;
  }
  return k;
}

// Plain forward-only conv with dilation and reflect padding, for the scoring
// networks (small channel counts; no GEMM needed). Reflect padding keeps
// constant inputs constant, so score maps inherit the input's symmetry.
template <typename T>
Tensor<T> tensor_conv2d(const Tensor<T>& x, const Tensor<T>& w, int pad, int dilation) {
  int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  int64_t OC = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  check(w.dim(1) == C, "tensor_conv2d: channel mismatch");
  Tensor<T> out(Shape{OC, H, W}, 0);
  for (int64_t oc = 0; oc < OC; ++oc) {
    for (int64_t c = 0; c < C; ++c) {
      const T* wk = w.data() + (oc * C + c) * kh * kw;
      const T* xc = x.data() + c * H * W;
      T* o = out.data() + oc * H * W;
      for (int64_t i = 0; i < H; ++i) {
        for (int64_t j = 0; j < W; ++j) {
          T acc = 0;
          for (int64_t ki = 0; ki < kh; ++ki) {
            int64_t ih = mirror_safe(i - pad + ki * dilation, H);
            for (int64_t kj = 0; kj < kw; ++kj) {
              int64_t iw = mirror_safe(j - pad + kj * dilation, W);
              acc += wk[ki * kw + kj] * xc[ih * W + iw];
            }
          }
          o[i * W + j] += acc;
        }
      }
    }
  }
  return out;
}

template <typename T>
inline T sigmoid_s(T v) {
  return 1 / (1 + std::exp(-v));
}

}  // namespace detail

// Computes a per-location significance score over one tapped feature map.
// Mechanism weights are created lazily per (layer, channel count), seeded, and
// live outside the generator and discriminator; scoring is forward-only (hard
// top-k selection passes no gradient), so weights stay at their seeded values.
template <typename T>
class AttentionScorer {
 public:
  AttentionScorer() = default;
  AttentionScorer(AttentionConfig cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {}

  const AttentionConfig& config() const { return cfg_; }
  AttentionKind kind() const { return cfg_.kind; }

  static int64_t min_channels(const AttentionConfig& cfg) {
    if (cfg.kind == AttentionKind::self_attention && cfg.self_key_dim > 0)
      return cfg.self_key_dim;
    return 1;
  }

  // features: [C,H,W] for one image. draw_seed feeds only the random kind.
  std::vector<T> significance(const Tensor<T>& features, const std::string& layer_id,
                              uint64_t draw_seed) {
    check(features.ndim() == 3, "significance: features must be C,H,W");
    check(features.all_finite(), "significance: non-finite feature values");
    int64_t C = features.dim(0), H = features.dim(1), W = features.dim(2);
    check(C >= min_channels(cfg_),
          "significance: channel count " + std::to_string(C) +
              " below mechanism minimum " + std::to_string(min_channels(cfg_)));
    int64_t S = H * W;
    switch (cfg_.kind) {
      case AttentionKind::random: {
        Rng rng = Rng::keyed(draw_seed, "attn.random." + layer_id);
        std::vector<T> s(static_cast<size_t>(S));
        for (auto& v : s) v = static_cast<T>(rng.uniform());
        return s;
      }
      case AttentionKind::self_attention:
        return self_attention_scores(features, layer_id);
      case AttentionKind::external_attention:
        return external_attention_scores(features, layer_id);
      case AttentionKind::bam:
        return bam_scores(features, layer_id);
      case AttentionKind::triplet:
        return triplet_attention_scores(features, layer_id);
    }
    throw std::runtime_error("significance: unreachable");
  }

  // score(j) = total attention received by location j: column sums of the
  // row-softmaxed QK^T map.
  std::vector<T> self_attention_scores(const Tensor<T>& features, const std::string& layer_id) {
    int64_t C = features.dim(0), S = features.dim(1) * features.dim(2);
    int64_t d = cfg_.self_key_dim > 0 ? cfg_.self_key_dim : std::max<int64_t>(1, C / 8);
    auto& lw = layer_weights(layer_id, C);
    if (!lw.a.defined()) {
      lw.a = Var<T>::leaf(nn::init_gaussian<T>({d, C}, seed_, wpath(layer_id) + ".wq"), true);
      lw.b = Var<T>::leaf(nn::init_gaussian<T>({d, C}, seed_, wpath(layer_id) + ".wk"), true);
    }
    // Q = F Wq^T, K = F Wk^T with F [S,C] location-major
    Tensor<T> F = locations_matrix(features);
    Tensor<T> Q(Shape{S, d}), K(Shape{S, d});
    ops::CMapRM<T> Fm(F.data(), S, C);
    ops::CMapRM<T> Wq(lw.a.value().data(), d, C);
    ops::CMapRM<T> Wk(lw.b.value().data(), d, C);
    ops::MapRM<T>(Q.data(), S, d).noalias() = Fm * Wq.transpose();
    ops::MapRM<T>(K.data(), S, d).noalias() = Fm * Wk.transpose();
    T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    std::vector<T> score(static_cast<size_t>(S), 0);
    // stream row blocks of the S x S attention map
    const int64_t kBlock = 256;
    Tensor<T> logits(Shape{kBlock, S});
    for (int64_t r0 = 0; r0 < S; r0 += kBlock) {
      int64_t rows = std::min(kBlock, S - r0);
      ops::CMapRM<T> Qb(Q.data() + r0 * d, rows, d);
      ops::CMapRM<T> Km(K.data(), S, d);
      ops::MapRM<T> Lb(logits.data(), rows, S);
      Lb.noalias() = Qb * Km.transpose();
      for (int64_t r = 0; r < rows; ++r) {
        T* row = logits.data() + r * S;
        T mx = row[0] * scale;
        for (int64_t j = 0; j < S; ++j) {
          row[j] *= scale;
          mx = std::max(mx, row[j]);
        }
        T se = 0;
        for (int64_t j = 0; j < S; ++j) {
          row[j] = std::exp(row[j] - mx);
          se += row[j];
        }
        T inv = 1 / se;
        for (int64_t j = 0; j < S; ++j) score[static_cast<size_t>(j)] += row[j] * inv;
      }
    }
    return score;
  }

  // Column-normalized attention from external memory units; score(i) is the
  // mass location i receives across all memory slots.
  std::vector<T> external_attention_scores(const Tensor<T>& features, const std::string& layer_id) {
    int64_t C = features.dim(0), S = features.dim(1) * features.dim(2);
    int64_t m = cfg_.external_memory;
    auto& lw = layer_weights(layer_id, C);
    if (!lw.a.defined()) {
      lw.a = Var<T>::leaf(nn::init_gaussian<T>({m, C}, seed_, wpath(layer_id) + ".mk"), true);
    }
    Tensor<T> F = locations_matrix(features);
    Tensor<T> L(Shape{S, m});
    ops::CMapRM<T> Fm(F.data(), S, C);
    ops::CMapRM<T> Mk(lw.a.value().data(), m, C);
    ops::MapRM<T>(L.data(), S, m).noalias() = Fm * Mk.transpose();
    std::vector<T> score(static_cast<size_t>(S), 0);
    for (int64_t j = 0; j < m; ++j) {
      T mx = L[j];
      for (int64_t i = 0; i < S; ++i) mx = std::max(mx, L[i * m + j]);
      T se = 0;
      for (int64_t i = 0; i < S; ++i) se += std::exp(L[i * m + j] - mx);
      T inv = 1 / se;
      for (int64_t i = 0; i < S; ++i)
        score[static_cast<size_t>(i)] += std::exp(L[i * m + j] - mx) * inv;
    }
    return score;
  }

  // Sigmoid of the dilated-bottleneck spatial branch, sampled per location.
  std::vector<T> bam_scores(const Tensor<T>& features, const std::string& layer_id) {
    int64_t C = features.dim(0), H = features.dim(1), W = features.dim(2);
    int64_t cr = std::max<int64_t>(1, C / cfg_.bam_reduction);
    auto& lw = layer_weights(layer_id, C);
    if (!lw.a.defined()) {
      lw.a = Var<T>::leaf(nn::init_gaussian<T>({cr, C, 1, 1}, seed_, wpath(layer_id) + ".reduce"), true);
      lw.b = Var<T>::leaf(nn::init_gaussian<T>({cr, cr, 3, 3}, seed_, wpath(layer_id) + ".dil1"), true);
      lw.c = Var<T>::leaf(nn::init_gaussian<T>({cr, cr, 3, 3}, seed_, wpath(layer_id) + ".dil2"), true);
      lw.d = Var<T>::leaf(nn::init_gaussian<T>({1, cr, 1, 1}, seed_, wpath(layer_id) + ".score"), true);
    }
    auto relu_inplace = [](Tensor<T>& t) {
      for (int64_t i = 0; i < t.numel(); ++i) t[i] = t[i] > 0 ? t[i] : 0;
    };
    Tensor<T> h = detail::tensor_conv2d(features, lw.a.value(), 0, 1);
    relu_inplace(h);
    h = detail::tensor_conv2d(h, lw.b.value(), cfg_.bam_dilation, cfg_.bam_dilation);
    relu_inplace(h);
    h = detail::tensor_conv2d(h, lw.c.value(), cfg_.bam_dilation, cfg_.bam_dilation);
    relu_inplace(h);
    Tensor<T> s = detail::tensor_conv2d(h, lw.d.value(), 0, 1);
    std::vector<T> score(static_cast<size_t>(H * W));
    for (int64_t i = 0; i < H * W; ++i) score[static_cast<size_t>(i)] = detail::sigmoid_s(s[i]);
    return score;
  }

  // Mean of the spatial gates of the three rotation branches.
  std::vector<T> triplet_attention_scores(const Tensor<T>& features, const std::string& layer_id) {
    int64_t C = features.dim(0), H = features.dim(1), W = features.dim(2);
    auto& lw = layer_weights(layer_id, C);
    if (!lw.a.defined()) {
      lw.a = Var<T>::leaf(nn::init_gaussian<T>({1, 2, 7, 7}, seed_, wpath(layer_id) + ".hw"), true);
      lw.b = Var<T>::leaf(nn::init_gaussian<T>({1, 2, 7, 7}, seed_, wpath(layer_id) + ".hc"), true);
      lw.c = Var<T>::leaf(nn::init_gaussian<T>({1, 2, 7, 7}, seed_, wpath(layer_id) + ".cw"), true);
    }
    // Z-pool (max, mean) over the axis being gated away, then a 7x7 conv.
    // axis 0 -> [2,H,W], axis 1 -> [2,C,W], axis 2 -> [2,C,H]
    auto zpool = [](const Tensor<T>& x, int axis) {
      int64_t C_ = x.dim(0), H_ = x.dim(1), W_ = x.dim(2);
      int64_t d0 = axis == 0 ? C_ : (axis == 1 ? H_ : W_);
      int64_t rows = axis == 0 ? H_ : C_;
      int64_t cols = axis == 2 ? H_ : W_;
      Tensor<T> out(Shape{2, rows, cols});
      for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) {
          T mx = -std::numeric_limits<T>::infinity();
          T mean = 0;
          for (int64_t a = 0; a < d0; ++a) {
            T v;
            if (axis == 0) v = x[(a * H_ + i) * W_ + j];
            else if (axis == 1) v = x[(i * H_ + a) * W_ + j];
            else v = x[(i * H_ + j) * W_ + a];
            mx = std::max(mx, v);
            mean += v;
          }
          mean /= static_cast<T>(d0);
          out[(0 * rows + i) * cols + j] = mx;
          out[(1 * rows + i) * cols + j] = mean;
        }
      }
      return out;
    };
    Tensor<T> g_hw = detail::tensor_conv2d(zpool(features, 0), lw.a.value(), 3, 1);  // [1,H,W]
    Tensor<T> g_hc = detail::tensor_conv2d(zpool(features, 2), lw.b.value(), 3, 1);  // [1,C,H]
    Tensor<T> g_cw = detail::tensor_conv2d(zpool(features, 1), lw.c.value(), 3, 1);  // [1,C,W]
    // reduce channel-involving gates to per-row / per-column means
    std::vector<T> gh(static_cast<size_t>(H), 0), gw(static_cast<size_t>(W), 0);
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t h = 0; h < H; ++h)
        gh[static_cast<size_t>(h)] += detail::sigmoid_s(g_hc[c * H + h]);
      for (int64_t w = 0; w < W; ++w)
        gw[static_cast<size_t>(w)] += detail::sigmoid_s(g_cw[c * W + w]);
    }
    for (auto& v : gh) v /= static_cast<T>(C);
    for (auto& v : gw) v /= static_cast<T>(C);
    std::vector<T> score(static_cast<size_t>(H * W));
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w)
        score[static_cast<size_t>(h * W + w)] =
            (detail::sigmoid_s(g_hw[h * W + w]) + gh[static_cast<size_t>(h)] +
             gw[static_cast<size_t>(w)]) /
            3;
    return score;
  }

  void params(nn::ParamMap<T>& out) const {
    for (const auto& [key, lw] : weights_) {
      const char* names[4] = {".w0", ".w1", ".w2", ".w3"};
      const Var<T>* vars[4] = {&lw.a, &lw.b, &lw.c, &lw.d};
      for (int i = 0; i < 4; ++i)
        if (vars[i]->defined()) out.emplace_back("attn." + key + names[i], *vars[i]);
    }
  }

  // Restores lazily created weights from checkpoint tensors.
  void load_param(const std::string& name, const Tensor<T>& value) {
    // name: attn.<kind>.<layer>.c<channels>.w<i>
    check(name.rfind("attn.", 0) == 0, "attention load: bad name " + name);
    std::string rest = name.substr(5);
    auto dot = rest.rfind('.');
    std::string key = rest.substr(0, dot);
    int slot = rest[dot + 2] - '0';
    auto& lw = weights_[key];
    Var<T>* vars[4] = {&lw.a, &lw.b, &lw.c, &lw.d};
    *vars[slot] = Var<T>::leaf(value.clone(), true);
  }

 private:
  struct LayerWeights {
    Var<T> a, b, c, d;
  };

  std::string wpath(const std::string& layer_id) const {
    return "attn." + attention_kind_name(cfg_.kind) + "." + layer_id;
  }

  LayerWeights& layer_weights(const std::string& layer_id, int64_t channels) {
    std::string key = attention_kind_name(cfg_.kind) + "." + layer_id + ".c" +
                      std::to_string(channels);
    return weights_[key];
  }

  static Tensor<T> locations_matrix(const Tensor<T>& features) {
    int64_t C = features.dim(0), S = features.dim(1) * features.dim(2);
    Tensor<T> F(Shape{S, C});
    for (int64_t c = 0; c < C; ++c)
      for (int64_t s = 0; s < S; ++s) F[s * C + c] = features[c * S + s];
    return F;
  }

  AttentionConfig cfg_;
  uint64_t seed_ = 0;
  std::map<std::string, LayerWeights> weights_;
};

}  // namespace cutgan
