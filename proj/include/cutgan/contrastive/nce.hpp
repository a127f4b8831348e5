#pragma once

#include <map>
#include <string>
#include <vector>

#include "cutgan/attention/attention.hpp"
#include "cutgan/models/generator.hpp"

namespace cutgan {

// Per-layer 2-layer MLP projection heads: C_l -> nce_dim -> nce_dim, ReLU
// between, output rows L2-normalized. Heads are created lazily on the first
// projection because C_l depends on which tap the features came from; both the
// source and translated paths share the same head.
template <typename T>
class ProjectionHeads {
 public:
  ProjectionHeads() = default;
  ProjectionHeads(int64_t nce_dim, uint64_t seed) : nce_dim_(nce_dim), seed_(seed) {}

  int64_t nce_dim() const { return nce_dim_; }

  // features_at_locations: [k, C_l] -> [k, nce_dim], unit rows.
  Var<T> project(const Var<T>& features_at_locations, const std::string& layer_id) {
    check(features_at_locations.value().ndim() == 2, "project: expects [k, C]");
    int64_t c = features_at_locations.value().dim(1);
    auto it = heads_.find(layer_id);
    if (it == heads_.end()) {
      Head h;
      h.fc1 = nn::Linear<T>(c, nce_dim_, seed_, "heads." + layer_id + ".fc1");
      h.fc2 = nn::Linear<T>(nce_dim_, nce_dim_, seed_, "heads." + layer_id + ".fc2");
      it = heads_.emplace(layer_id, std::move(h)).first;
    }
    check(it->second.fc1.w.value().dim(1) == c,
          "project: layer " + layer_id + " expects C=" +
              std::to_string(it->second.fc1.w.value().dim(1)) + ", got " + std::to_string(c));
    auto h = ops::relu(it->second.fc1.forward(features_at_locations));
    return ops::l2_normalize_rows(it->second.fc2.forward(h));
  }

  void params(nn::ParamMap<T>& out) const {
    for (const auto& [layer, head] : heads_) {
      head.fc1.params("heads." + layer + ".fc1", out);
      head.fc2.params("heads." + layer + ".fc2", out);
    }
  }

  void load_param(const std::string& name, const Tensor<T>& value) {
    // heads.<layer>.fc{1,2}.{w,b}
    check(name.rfind("heads.", 0) == 0, "heads load: bad name " + name);
    std::string rest = name.substr(6);
    auto p1 = rest.rfind('.');
    std::string field = rest.substr(p1 + 1);
    auto p2 = rest.rfind('.', p1 - 1);
    std::string fc = rest.substr(p2 + 1, p1 - p2 - 1);
    std::string layer = rest.substr(0, p2);
    Head& h = heads_[layer];
    nn::Linear<T>& lin = (fc == "fc1") ? h.fc1 : h.fc2;
    Var<T> v = Var<T>::leaf(value.clone(), true);
    if (field == "w") lin.w = v; else lin.b = v;
  }

 private:
  struct Head {
    nn::Linear<T> fc1, fc2;
  };

  int64_t nce_dim_ = 256;
  uint64_t seed_ = 0;
  std::map<std::string, Head> heads_;
};

// InfoNCE for a single query: softmax cross-entropy over the positive and N
// negatives at temperature tau. All vectors must be unit-norm.
template <typename T>
Var<T> info_nce(const Var<T>& query, const Var<T>& positive, const Var<T>& negatives, T tau) {
  check(tau > 0, "info_nce: tau must be positive");
  check(query.value().ndim() == 1 && positive.value().ndim() == 1,
        "info_nce: query/positive must be 1-D");
  check(negatives.value().ndim() == 2, "info_nce: negatives must be [N, D]");
  int64_t d = query.value().dim(0);
  check(positive.value().dim(0) == d && negatives.value().dim(1) == d,
        "info_nce: dimension mismatch");
  check(negatives.value().dim(0) >= 1, "info_nce: need at least one negative");
  auto unit = [d](const Tensor<T>& t, int64_t row) {
    T ss = 0;
    for (int64_t j = 0; j < d; ++j) ss += t[row * d + j] * t[row * d + j];
    return std::fabs(std::sqrt(static_cast<double>(ss)) - 1.0) < 1e-4;
  };
  check(unit(query.value(), 0), "info_nce: query not unit-norm");
  check(unit(positive.value(), 0), "info_nce: positive not unit-norm");
  for (int64_t i = 0; i < negatives.value().dim(0); ++i)
    check(unit(negatives.value(), i), "info_nce: negative " + std::to_string(i) + " not unit-norm");

  auto q = ops::reshape(query, {1, d});
  auto pos = ops::reshape(positive, {1, d});
  auto bank = ops::concat0(pos, negatives);                       // [N+1, D]
  auto logits = ops::matmul(q, ops::transpose2(bank));            // [1, N+1]
  logits = ops::mul_scalar(logits, static_cast<T>(1) / tau);
  return ops::cross_entropy_rows(logits, {0});
}

template <typename T>
struct PatchNceResult {
  Var<T> loss;
  PatchSelection selection;
};

// [C,H,W] copy of one batch item.
template <typename T>
Tensor<T> item_features(const Tensor<T>& bchw, int64_t b) {
  int64_t C = bchw.dim(1), H = bchw.dim(2), W = bchw.dim(3);
  Tensor<T> out(Shape{C, H, W});
  std::copy_n(bchw.data() + b * C * H * W, C * H * W, out.data());
  return out;
}

// PatchNCE over tapped feature stacks. Significance is computed on the source
// taps (detached), the same top-k index set is gathered from both stacks, and
// each query's negatives are the other k-1 selected source patches of the same
// layer and image. Result is the mean InfoNCE over every selected location of
// every layer and batch item.
template <typename T>
PatchNceResult<T> patch_nce_from_taps(const FeatureStack<T>& src_taps,
                                      const FeatureStack<T>& translated_taps,
                                      ProjectionHeads<T>& heads, AttentionScorer<T>& attention,
                                      int64_t k, T tau, uint64_t draw_seed) {
  check(tau > 0, "patch_nce: tau must be positive");
  check(src_taps.size() == translated_taps.size() && !src_taps.empty(),
        "patch_nce: tap stacks must align");
  int64_t batch = src_taps[0].features.value().dim(0);

  PatchSelection selection;
  selection.k = static_cast<int>(k);
  Var<T> acc;
  int64_t total_locations = 0;
  for (size_t l = 0; l < src_taps.size(); ++l) {
    const auto& tap_s = src_taps[l];
    const auto& tap_t = translated_taps[l];
    check(tap_s.id == tap_t.id, "patch_nce: tap order mismatch");
    check(tap_s.features.value().shape() == tap_t.features.value().shape(),
          "patch_nce: tap " + tap_s.id + " shape mismatch");
    int64_t S = tap_s.features.value().dim(2) * tap_s.features.value().dim(3);
    int64_t kl = std::min<int64_t>(k, S);
    check(kl >= 2, "patch_nce: need >= 2 locations per layer, tap " + tap_s.id +
                       " offers " + std::to_string(std::min<int64_t>(k, S)));
    for (int64_t b = 0; b < batch; ++b) {
      Tensor<T> item = item_features(tap_s.features.value(), b);
      auto scores = attention.significance(
          item, tap_s.id, Rng::keyed(draw_seed, "nce.draw", static_cast<uint64_t>(l),
                                     static_cast<uint64_t>(b)).u64());
      LayerSelection sel = select_top_k(scores, kl);
      if (b == 0) {
        selection.layer_ids.push_back(tap_s.id);
        selection.layers.push_back(sel);
      }
      auto src_loc = ops::gather_rows(ops::item_locations(tap_s.features, b), sel.indices);
      auto tr_loc = ops::gather_rows(ops::item_locations(tap_t.features, b), sel.indices);
      auto z_pos = heads.project(src_loc, tap_s.id);   // [k, D] positives (source)
      auto z_query = heads.project(tr_loc, tap_s.id);  // [k, D] queries (translated)
      auto logits = ops::matmul(z_query, ops::transpose2(z_pos));
      logits = ops::mul_scalar(logits, static_cast<T>(1) / tau);
      std::vector<int64_t> diag(static_cast<size_t>(kl));
      std::iota(diag.begin(), diag.end(), 0);
      auto ce = ops::cross_entropy_rows(logits, diag);  // mean over the kl queries
      auto weighted = ops::mul_scalar(ce, static_cast<T>(kl));
      acc = acc.defined() ? ops::add(acc, weighted) : weighted;
      total_locations += kl;
    }
  }
  Var<T> loss = ops::mul_scalar(acc, static_cast<T>(1) / static_cast<T>(total_locations));
  return {loss, std::move(selection)};
}

// Convenience entry point matching the operation contract: encodes both images
// through the generator's feature taps. y_hat must be the translation of x
// (same spatial dims).
template <typename T>
PatchNceResult<T> patch_nce_loss(const ResnetGenerator<T>& gen, ProjectionHeads<T>& heads,
                                 AttentionScorer<T>& attention, const Var<T>& x,
                                 const Var<T>& y_hat, int64_t k, T tau, uint64_t draw_seed) {
  check(x.value().shape() == y_hat.value().shape(), "patch_nce_loss: x and y_hat shapes differ");
  FeatureStack<T> src = gen.encode(x);
  FeatureStack<T> tr = gen.encode(y_hat);
  return patch_nce_from_taps(src, tr, heads, attention, k, tau, draw_seed);
}

// Identity-regularizer variant: PatchNCE applied to a domain-Y image and its
// own translation.
template <typename T>
PatchNceResult<T> identity_patch_nce(const ResnetGenerator<T>& gen, ProjectionHeads<T>& heads,
                                     AttentionScorer<T>& attention, const Var<T>& y, int64_t k,
                                     T tau, uint64_t draw_seed) {
  Var<T> y_hat = gen.translate(y);
  return patch_nce_loss(gen, heads, attention, y, y_hat, k, tau, draw_seed);
}

}  // namespace cutgan
