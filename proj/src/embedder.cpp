#include "cutgan/metrics/embedder.hpp"

#include <cmath>
#include <filesystem>

#include "cutgan/core/ops.hpp"
#include "cutgan/io/checkpoint.hpp"

namespace cutgan {
namespace metrics {

namespace {

namespace op = cutgan::ops;

Tensor<float> kaiming_conv(Shape shape, uint64_t seed, const std::string& tag) {
  Rng rng = Rng::keyed(seed, tag);
  int64_t fan_in = shape[1] * shape[2] * shape[3];
  float std_ = std::sqrt(2.0f / static_cast<float>(fan_in));
  return Tensor<float>::randn(std::move(shape), rng, std_);
}

Tensor<double> softmax_rows(const Tensor<float>& logits) {
  int64_t m = logits.dim(0), c = logits.dim(1);
  Tensor<double> out(Shape{m, c});
  for (int64_t i = 0; i < m; ++i) {
    double mx = logits[i * c];
    for (int64_t j = 1; j < c; ++j) mx = std::max<double>(mx, logits[i * c + j]);
    double se = 0;
    for (int64_t j = 0; j < c; ++j) se += std::exp(static_cast<double>(logits[i * c + j]) - mx);
    for (int64_t j = 0; j < c; ++j)
      out[i * c + j] = std::exp(static_cast<double>(logits[i * c + j]) - mx) / se;
  }
  return out;
}

void validate_images(const Tensor<float>& images) {
  check(images.ndim() == 4 && images.dim(1) == 3, "embedder: images must be [B,3,H,W]");
  for (int64_t i = 0; i < images.numel(); ++i)
    check(images[i] >= -1.0001f && images[i] <= 1.0001f,
          "embedder: image values must lie in [-1,1]");
}

// Three stride-2 convs with ReLU, global average pool, then fixed linear
// feature/classifier heads. Weights come from one fixed seed, so features are
// bit-stable across runs and machines.
class ToyEmbedder final : public Embedder {
 public:
  ToyEmbedder() {
    const uint64_t seed = 0x70795f656d626564ull;  // "toy_embed"
    w1_ = kaiming_conv({16, 3, 3, 3}, seed, "toy.conv1");
    w2_ = kaiming_conv({32, 16, 3, 3}, seed, "toy.conv2");
    w3_ = kaiming_conv({kToyEmbedDim, 32, 3, 3}, seed, "toy.conv3");
    Rng rng = Rng::keyed(seed, "toy.classifier");
    wc_ = Tensor<float>::randn({kToyNumClasses, kToyEmbedDim}, rng,
                               std::sqrt(1.0f / kToyEmbedDim));
  }

  std::string id() const override { return "toy-fixed-cnn"; }
  int64_t feature_dim() const override { return kToyEmbedDim; }
  int64_t num_classes() const override { return kToyNumClasses; }

  Tensor<double> embed(const Tensor<float>& images) const override {
    return pooled(images).cast<double>();
  }

  Tensor<double> class_probs(const Tensor<float>& images) const override {
    Tensor<float> feat = pooled(images);
    int64_t b = feat.dim(0);
    Tensor<float> logits(Shape{b, kToyNumClasses});
    for (int64_t i = 0; i < b; ++i)
      for (int64_t k = 0; k < kToyNumClasses; ++k) {
        float acc = 0;
        for (int64_t j = 0; j < kToyEmbedDim; ++j)
          acc += wc_[k * kToyEmbedDim + j] * feat[i * kToyEmbedDim + j];
        logits[i * kToyNumClasses + k] = acc;
      }
    return softmax_rows(logits);
  }

 private:
  Tensor<float> pooled(const Tensor<float>& images) const {
    validate_images(images);
    auto x = Var<float>::constant(images);
    auto h = op::relu(op::conv2d(x, Var<float>::constant(w1_), Var<float>(), 2, 1));
    h = op::relu(op::conv2d(h, Var<float>::constant(w2_), Var<float>(), 2, 1));
    h = op::relu(op::conv2d(h, Var<float>::constant(w3_), Var<float>(), 2, 1));
    const Tensor<float>& f = h.value();
    int64_t b = f.dim(0), c = f.dim(1), s = f.dim(2) * f.dim(3);
    Tensor<float> out(Shape{b, c});
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < c; ++j) {
        float acc = 0;
        const float* src = f.data() + (i * c + j) * s;
        for (int64_t p = 0; p < s; ++p) acc += src[p];
        out[i * c + j] = acc / static_cast<float>(s);
      }
    return out;
  }

  Tensor<float> w1_, w2_, w3_, wc_;
};

// Executes a conv stack described in a checkpoint container:
// meta.arch = [{"tensor": "conv1", "stride": 2, "pad": 1}, ...], followed by
// global average pooling and optional "classifier" linear head.
class PretrainedEmbedder final : public Embedder {
 public:
  explicit PretrainedEmbedder(const std::string& path) : ck_(Checkpoint::load(path)) {
    check(ck_.meta.contains("arch"), "pretrained embedder: container lacks meta.arch");
    for (const auto& layer : ck_.meta.at("arch")) {
      ConvDesc d;
      d.name = layer.at("tensor");
      d.stride = layer.value("stride", 1);
      d.pad = layer.value("pad", 1);
      check(ck_.has(d.name + ".w"), "pretrained embedder: missing tensor " + d.name + ".w");
      layers_.push_back(std::move(d));
    }
    check(!layers_.empty(), "pretrained embedder: empty arch");
    feature_dim_ = ck_.get(layers_.back().name + ".w").dim(0);
    if (ck_.has("classifier.w")) num_classes_ = ck_.get("classifier.w").dim(0);
    id_ = ck_.meta.value("id", std::string("pretrained"));
  }

  std::string id() const override { return id_; }
  int64_t feature_dim() const override { return feature_dim_; }
  int64_t num_classes() const override { return num_classes_; }

  Tensor<double> embed(const Tensor<float>& images) const override {
    return pooled(images).cast<double>();
  }

  Tensor<double> class_probs(const Tensor<float>& images) const override {
    check(num_classes_ > 0, "pretrained embedder: container has no classifier head");
    Tensor<float> feat = pooled(images);
    const Tensor<float>& w = ck_.get("classifier.w");
    int64_t b = feat.dim(0), c = num_classes_, d = feature_dim_;
    Tensor<float> logits(Shape{b, c});
    for (int64_t i = 0; i < b; ++i)
      for (int64_t k = 0; k < c; ++k) {
        float acc = ck_.has("classifier.b") ? ck_.get("classifier.b")[k] : 0.f;
        for (int64_t j = 0; j < d; ++j) acc += w[k * d + j] * feat[i * d + j];
        logits[i * c + k] = acc;
      }
    return softmax_rows(logits);
  }

 private:
  struct ConvDesc {
    std::string name;
    int stride = 1, pad = 1;
  };

  Tensor<float> pooled(const Tensor<float>& images) const {
    validate_images(images);
    auto h = Var<float>::constant(images);
    for (const auto& l : layers_) {
      Var<float> bias = ck_.has(l.name + ".b")
                            ? Var<float>::constant(ck_.get(l.name + ".b"))
                            : Var<float>();
      h = op::relu(op::conv2d(h, Var<float>::constant(ck_.get(l.name + ".w")), bias,
                              l.stride, l.pad));
    }
    const Tensor<float>& f = h.value();
    int64_t b = f.dim(0), c = f.dim(1), s = f.dim(2) * f.dim(3);
    Tensor<float> out(Shape{b, c});
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < c; ++j) {
        float acc = 0;
        const float* src = f.data() + (i * c + j) * s;
        for (int64_t p = 0; p < s; ++p) acc += src[p];
        out[i * c + j] = acc / static_cast<float>(s);
      }
    return out;
  }

  Checkpoint ck_;
  std::vector<ConvDesc> layers_;
  int64_t feature_dim_ = 0;
  int64_t num_classes_ = 0;
  std::string id_;
};

}  // namespace

std::unique_ptr<Embedder> make_toy_embedder() { return std::make_unique<ToyEmbedder>(); }

std::unique_ptr<Embedder> make_pretrained_embedder(const std::string& weights_path) {
  if (!std::filesystem::exists(weights_path)) {
    throw std::runtime_error(
        "pretrained embedder weights not found at '" + weights_path +
        "'. Export a small classifier into checkpoint-container format (meta.arch listing "
        "conv tensors plus optional classifier.w/b; see README 'Evaluation embedders'), "
        "or use --embedder toy for the built-in deterministic embedder.");
  }
  return std::make_unique<PretrainedEmbedder>(weights_path);
}

std::unique_ptr<Embedder> make_embedder(const std::string& spec) {
  if (spec == "toy" || spec == "toy-fixed-cnn") return make_toy_embedder();
  if (spec.rfind("pretrained:", 0) == 0) return make_pretrained_embedder(spec.substr(11));
  if (spec == "pretrained")
    throw std::runtime_error("embedder 'pretrained' needs a path: pretrained:<weights-file>");
  throw std::runtime_error("unknown embedder '" + spec + "' (toy | pretrained:<path>)");
}

}  // namespace metrics
}  // namespace cutgan
