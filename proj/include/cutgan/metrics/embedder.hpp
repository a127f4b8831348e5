#pragma once

#include <memory>
#include <string>

#include "cutgan/core/tensor.hpp"
#include "cutgan/metrics/metrics.hpp"

namespace cutgan {
namespace metrics {

inline constexpr int64_t kToyEmbedDim = 32;
inline constexpr int64_t kToyNumClasses = 8;

// Maps image batches ([B,3,H,W] in [-1,1]) to evaluation features and class
// probabilities. The toy embedder is a fixed-seed random CNN, bit-stable
// across runs; the pretrained embedder executes a small conv net stored in a
// checkpoint container exported offline.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual int64_t feature_dim() const = 0;
  virtual int64_t num_classes() const = 0;
  // [B, feature_dim]
  virtual Tensor<double> embed(const Tensor<float>& images) const = 0;
  // [B, num_classes] rows on the simplex
  virtual Tensor<double> class_probs(const Tensor<float>& images) const = 0;
};

std::unique_ptr<Embedder> make_toy_embedder();

// Throws with export instructions when the weights file is absent.
std::unique_ptr<Embedder> make_pretrained_embedder(const std::string& weights_path);

// "toy" or "pretrained:<path>"
std::unique_ptr<Embedder> make_embedder(const std::string& spec);

}  // namespace metrics
}  // namespace cutgan
